#include "hvdc/emt/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>

namespace hvdc {

const std::vector<double>& TransientResult::trace(const std::string& name) const {
    auto it = traces.find(name);
    if (it == traces.end()) throw SimulationError("no trace named '" + name + "'");
    return it->second;
}

bool TransientResult::blocked(const std::string& converter) const {
    return std::any_of(blocks.begin(), blocks.end(), [&](const BlockEvent& b) { return b.converter == converter; });
}

Measurements derive_measurements(const TransientResult& result, const MeasurementSpec& spec) {
    const auto& t = result.time_s;
    const auto& u_c = result.trace("U_C");
    const auto& i_cb = result.trace("I_cb");
    const auto& i_in = result.trace("I_in");
    const auto& i_conn = result.trace("I_conn");
    if (t.size() < 2) throw SimulationError("trace too short to derive measurements");

    const double threshold = u_c[0] - spec.arrival_drop_pu * spec.u_dc_kv * 1e3;
    std::size_t ia = 0;
    for (std::size_t k = 1; k < u_c.size(); ++k)
        if (u_c[k] < threshold) {
            ia = k;
            break;
        }
    if (ia == 0) throw SimulationError("fault wave did not reach the breaker terminal within the horizon");

    const auto n_steps = static_cast<std::size_t>(std::lround(spec.t_n_ms * 1e-3 / result.dt_s));
    const std::size_t ib = std::min(ia + n_steps, t.size() - 1);

    Measurements m;
    m.t_arrival_ms = t[ia] * 1e3;
    m.t_clamp_ms = m.t_arrival_ms + spec.t_n_ms;
    m.delta_i_in_ka = (i_in[ib] - i_in[ia]) * 1e-3;
    if (spec.critical_converter) {
        const auto& i_dc = result.trace("I_dc:" + *spec.critical_converter);
        m.delta_i_con_ka = (i_dc[ib] - i_dc[ia]) * 1e-3;
        m.delta_i_cab_ka = (i_conn[ib] - i_conn[ia]) * 1e-3 - m.delta_i_con_ka;
    }
    for (std::size_t k = 0; k <= ib; ++k) m.i_cb_peak_ka = std::max(m.i_cb_peak_ka, std::abs(i_cb[k]) * 1e-3);
    for (const auto& conv : spec.converters_of_interest) {
        const auto& arm = result.trace("i_arm:" + conv);
        for (std::size_t k = ia; k < arm.size(); ++k) m.i_arm_peak_ka = std::max(m.i_arm_peak_ka, arm[k] * 1e-3);
    }
    if (ib > ia) {
        double area = 0.0;
        for (std::size_t k = ia; k < ib; ++k) area += 0.5 * (u_c[k] + u_c[k + 1]) * (t[k + 1] - t[k]);
        m.u_c_avg_kv = area / (t[ib] - t[ia]) * 1e-3;
    } else {
        m.u_c_avg_kv = u_c[ia] * 1e-3;
    }
    return m;
}

}  // namespace hvdc

namespace hvdc::emt {

namespace {

// A split cable is represented by two halves named <id>#a and <id>#b.
const CableModel& cable_at(const DiscretizedNetwork& net, const std::string& id, int bus_node) {
    for (const auto& c : net.cables()) {
        const bool match = c.id == id || c.id == id + "#a" || c.id == id + "#b";
        if (match && (c.node_a == bus_node || c.node_b == bus_node)) return c;
    }
    throw SimulationError("cable " + id + " is not attached to bus " + net.node_name(bus_node));
}

void settle(DiscretizedNetwork& net, const GridModel& model, const SimulatorOptions& opts) {
    std::vector<int> nodes;
    for (const auto& b : model.buses) nodes.push_back(net.node(b.id));
    std::vector<double> i0;
    for (const auto& b : net.breakers()) i0.push_back(net.breaker_current(b));

    const double tol = opts.settle_tolerance_pu * net.nominal_voltage();
    const auto window = std::max<long>(1, std::lround(opts.settle_window_ms * 1e-3 / net.dt()));
    const auto limit = std::lround(opts.settle_limit_ms * 1e-3 / net.dt());
    bool settled = false;
    for (long done = 0; done < limit && !settled; done += window) {
        std::vector<double> start;
        for (int n : nodes) start.push_back(net.voltage(n));
        double drift = 0.0;
        for (long k = 0; k < window; ++k) {
            net.step();
            for (std::size_t j = 0; j < nodes.size(); ++j)
                drift = std::max(drift, std::abs(net.voltage(nodes[j]) - start[j]));
        }
        settled = drift < tol;
    }
    if (!settled) throw SimulationError("pre-fault state did not settle");

    const auto& brs = net.breakers();
    for (std::size_t j = 0; j < brs.size(); ++j) {
        const double i = net.breaker_current(brs[j]);
        const double scale = std::max(std::abs(i0[j]), brs[j].params.i_rated_ka * 1e3);
        if (std::abs(i - i0[j]) > 0.01 * scale)
            throw SimulationError("breaker " + brs[j].id + " pre-fault current departs from the power flow");
    }
}

}  // namespace

double automatic_horizon_ms(const GridModel& model, const DesignScenario& scen) {
    double tau = 0.0;
    for (const auto& c : model.cables) tau = std::max(tau, c.params.travel_time_ms());
    return scen.neutralization_time_ms() + tau + 2.0;
}

TransientResult EmtSimulator::run(const GridModel& base, const DesignScenario& scen, const FaultCase& fc) {
    GridModel model = base.with_scenario(scen);
    for (auto& b : model.breakers) {
        auto it = fc.inductances_mh.find(b.id);
        if (it != fc.inductances_mh.end()) b.l_dc_mh = it->second;
    }

    std::optional<FaultLocation> split;
    std::string fault_bus = fc.fault.bus;
    if (!fc.fault.on_bus()) {
        const auto& c = model.cable(fc.fault.cable);
        if (fc.fault.position_km >= c.params.length_km)
            fault_bus = fc.fault.bus == c.from ? c.to : c.from;
        else
            split = fc.fault;
    }

    DiscretizedNetwork net = build_network(model, scen, split, opts_.engine);
    warnings_ = net.warnings();
    std::map<std::string, double> setpoints = scen.setpoints_pu;
    for (const auto& [k, v] : fc.setpoints_pu) setpoints[k] = v;
    if (fc.zero_sources) net.disable_sources();
    net.initialize_steady_state(setpoints);
    settle(net, model, opts_);
    net.reset_clock();

    const int fault_node = split ? net.node("F") : net.node(fault_bus);
    net.set_fault(fault_node);
    net.activate_fault();

    const double u_nom = net.nominal_voltage();
    if (fc.trip) {
        const auto& zone = model.zone(fc.faulted_zone);
        auto in_zone = [&](const std::string& bus) {
            return std::find(zone.buses.begin(), zone.buses.end(), bus) != zone.buses.end();
        };
        for (const auto& br : model.breakers) {
            const bool from_in = in_zone(br.from);
            const bool to_in = in_zone(br.to);
            if (from_in == to_in) continue;
            auto& bm = net.breaker(br.id);
            bm.armed = true;
            bm.detect_node = net.node(from_in ? br.from : br.to);
            bm.detect_threshold_v = net.voltage(bm.detect_node) - 0.05 * u_nom;
        }
    }

    const int near = net.node(fc.near_bus);
    const int far = net.node(fc.far_bus);
    const auto& study = model.breaker(fc.study_breaker);
    const double cb_sign = study.from == fc.near_bus ? 1.0 : -1.0;
    const auto& study_model = net.breaker(fc.study_breaker);

    std::vector<const CableModel*> infeed;
    for (const auto& id : fc.infeed_cables) infeed.push_back(&cable_at(net, id, near));
    std::vector<std::pair<const BreakerModel*, double>> infeed_br;
    for (const auto& id : fc.infeed_breakers) {
        const auto& b = model.breaker(id);
        infeed_br.emplace_back(&net.breaker(id), b.to == fc.near_bus ? 1.0 : -1.0);
    }
    const CableModel* conn = fc.connection_cable ? &cable_at(net, *fc.connection_cable, near) : nullptr;
    const ConverterModel* direct = nullptr;
    if (!conn && fc.critical_converter) {
        const auto& cm = net.converter(*fc.critical_converter);
        if (cm.terminal == near) direct = &cm;
    }

    const double horizon_ms =
        fc.horizon_ms > 0.0 ? fc.horizon_ms : (scen.horizon_ms > 0.0 ? scen.horizon_ms : automatic_horizon_ms(model, scen));
    const auto steps = static_cast<std::size_t>(std::lround(horizon_ms * 1e-3 / net.dt()));

    TransientResult res;
    res.dt_s = net.dt();
    auto& tr = res.traces;
    std::vector<std::pair<std::vector<double>*, std::function<double()>>> probes;
    auto probe = [&](const std::string& name, std::function<double()> f) {
        auto& v = tr[name];
        v.reserve(steps + 1);
        probes.emplace_back(&v, std::move(f));
    };
    probe("U_near", [&] { return net.voltage(near); });
    probe("U_C", [&] { return net.voltage(far); });
    probe("I_cb", [&] { return cb_sign * net.breaker_current(study_model); });
    probe("I_in", [&] {
        double s = 0.0;
        for (const auto* c : infeed) s += net.cable_current_into(*c, near);
        for (const auto& [b, sign] : infeed_br) s += sign * net.breaker_current(*b);
        return s;
    });
    probe("I_conn", [&] {
        if (conn) return net.cable_current_into(*conn, near);
        if (direct) return net.converter_current(*direct);
        return 0.0;
    });
    for (const auto& cm : net.converters()) {
        const auto* p = &cm;
        probe("I_dc:" + cm.id, [&net, p] { return net.converter_current(*p); });
        probe("i_arm:" + cm.id, [&net, p] { return p->arm_current_estimate(net.converter_current(*p)); });
    }
    for (const auto& b : model.buses) {
        const int n = net.node(b.id);
        probe("U:" + b.id, [&net, n] { return net.voltage(n); });
    }
    for (const auto& bm : net.breakers()) {
        const auto* p = &bm;
        probe("I_br:" + bm.id, [&net, p] { return net.breaker_current(*p); });
    }

    res.time_s.reserve(steps + 1);
    auto record = [&] {
        res.time_s.push_back(net.time());
        for (auto& [vec, f] : probes) vec->push_back(f());
    };
    record();
    for (std::size_t k = 0; k < steps; ++k) {
        net.step();
        record();
    }

    for (const auto& cm : net.converters())
        if (cm.blocked) res.blocks.push_back({cm.id, cm.block_time_s * 1e3});
    for (const auto& bm : net.breakers()) res.varistor_energy_mj[bm.id] = bm.varistor_energy_j * 1e-6;

    MeasurementSpec spec;
    spec.u_dc_kv = u_nom * 1e-3;
    spec.t_n_ms = scen.neutralization_time_ms();
    spec.critical_converter = fc.critical_converter;
    spec.converters_of_interest = fc.converters_of_interest;
    res.measured = derive_measurements(res, spec);
    return res;
}

void write_traces_csv(const TransientResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw SimulationError("cannot write " + path.string());
    out << "t_ms";
    for (const auto& [name, _] : result.traces) out << ',' << name;
    out << '\n' << std::setprecision(9);
    for (std::size_t k = 0; k < result.time_s.size(); ++k) {
        out << result.time_s[k] * 1e3;
        for (const auto& [_, v] : result.traces) out << ',' << v[k] * 1e-3;
        out << '\n';
    }
}

}  // namespace hvdc::emt

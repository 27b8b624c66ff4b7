#include "hvdc/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include "hvdc/emt/simulator.hpp"

namespace hvdc {

ConverterLimit converter_limit(const ConverterParams& p, double k_pu) {
    if (k_pu <= 1.0) throw AnalyticsError("K must exceed 1");
    ConverterLimit lim;
    lim.i_max_ka = 3.0 * (k_pu * p.i_arm_rated_ka - p.ac_current_limit_peak_ka() / 2.0);
    lim.i_rated_ka = p.rated_dc_current_ka();
    return lim;
}

ConverterRequirement inductor_for_converter(double u_dc_kv, double u_m_kv, double t_n_ms, double l_eq_mh,
                                            double d_i_con_c_ka, double d_i_in_ka, double d_i_cab_ka) {
    const double denom = d_i_con_c_ka + d_i_in_ka + d_i_cab_ka;
    if (denom <= 0.0) throw AnalyticsError("converter requirement undefined: current increments sum to a non-positive value");
    ConverterRequirement r;
    r.raw_mh = ((u_dc_kv - u_m_kv) * t_n_ms - l_eq_mh * d_i_con_c_ka) / denom;
    r.constrained = r.raw_mh >= 0.0;
    r.l_mh = std::max(r.raw_mh, 0.0);
    return r;
}

double inductor_for_breaker(double u_dc_kv, double u_m_kv, double i_cb_max_ka, double i_cb_r_ka, double t_n_ms) {
    if (i_cb_max_ka <= i_cb_r_ka) throw AnalyticsError("I_cb_max must exceed the rated breaker current");
    return (u_dc_kv - u_m_kv) * t_n_ms / (i_cb_max_ka - i_cb_r_ka);
}

bool converged(double l_mh, double l_prev_mh, double epsilon) {
    if (l_prev_mh <= 0.0) return l_mh == l_prev_mh;
    return std::abs(l_mh - l_prev_mh) / l_prev_mh < epsilon;
}

const char* to_string(Limiting l) { return l == Limiting::Converter ? "converter" : "breaker"; }

KpiSet kpis_breaker_only(double i_cb_max_ka, double i_cb_peak_ka, double i_cb_rated_ka) {
    KpiSet k;
    k.breaker = (i_cb_max_ka - i_cb_peak_ka) / (i_cb_max_ka - i_cb_rated_ka);
    k.overall = k.breaker;
    k.limiting = Limiting::Breaker;
    return k;
}

KpiSet kpis(std::optional<double> k_pu, double i_arm_rated_ka, double i_arm_peak_ka, double i_cb_max_ka,
            double i_cb_peak_ka, double i_cb_rated_ka) {
    KpiSet k = kpis_breaker_only(i_cb_max_ka, i_cb_peak_ka, i_cb_rated_ka);
    if (!k_pu) return k;
    const double con = (*k_pu * i_arm_rated_ka - i_arm_peak_ka) / (i_arm_rated_ka * (*k_pu - 1.0));
    k.converter = con;
    if (con <= k.breaker) {
        k.overall = con;
        k.limiting = Limiting::Converter;
    }
    return k;
}

std::optional<CriticalConverter> critical_converter(const GridModel& model, const std::string& zone,
                                                    const std::string& near_bus) {
    std::optional<CriticalConverter> best;
    for (const auto& id : model.zone(zone).converters) {
        const auto& conv = model.converter(id);
        if (conv.params.frt != FrtRequirement::ContinuousOperation) continue;
        auto path = zone_cable_path(model, zone, near_bus, conv.bus);
        if (!path) continue;
        double l = conv.params.equivalent_inductance_mh();
        for (const auto& c : *path) l += model.cable(c).params.total_inductance_mh();
        if (!best || l < best->l_eq_mh) best = CriticalConverter{id, l, *path};
    }
    return best;
}

namespace {

// Zones still reachable from `start` when `removed` is taken out.
std::set<std::string> zones_reachable(const GridModel& model, const std::string& start, const std::string& removed) {
    std::set<std::string> seen{start};
    std::queue<std::string> q;
    q.push(start);
    while (!q.empty()) {
        const auto z = q.front();
        q.pop();
        for (const auto& b : model.breakers) {
            if (b.id == removed) continue;
            const auto za = model.zone_of_bus(b.from);
            const auto zb = model.zone_of_bus(b.to);
            if (!za || !zb) continue;
            std::string other;
            if (*za == z) other = *zb;
            else if (*zb == z) other = *za;
            else continue;
            if (seen.insert(other).second) q.push(other);
        }
    }
    return seen;
}

}  // namespace

std::map<std::string, double> critical_power_flow(const GridModel& model, const std::string& breaker,
                                                  const std::string& zone,
                                                  const std::optional<CriticalConverter>& critical) {
    for (const auto& o : model.critical_flows)
        if (o.breaker == breaker && o.zone == zone) return o.setpoints_pu;

    const auto near_side = zones_reachable(model, zone, breaker);
    std::map<std::string, double> sp;
    for (const auto& conv : model.converters) {
        const auto& p = conv.params;
        double v = 0.0;
        if (critical && conv.id == critical->id) {
            v = 1.0;
        } else if (p.control == ControlMode::ConstantPQ) {
            const auto z = model.zone_of_converter(conv.id);
            v = (z && near_side.count(*z)) ? 1.0 : -1.0;
        }
        sp[conv.id] = std::clamp(v, p.p_min_pu, p.p_max_pu);
    }
    return sp;
}

FaultCase critical_fault_case(const GridModel& model, const std::string& breaker, const std::string& zone,
                              const std::optional<CriticalConverter>& critical,
                              const std::map<std::string, double>& setpoints) {
    const auto& br = model.breaker(breaker);
    FaultCase fc;
    fc.study_breaker = breaker;
    if (model.zone_of_bus(br.from) == zone) {
        fc.near_bus = br.from;
        fc.far_bus = br.to;
    } else if (model.zone_of_bus(br.to) == zone) {
        fc.near_bus = br.to;
        fc.far_bus = br.from;
    } else {
        throw AnalyticsError("breaker " + breaker + " does not border zone " + zone);
    }
    const auto fz = model.zone_of_bus(fc.far_bus);
    if (!fz) throw AnalyticsError("bus " + fc.far_bus + " is not assigned to a zone");
    fc.faulted_zone = *fz;
    fc.fault = FaultLocation{fc.far_bus, "", 0.0};
    fc.setpoints_pu = setpoints;

    if (critical) {
        fc.critical_converter = critical->id;
        if (!critical->path.empty()) fc.connection_cable = critical->path.front();
    }
    for (const auto& cid : model.zone(zone).cables) {
        const auto& c = model.cable(cid);
        if (c.from != fc.near_bus && c.to != fc.near_bus) continue;
        if (fc.connection_cable && *fc.connection_cable == cid) continue;
        fc.infeed_cables.push_back(cid);
    }
    for (const auto& b : model.breakers)
        if (b.id != breaker && (b.from == fc.near_bus || b.to == fc.near_bus)) fc.infeed_breakers.push_back(b.id);
    for (const auto& id : model.zone(zone).converters)
        if (model.converter(id).params.frt == FrtRequirement::ContinuousOperation)
            fc.converters_of_interest.push_back(id);
    return fc;
}

std::optional<std::string> faulted_cable(const GridModel& model, const FaultCase& fc) {
    if (!fc.fault.cable.empty()) return fc.fault.cable;
    std::vector<std::string> ids;
    for (const auto& cid : model.zone(fc.faulted_zone).cables) {
        const auto& c = model.cable(cid);
        if (c.from == fc.far_bus || c.to == fc.far_bus) ids.push_back(cid);
    }
    if (ids.empty()) return std::nullopt;
    return *std::min_element(ids.begin(), ids.end());
}

double VoltageEnvelope::mean_u_c(const EnvelopePoint& p, double t_n_ms) const {
    const std::size_t ia = p.arrival_index;
    const auto n = static_cast<std::size_t>(std::lround(t_n_ms / dt_ms));
    const std::size_t ib = std::min(ia + n, p.u_c_kv.size() - 1);
    if (ib <= ia) return p.u_c_kv[ia];
    double area = 0.0;
    for (std::size_t k = ia; k < ib; ++k) area += 0.5 * (p.u_c_kv[k] + p.u_c_kv[k + 1]);
    return area / static_cast<double>(ib - ia);
}

double VoltageEnvelope::u_m_at(double t_n_ms) const {
    double u = 0.0;
    for (const auto& p : points) u = std::min(u, mean_u_c(p, t_n_ms));
    return u;
}

double VoltageEnvelope::peak_current(const EnvelopePoint& p, double t_n_ms) const {
    const auto n = static_cast<std::size_t>(std::lround(t_n_ms / dt_ms));
    const std::size_t ib = std::min(p.arrival_index + n, p.i_cb_ka.size() - 1);
    double m = 0.0;
    for (std::size_t k = 0; k <= ib; ++k) m = std::max(m, std::abs(p.i_cb_ka[k]));
    return m;
}

std::size_t VoltageEnvelope::argmax_current(double t_n_ms) const {
    std::size_t best = 0;
    double peak = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double m = peak_current(points[i], t_n_ms);
        if (m > peak + 1e-9) {
            peak = m;
            best = i;
        }
    }
    return best;
}

std::size_t VoltageEnvelope::critical_index(double t_n_ms, double tol_kv) const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < points.size(); ++i)
        if (mean_u_c(points[i], t_n_ms) < mean_u_c(points[best], t_n_ms)) best = i;
    // a non-negative envelope keeps the terminal fault
    if (mean_u_c(points[best], t_n_ms) >= -tol_kv) return 0;
    return best;
}

VoltageEnvelope voltage_envelope(Simulator& sim, const GridModel& model, const DesignScenario& scen,
                                 const FaultCase& base, const std::vector<double>& positions_pct, bool refine) {
    VoltageEnvelope env;
    env.dt_ms = scen.dt_us * 1e-3;
    const auto cable = faulted_cable(model, base);
    const double length = cable ? model.cable(*cable).params.length_km : 0.0;
    if (cable) env.cable = *cable;
    const double tau = cable ? model.cable(*cable).params.travel_time_ms() : 0.0;
    const double u_dc = model.nominal_voltage_kv();

    auto run_at = [&](double pct) {
        FaultCase fc = base;
        fc.trip = false;
        fc.fault = FaultLocation{base.far_bus, pct > 0.0 && cable ? *cable : "", pct / 100.0 * length};
        fc.horizon_ms = std::max(emt::automatic_horizon_ms(model, scen), scen.neutralization_time_ms() + 2.0 * tau + 3.0);
        auto r = sim.run(model, scen, fc);
        ++env.emt_runs;
        EnvelopePoint p;
        p.position_pct = pct;
        p.position_km = pct / 100.0 * length;
        p.t_arrival_ms = r.measured.t_arrival_ms;
        p.u_c_avg_kv = r.measured.u_c_avg_kv;
        p.i_cb_peak_ka = r.measured.i_cb_peak_ka;
        p.arrival_index = static_cast<std::size_t>(std::lround(p.t_arrival_ms / env.dt_ms));
        for (double v : r.trace("U_C")) p.u_c_kv.push_back(v * 1e-3);
        for (double v : r.trace("I_cb")) p.i_cb_ka.push_back(v * 1e-3);
        return p;
    };

    if (!cable) {
        env.points.push_back(run_at(0.0));
    } else {
        for (double pct : positions_pct) env.points.push_back(run_at(pct));
        if (refine && env.points.size() > 1) {
            std::size_t i = 0;
            for (std::size_t j = 1; j < env.points.size(); ++j)
                if (env.points[j].u_c_avg_kv < env.points[i].u_c_avg_kv) i = j;
            std::size_t nb;
            if (i == 0) nb = 1;
            else if (i + 1 == env.points.size()) nb = i - 1;
            else nb = env.points[i - 1].u_c_avg_kv < env.points[i + 1].u_c_avg_kv ? i - 1 : i + 1;
            env.points.push_back(run_at(0.5 * (env.points[i].position_pct + env.points[nb].position_pct)));
            std::sort(env.points.begin(), env.points.end(),
                      [](const EnvelopePoint& a, const EnvelopePoint& b) { return a.position_pct < b.position_pct; });
        }
    }

    env.u_m_kv = env.u_m_at(scen.neutralization_time_ms());
    std::size_t usable = SIZE_MAX;
    for (const auto& p : env.points) usable = std::min(usable, p.u_c_kv.size() - 1 - p.arrival_index);
    const double tol = 1e-3 * u_dc;
    for (int k = 1; k * 0.1 <= static_cast<double>(usable) * env.dt_ms + 1e-9; ++k) {
        if (env.u_m_at(k * 0.1) >= -tol) {
            env.t_c_ms = k * 0.1;
            break;
        }
    }
    return env;
}

}  // namespace hvdc

#include "hvdc/sizing.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace hvdc {

GridModel apply_inductances(const GridModel& model, const std::map<std::string, double>& l_mh) {
    GridModel m = model;
    for (auto& b : m.breakers) {
        auto it = l_mh.find(b.id);
        if (it != l_mh.end()) b.l_dc_mh = it->second;
    }
    return m;
}

bool refinement_needed(const std::map<std::string, double>& sized_with, const std::map<std::string, double>& now,
                       const std::string& self, double epsilon) {
    for (const auto& [id, l] : now) {
        if (id == self) continue;
        auto it = sized_with.find(id);
        if (it == sized_with.end()) return true;
        const double ref = it->second;
        const double change = ref > 0.0 ? std::abs(l - ref) / ref : (l != ref ? 1.0 : 0.0);
        if (change >= epsilon) return true;
    }
    return false;
}

namespace {

struct Runner {
    Simulator& sim;
    const GridModel& model;
    const DesignScenario& scen;
    CoreResult& res;
    std::map<double, Measurements> seen;

    Measurements run(double l_mh) {
        if (auto it = seen.find(l_mh); it != seen.end()) return it->second;
        FaultCase fc = res.fault_case;
        fc.inductances_mh[res.breaker] = l_mh;
        ++res.trace.emt_runs;
        return seen[l_mh] = sim.run(model, scen, fc).measured;
    }
};

[[noreturn]] void fail(const std::string& what, const CoreResult& res) {
    throw SizingError(res.breaker + " for zone " + res.zone + ": " + what, res.trace);
}

KpiSet evaluate(const CoreResult& res, const GridModel& model, const DesignScenario& scen, const Measurements& m) {
    const auto& br = model.breaker(res.breaker);
    if (!res.critical) return kpis_breaker_only(scen.i_cb_max_ka, m.i_cb_peak_ka, br.params.i_rated_ka);
    const auto& cv = model.converter(res.critical->id).params;
    return kpis(scen.k_pu, cv.i_arm_rated_ka, m.i_arm_peak_ka, scen.i_cb_max_ka, m.i_cb_peak_ka, br.params.i_rated_ka);
}

void part_a(Simulator& sim, const GridModel& model, const DesignScenario& scen, CoreResult& res) {
    const auto& br = model.breaker(res.breaker);
    const double u_dc = model.nominal_voltage_kv();
    const double t_n = scen.neutralization_time_ms();

    res.critical = critical_converter(model, res.zone, res.near_bus);
    res.setpoints_pu = critical_power_flow(model, res.breaker, res.zone, res.critical);
    res.fault_case = critical_fault_case(model, res.breaker, res.zone, res.critical, res.setpoints_pu);

    const double l_start = inductor_for_breaker(u_dc, 0.0, scen.i_cb_max_ka, br.params.i_rated_ka, t_n);
    FaultCase probe = res.fault_case;
    probe.inductances_mh[res.breaker] = l_start;
    const auto env = voltage_envelope(sim, model, scen, probe);
    res.trace.envelope_runs += env.emt_runs;
    res.u_m_kv = env.u_m_kv;
    res.t_c_ms = env.t_c_ms;

    // below the critical time the worst location is inside the cable
    const double tol = 1e-3 * u_dc;
    if (!env.cable.empty()) {
        const auto& worst = env.points[env.critical_index(t_n, tol)];
        if (worst.position_pct > 0.0) res.fault_case.fault = FaultLocation{res.far_bus, env.cable, worst.position_km};
    }
    res.l_cb_mh = inductor_for_breaker(u_dc, res.u_m_kv, scen.i_cb_max_ka, br.params.i_rated_ka, t_n);

    IterationRecord rec;
    rec.part = 'A';
    rec.l_mh = res.l_cb_mh;
    rec.note = "breaker requirement, U_m = " + std::to_string(res.u_m_kv) + " kV";
    res.trace.records.push_back(rec);
}

// Returns the working value at the end of Part B.
double part_b(Runner& r, const GridModel& model, const DesignScenario& scen, CoreResult& res) {
    const double u_dc = model.nominal_voltage_kv();
    const double t_n = scen.neutralization_time_ms();
    const auto& cv = model.converter(res.critical->id).params;
    const double d_con = converter_limit(cv, scen.k_pu).margin_ka();
    const double l_eq = res.critical->l_eq_mh;

    auto requirement = [&](double d_in, double d_cab) {
        try {
            return inductor_for_converter(u_dc, res.u_m_kv, t_n, l_eq, d_con, d_in, d_cab);
        } catch (const AnalyticsError& e) {
            fail(e.what(), res);
        }
    };

    const auto l0 = requirement(0.0, 0.0);
    IterationRecord rec;
    rec.part = 'B';
    rec.l_mh = l0.l_mh;
    rec.note = "analytical start";
    res.trace.records.push_back(rec);
    if (l0.l_mh < res.l_cb_mh) return res.l_cb_mh;

    double l = l0.l_mh;
    for (int i = 0; i < scen.part_b_cap; ++i) {
        const auto m = r.run(l);
        const auto req = requirement(m.delta_i_in_ka, m.delta_i_cab_ka);
        const double next = std::max(req.l_mh, res.l_cb_mh);
        IterationRecord it;
        it.part = 'B';
        it.l_mh = next;
        it.measured = m;
        if (!req.constrained) it.note = "no converter constraint";
        res.trace.records.push_back(it);
        const bool done = converged(next, l, scen.epsilon);
        l = next;
        if (done) {
            res.l_part_b_mh = l;
            return l;
        }
    }
    res.l_part_b_mh = l;
    return l;
}

void part_c(Runner& r, const GridModel& model, const DesignScenario& scen, CoreResult& res, double l) {
    std::optional<std::pair<double, KpiSet>> last_ok;
    double last_alpha = 0.0;
    for (int i = 0; i < scen.part_c_cap; ++i) {
        const auto m = r.run(l);
        const auto k = evaluate(res, model, scen, m);
        IterationRecord rec;
        rec.part = 'C';
        rec.l_mh = l;
        rec.measured = m;
        rec.kpis = k;

        if (k.overall < 0.0) {
            if (last_ok) {
                last_alpha /= 2.0;
                rec.alpha = last_alpha;
                rec.note = "overshoot, reverting";
                res.trace.records.push_back(rec);
                l = last_ok->first * (1.0 - last_alpha);
            } else {
                const double grow = std::min(std::max(0.4 * -k.overall, 0.05), scen.alpha_max);
                rec.alpha = -grow;
                rec.note = "requirement violated, increasing";
                res.trace.records.push_back(rec);
                l *= 1.0 + grow;
            }
            continue;
        }
        if (k.overall < scen.kpi_target) {
            res.trace.records.push_back(rec);
            res.l_mh = l;
            res.kpis = k;
            res.converged = true;
            return;
        }
        const double alpha = std::min(scen.alpha_gain * k.overall, scen.alpha_max);
        if (l * (1.0 - alpha) < scen.l_floor_mh) {
            rec.note = "below inductance floor, constraint inactive";
            res.trace.records.push_back(rec);
            res.l_mh = l;
            res.kpis = k;
            res.converged = true;
            res.active = false;
            return;
        }
        rec.alpha = alpha;
        res.trace.records.push_back(rec);
        last_ok = {l, k};
        last_alpha = alpha;
        l *= 1.0 - alpha;
    }
    fail("Part C iteration cap reached", res);
}

}  // namespace

CoreResult size_core(Simulator& sim, const GridModel& model, const DesignScenario& scen, const std::string& breaker,
                     const std::string& zone, const CoreOptions& opts) {
    CoreResult res;
    res.breaker = breaker;
    res.zone = zone;
    const auto& br = model.breaker(breaker);
    if (model.zone_of_bus(br.from) == zone) {
        res.near_bus = br.from;
        res.far_bus = br.to;
    } else if (model.zone_of_bus(br.to) == zone) {
        res.near_bus = br.to;
        res.far_bus = br.from;
    } else {
        throw SizingError("breaker " + breaker + " does not border zone " + zone, {});
    }
    Runner runner{sim, model, scen, res, {}};

    try {
        if (opts.warm && opts.warm_start_mh) {
            const auto& w = *opts.warm;
            res.critical = w.critical;
            res.setpoints_pu = w.setpoints_pu;
            res.fault_case = w.fault_case;
            res.u_m_kv = w.u_m_kv;
            res.t_c_ms = w.t_c_ms;
            res.l_cb_mh = w.l_cb_mh;
            res.l_part_b_mh = w.l_part_b_mh;
            part_c(runner, model, scen, res, *opts.warm_start_mh);
            return res;
        }
        part_a(sim, model, scen, res);
        double l = res.l_cb_mh;
        if (res.critical) l = part_b(runner, model, scen, res);
        part_c(runner, model, scen, res, l);
    } catch (const SimulationError& e) {
        fail(std::string("simulation failed: ") + e.what(), res);
    }
    return res;
}

SizingReport size_all(Simulator& sim, const GridModel& model, const DesignScenario& scen, const SizeAllOptions& opts) {
    SizingReport rep;
    rep.scenario = scen.id;
    const GridModel base = model.with_scenario(scen);
    const double u_dc = base.nominal_voltage_kv();

    std::vector<std::string> order;
    for (const auto& b : base.breakers) order.push_back(b.id);
    std::sort(order.begin(), order.end());

    std::map<std::string, double> l_now;
    for (const auto& b : base.breakers)
        l_now[b.id] = inductor_for_breaker(u_dc, 0.0, scen.i_cb_max_ka, b.params.i_rated_ka, scen.neutralization_time_ms());

    std::map<std::string, std::map<std::string, double>> sized_with;
    std::map<std::string, BreakerResult> results;

    auto finish = [&](BreakerResult& br) {
        br.l_final_mh = 0.0;
        for (const auto& d : br.directions)
            if (d.l_mh > br.l_final_mh || br.governing_zone.empty()) {
                br.l_final_mh = d.l_mh;
                br.governing_zone = d.zone;
            }
    };
    auto count = [&](const CoreResult& c) {
        rep.emt_runs += c.trace.emt_runs;
        rep.envelope_runs += c.trace.envelope_runs;
    };

    for (const auto& id : order) {
        const auto& b = base.breaker(id);
        BreakerResult br;
        br.breaker = id;
        sized_with[id] = l_now;
        const GridModel m = apply_inductances(base, l_now);
        for (const auto& bus : {b.from, b.to}) {
            const auto z = base.zone_of_bus(bus);
            if (!z) continue;
            br.directions.push_back(size_core(sim, m, scen, id, *z));
            count(br.directions.back());
        }
        finish(br);
        br.l_first_pass_mh = br.l_final_mh;
        br.first_pass = br.directions;
        l_now[id] = br.l_final_mh;
        results[id] = std::move(br);
    }

    const int passes = opts.refine_to_fixpoint ? opts.max_passes : 1;
    for (int pass = 0; pass < passes; ++pass) {
        bool changed = false;
        for (const auto& id : order) {
            if (!refinement_needed(sized_with[id], l_now, id, scen.epsilon)) continue;
            auto& br = results[id];
            sized_with[id] = l_now;
            const GridModel m = apply_inductances(base, l_now);
            std::vector<CoreResult> redone;
            for (const auto& d : br.directions) {
                CoreOptions co;
                co.warm = &d;
                co.warm_start_mh = d.l_mh;
                redone.push_back(size_core(sim, m, scen, id, d.zone, co));
                count(redone.back());
            }
            br.directions = std::move(redone);
            br.refined = true;
            const double before = br.l_final_mh;
            br.governing_zone.clear();
            finish(br);
            l_now[id] = br.l_final_mh;
            if (std::find(rep.refined.begin(), rep.refined.end(), id) == rep.refined.end()) rep.refined.push_back(id);
            if (std::abs(br.l_final_mh - before) / before >= scen.epsilon) changed = true;
        }
        ++rep.refinement_passes;
        if (!changed) break;
    }

    for (const auto& id : order) {
        rep.final_mh[id] = results[id].l_final_mh;
        rep.breakers.push_back(std::move(results[id]));
    }
    return rep;
}

std::vector<ReplayCheck> replay_critical_cases(Simulator& sim, const GridModel& model, const DesignScenario& scen,
                                               const SizingReport& report) {
    const GridModel m = apply_inductances(model.with_scenario(scen), report.final_mh);
    std::vector<ReplayCheck> out;
    for (const auto& br : report.breakers) {
        for (const auto& d : br.directions) {
            FaultCase fc = d.fault_case;
            fc.inductances_mh.clear();
            const auto res = sim.run(m, scen, fc);
            ReplayCheck chk{br.breaker, d.zone, {}, 0.0, scen.i_cb_max_ka};
            for (const auto& ev : res.blocks) {
                const auto z = m.zone_of_converter(ev.converter);
                if (!z || *z != fc.faulted_zone) chk.healthy_blocks.push_back(ev);
            }
            for (const auto& b : m.breakers) {
                if (m.zone_of_bus(b.from) != fc.faulted_zone && m.zone_of_bus(b.to) != fc.faulted_zone) continue;
                for (double i : res.trace("I_br:" + b.id)) chk.i_cb_peak_ka = std::max(chk.i_cb_peak_ka, std::abs(i) * 1e-3);
            }
            out.push_back(std::move(chk));
        }
    }
    return out;
}

}  // namespace hvdc

#include "hvdc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace hvdc {

using nlohmann::json;

std::string fmt(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

namespace {

json optional_num(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_text(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> zones_of(const GridModel& model, const Breaker& b) {
    std::set<std::string> z;
    for (const auto& bus : {b.from, b.to})
        if (auto id = model.zone_of_bus(bus)) z.insert(*id);
    return {z.begin(), z.end()};
}

}  // namespace

json to_json(const Measurements& m) {
    return {{"t_arrival_ms", m.t_arrival_ms},   {"t_clamp_ms", m.t_clamp_ms},
            {"dI_in_kA", m.delta_i_in_ka},      {"dI_cab_kA", m.delta_i_cab_ka},
            {"dI_con_kA", m.delta_i_con_ka},    {"i_arm_peak_kA", m.i_arm_peak_ka},
            {"i_cb_peak_kA", m.i_cb_peak_ka},   {"u_c_avg_kV", m.u_c_avg_kv}};
}

json to_json(const KpiSet& k) {
    return {{"converter", optional_num(k.converter)},
            {"breaker", k.breaker},
            {"overall", k.overall},
            {"limiting", to_string(k.limiting)}};
}

json to_json(const FaultCase& fc) {
    json j = {{"study_breaker", fc.study_breaker},
              {"near_bus", fc.near_bus},
              {"far_bus", fc.far_bus},
              {"faulted_zone", fc.faulted_zone},
              {"fault", {{"bus", fc.fault.bus}, {"cable", fc.fault.cable}, {"position_km", fc.fault.position_km}}},
              {"setpoints_pu", fc.setpoints_pu},
              {"inductances_mH", fc.inductances_mh},
              {"critical_converter", fc.critical_converter ? json(*fc.critical_converter) : json(nullptr)},
              {"connection_cable", fc.connection_cable ? json(*fc.connection_cable) : json(nullptr)},
              {"infeed_cables", fc.infeed_cables},
              {"infeed_breakers", fc.infeed_breakers},
              {"converters_of_interest", fc.converters_of_interest},
              {"trip", fc.trip},
              {"zero_sources", fc.zero_sources},
              {"horizon_ms", fc.horizon_ms}};
    return j;
}

FaultCase fault_case_from_json(const json& j) {
    FaultCase fc;
    fc.study_breaker = j.at("study_breaker").get<std::string>();
    fc.near_bus = j.at("near_bus").get<std::string>();
    fc.far_bus = j.at("far_bus").get<std::string>();
    fc.faulted_zone = j.at("faulted_zone").get<std::string>();
    const auto& f = j.at("fault");
    fc.fault = {f.at("bus").get<std::string>(), f.at("cable").get<std::string>(), f.at("position_km").get<double>()};
    fc.setpoints_pu = j.at("setpoints_pu").get<std::map<std::string, double>>();
    fc.inductances_mh = j.at("inductances_mH").get<std::map<std::string, double>>();
    if (!j.at("critical_converter").is_null()) fc.critical_converter = j.at("critical_converter").get<std::string>();
    if (!j.at("connection_cable").is_null()) fc.connection_cable = j.at("connection_cable").get<std::string>();
    fc.infeed_cables = j.at("infeed_cables").get<std::vector<std::string>>();
    fc.infeed_breakers = j.at("infeed_breakers").get<std::vector<std::string>>();
    fc.converters_of_interest = j.at("converters_of_interest").get<std::vector<std::string>>();
    fc.trip = j.at("trip").get<bool>();
    fc.zero_sources = j.at("zero_sources").get<bool>();
    fc.horizon_ms = j.at("horizon_ms").get<double>();
    return fc;
}

namespace {

json to_json(const IterationRecord& r) {
    json j = {{"part", std::string(1, r.part)}, {"L_mH", r.l_mh}, {"note", r.note}};
    j["measured"] = r.measured ? to_json(*r.measured) : json(nullptr);
    j["kpis"] = r.kpis ? to_json(*r.kpis) : json(nullptr);
    j["alpha"] = optional_num(r.alpha);
    return j;
}

json to_json(const SizingTrace& t) {
    json recs = json::array();
    for (const auto& r : t.records) recs.push_back(to_json(r));
    return {{"records", recs}, {"emt_runs", t.emt_runs}, {"envelope_runs", t.envelope_runs}};
}

}  // namespace

json to_json(const CoreResult& c) {
    json crit = nullptr;
    if (c.critical) crit = {{"id", c.critical->id}, {"L_eq_mH", c.critical->l_eq_mh}, {"path", c.critical->path}};
    return {{"breaker", c.breaker},
            {"zone", c.zone},
            {"near_bus", c.near_bus},
            {"far_bus", c.far_bus},
            {"L_mH", c.l_mh},
            {"L_cb_mH", c.l_cb_mh},
            {"L_part_b_mH", optional_num(c.l_part_b_mh)},
            {"critical_converter", crit},
            {"setpoints_pu", c.setpoints_pu},
            {"fault_case", to_json(c.fault_case)},
            {"U_m_kV", c.u_m_kv},
            {"t_c_ms", optional_num(c.t_c_ms)},
            {"kpis", to_json(c.kpis)},
            {"converged", c.converged},
            {"active", c.active},
            {"trace", to_json(c.trace)}};
}

json to_json(const ScenarioOutcome& o) {
    const auto& s = o.scenario;
    json j = {{"id", s.id},
              {"K_pu", s.k_pu},
              {"I_cb_max_kA", s.i_cb_max_ka},
              {"t_cb_ms", s.t_cb_ms},
              {"t_relay_ms", s.t_relay_ms},
              {"dt_us", s.dt_us}};
    if (!o.ok()) {
        j["status"] = "error";
        j["error"] = o.error;
        j["partial_trace"] = to_json(o.partial);
        return j;
    }
    const auto& r = *o.report;
    j["status"] = "ok";
    j["final_mH"] = r.final_mh;
    j["emt_runs"] = r.emt_runs;
    j["envelope_runs"] = r.envelope_runs;
    j["refinement_passes"] = r.refinement_passes;
    j["refined"] = r.refined;
    json brs = json::array();
    for (const auto& b : r.breakers) {
        json dirs = json::array();
        for (const auto& d : b.directions) dirs.push_back(to_json(d));
        json first = json::object();
        for (const auto& d : b.first_pass) first[d.zone] = d.l_mh;
        const CoreResult* gov = nullptr;
        for (const auto& d : b.directions)
            if (d.zone == b.governing_zone) gov = &d;
        brs.push_back({{"id", b.breaker},
                       {"L_final_mH", b.l_final_mh},
                       {"L_first_pass_mH", b.l_first_pass_mh},
                       {"first_pass_by_zone_mH", first},
                       {"governing_zone", b.governing_zone},
                       {"limiting", gov ? to_string(gov->kpis.limiting) : ""},
                       {"directions", dirs}});
    }
    j["breakers"] = brs;
    return j;
}

json report_document(const Config& cfg, const std::vector<ScenarioOutcome>& outcomes) {
    json sc = json::array();
    for (const auto& o : outcomes) sc.push_back(to_json(o));
    return {{"config_name", cfg.model.name}, {"config_hash", config_hash(cfg)}, {"scenarios", sc}};
}

void write_summary_csv(std::ostream& os, const GridModel& model, const std::vector<ScenarioOutcome>& outcomes) {
    std::vector<const Breaker*> brs;
    for (const auto& b : model.breakers) brs.push_back(&b);
    std::sort(brs.begin(), brs.end(), [](auto* a, auto* b) { return a->id < b->id; });

    os << "scenario,K_pu,I_cb_max_kA,t_cb_ms,t_relay_ms";
    for (const auto* b : brs) {
        for (const auto& z : zones_of(model, *b)) os << ',' << b->id << '_' << z << "_mH";
        os << ',' << b->id << "_final_mH," << b->id << "_zone," << b->id << "_limiting";
    }
    os << ",emt_runs,envelope_runs,status\n";

    for (const auto& o : outcomes) {
        const auto& s = o.scenario;
        os << csv_text(s.id) << ',' << fmt(s.k_pu) << ',' << fmt(s.i_cb_max_ka) << ',' << fmt(s.t_cb_ms) << ','
           << fmt(s.t_relay_ms);
        for (const auto* b : brs) {
            const BreakerResult* res = nullptr;
            if (o.ok())
                for (const auto& r : o.report->breakers)
                    if (r.breaker == b->id) res = &r;
            for (const auto& z : zones_of(model, *b)) {
                os << ',';
                if (!res) continue;
                for (const auto& d : res->directions)
                    if (d.zone == z) os << fmt(d.l_mh);
            }
            os << ',';
            if (!res) {
                os << ",,";
                continue;
            }
            std::string lim;
            for (const auto& d : res->directions)
                if (d.zone == res->governing_zone) lim = to_string(d.kpis.limiting);
            os << fmt(res->l_final_mh) << ',' << res->governing_zone << ',' << lim;
        }
        if (o.ok())
            os << ',' << o.report->emt_runs << ',' << o.report->envelope_runs << ",ok\n";
        else
            os << ",,," << csv_text("error: " + o.error) << '\n';
    }
}

void write_iteration_csv(std::ostream& os, const BreakerResult& br) {
    os << "zone,pass,iteration,part,L_mH,kpi,kpi_converter,kpi_breaker,limiting,alpha,dI_in_kA,dI_cab_kA,"
          "i_arm_peak_kA,i_cb_peak_kA,note\n";
    auto emit = [&](const CoreResult& d, int pass, int& n) {
        for (const auto& r : d.trace.records) {
            os << d.zone << ',' << pass << ',' << n++ << ',' << r.part << ',' << fmt(r.l_mh) << ',';
            if (r.kpis)
                os << fmt(r.kpis->overall) << ',' << (r.kpis->converter ? fmt(*r.kpis->converter) : "") << ','
                   << fmt(r.kpis->breaker) << ',' << to_string(r.kpis->limiting);
            else
                os << ",,,";
            os << ',' << (r.alpha ? fmt(*r.alpha) : "") << ',';
            if (r.measured)
                os << fmt(r.measured->delta_i_in_ka) << ',' << fmt(r.measured->delta_i_cab_ka) << ','
                   << fmt(r.measured->i_arm_peak_ka) << ',' << fmt(r.measured->i_cb_peak_ka);
            else
                os << ",,,";
            os << ',' << csv_text(r.note) << '\n';
        }
    };
    for (const auto& d : br.first_pass) {
        int n = 0;
        emit(d, 1, n);
        if (!br.refined) continue;
        for (const auto& r : br.directions)
            if (r.zone == d.zone) emit(r, 2, n);
    }
}

void write_envelope_csv(std::ostream& os, const VoltageEnvelope& env, const std::vector<double>& t_n_ms, double tol_kv) {
    os << "position_km,position_pct,t_n_ms,u_c_avg_kV,i_cb_peak_kA,critical\n";
    for (double t_n : t_n_ms) {
        const std::size_t crit = env.critical_index(t_n, tol_kv);
        for (std::size_t i = 0; i < env.points.size(); ++i) {
            const auto& p = env.points[i];
            os << fmt(p.position_km) << ',' << fmt(p.position_pct) << ',' << fmt(t_n) << ','
               << fmt(env.mean_u_c(p, t_n)) << ',' << fmt(env.peak_current(p, t_n)) << ',' << (i == crit ? 1 : 0)
               << '\n';
        }
    }
}

}  // namespace hvdc

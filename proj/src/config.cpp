#include "hvdc/config.hpp"

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace hvdc {

using nlohmann::json;

namespace {

double num(const json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

double num_or(const json& j, const char* key, double fallback) {
    return j.contains(key) ? num(j, key) : fallback;
}

std::string str(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string())
        throw ConfigError(std::string("missing or non-string field '") + key + "'");
    return j.at(key).get<std::string>();
}

std::vector<std::string> str_list(const json& j, const char* key) {
    std::vector<std::string> out;
    if (!j.contains(key)) return out;
    if (!j.at(key).is_array()) throw ConfigError(std::string("field '") + key + "' must be an array");
    for (const auto& e : j.at(key)) {
        if (!e.is_string()) throw ConfigError(std::string("field '") + key + "' must hold strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

std::map<std::string, double> setpoint_map(const json& j, const char* key) {
    std::map<std::string, double> out;
    if (!j.contains(key)) return out;
    if (!j.at(key).is_object()) throw ConfigError(std::string("field '") + key + "' must be an object");
    for (const auto& [k, v] : j.at(key).items()) {
        if (!v.is_number()) throw ConfigError("setpoint '" + k + "' must be a number");
        out[k] = v.get<double>();
    }
    return out;
}

const json& array_field(const json& doc, const char* key) {
    static const json empty = json::array();
    if (!doc.contains(key)) return empty;
    if (!doc.at(key).is_array()) throw ConfigError(std::string("section '") + key + "' must be an array");
    return doc.at(key);
}

CableParams parse_cable_params(const json& j, const CableParams& base) {
    CableParams p = base;
    p.length_km = num_or(j, "length_km", p.length_km);
    p.r_ohm_per_km = num_or(j, "R_ohm_per_km", p.r_ohm_per_km);
    p.l_mh_per_km = num_or(j, "L_mH_per_km", p.l_mh_per_km);
    p.c_uf_per_km = num_or(j, "C_uF_per_km", p.c_uf_per_km);
    p.r_hf_ohm_per_km = num_or(j, "R_hf_ohm_per_km", p.r_hf_ohm_per_km);
    p.hf_time_constant_ms = num_or(j, "hf_time_constant_ms", p.hf_time_constant_ms);
    return p;
}

ConverterParams parse_converter_params(const json& j, const ConverterParams& base) {
    ConverterParams p = base;
    p.s_mva = num_or(j, "S_MVA", p.s_mva);
    p.p_mw = num_or(j, "P_MW", p.p_mw);
    p.u_dc_kv = num_or(j, "U_dc_kV", p.u_dc_kv);
    p.u_ac_kv = num_or(j, "u_ac_kV", p.u_ac_kv);
    p.i_arm_rated_ka = num_or(j, "i_arm_rated_kA", p.i_arm_rated_ka);
    p.i_ac_max_pu = num_or(j, "i_ac_max_pu", p.i_ac_max_pu);
    p.k_pu = num_or(j, "K_pu", p.k_pu);
    p.r_arm_ohm = num_or(j, "R_arm_ohm", p.r_arm_ohm);
    p.l_arm_mh = num_or(j, "L_arm_mH", p.l_arm_mh);
    p.c_sm_uf = num_or(j, "C_sm_uF", p.c_sm_uf);
    p.n_sm = static_cast<int>(num_or(j, "N_sm", p.n_sm));
    if (j.contains("control")) {
        auto c = str(j, "control");
        if (c == "droop")
            p.control = ControlMode::DcVoltageDroop;
        else if (c == "pq")
            p.control = ControlMode::ConstantPQ;
        else
            throw ConfigError("unknown control mode '" + c + "'");
    }
    p.droop_kv_per_mw = num_or(j, "droop_kV_per_MW", p.droop_kv_per_mw);
    if (j.contains("frt")) {
        auto f = str(j, "frt");
        if (f == "continuous")
            p.frt = FrtRequirement::ContinuousOperation;
        else if (f == "may-block")
            p.frt = FrtRequirement::MayBlock;
        else
            throw ConfigError("unknown FRT requirement '" + f + "'");
    }
    p.p_min_pu = num_or(j, "p_min_pu", p.p_min_pu);
    p.p_max_pu = num_or(j, "p_max_pu", p.p_max_pu);
    return p;
}

BreakerParams parse_breaker_params(const json& j, const BreakerParams& base) {
    BreakerParams p = base;
    p.i_rated_ka = num_or(j, "I_rated_kA", p.i_rated_ka);
    p.i_max_ka = num_or(j, "I_max_kA", p.i_max_ka);
    p.t_cb_ms = num_or(j, "t_cb_ms", p.t_cb_ms);
    p.t_relay_ms = num_or(j, "t_relay_ms", p.t_relay_ms);
    p.clamp_pu = num_or(j, "clamp_pu", p.clamp_pu);
    return p;
}

json cable_params_json(const CableParams& p) {
    json j = {{"length_km", p.length_km},
              {"R_ohm_per_km", p.r_ohm_per_km},
              {"L_mH_per_km", p.l_mh_per_km},
              {"C_uF_per_km", p.c_uf_per_km}};
    if (p.r_hf_ohm_per_km > 0.0 || p.hf_time_constant_ms > 0.0) {
        j["R_hf_ohm_per_km"] = p.r_hf_ohm_per_km;
        j["hf_time_constant_ms"] = p.hf_time_constant_ms;
    }
    return j;
}

json converter_params_json(const ConverterParams& p) {
    return {{"S_MVA", p.s_mva},
            {"P_MW", p.p_mw},
            {"U_dc_kV", p.u_dc_kv},
            {"u_ac_kV", p.u_ac_kv},
            {"i_arm_rated_kA", p.i_arm_rated_ka},
            {"i_ac_max_pu", p.i_ac_max_pu},
            {"K_pu", p.k_pu},
            {"R_arm_ohm", p.r_arm_ohm},
            {"L_arm_mH", p.l_arm_mh},
            {"C_sm_uF", p.c_sm_uf},
            {"N_sm", p.n_sm},
            {"control", to_string(p.control)},
            {"droop_kV_per_MW", p.droop_kv_per_mw},
            {"frt", to_string(p.frt)},
            {"p_min_pu", p.p_min_pu},
            {"p_max_pu", p.p_max_pu}};
}

}  // namespace

Config parse_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("configuration root must be an object");
    Config cfg;
    auto& m = cfg.model;
    m.name = doc.value("name", std::string{});

    CableParams cable_defaults;
    ConverterParams conv_defaults;
    BreakerParams breaker_defaults;
    if (doc.contains("defaults")) {
        const auto& d = doc.at("defaults");
        if (d.contains("cable")) cable_defaults = parse_cable_params(d.at("cable"), cable_defaults);
        if (d.contains("converter")) conv_defaults = parse_converter_params(d.at("converter"), conv_defaults);
        if (d.contains("breaker")) breaker_defaults = parse_breaker_params(d.at("breaker"), breaker_defaults);
    }

    for (const auto& b : array_field(doc, "buses")) {
        if (b.is_string())
            m.buses.push_back({b.get<std::string>()});
        else
            m.buses.push_back({str(b, "id")});
    }
    for (const auto& c : array_field(doc, "cables")) {
        m.cables.push_back({str(c, "id"), str(c, "from"), str(c, "to"), parse_cable_params(c, cable_defaults)});
        if (!c.contains("length_km")) throw ConfigError("cable " + m.cables.back().id + ": missing 'length_km'");
    }
    for (const auto& c : array_field(doc, "converters")) {
        m.converters.push_back({str(c, "id"), str(c, "bus"), parse_converter_params(c, conv_defaults)});
    }
    for (const auto& b : array_field(doc, "breakers")) {
        m.breakers.push_back(
            {str(b, "id"), str(b, "from"), str(b, "to"), parse_breaker_params(b, breaker_defaults), num_or(b, "L_dc_mH", 0.0)});
    }
    for (const auto& z : array_field(doc, "zones")) {
        m.zones.push_back({str(z, "id"), str_list(z, "buses"), str_list(z, "cables"), str_list(z, "converters")});
    }
    for (const auto& f : array_field(doc, "critical_flows")) {
        m.critical_flows.push_back({str(f, "breaker"), str(f, "zone"), setpoint_map(f, "setpoints_pu")});
    }
    for (const auto& s : array_field(doc, "scenarios")) {
        DesignScenario d;
        d.id = str(s, "id");
        d.k_pu = num_or(s, "K_pu", d.k_pu);
        d.i_cb_max_ka = num_or(s, "I_cb_max_kA", d.i_cb_max_ka);
        d.t_cb_ms = num_or(s, "t_cb_ms", d.t_cb_ms);
        d.t_relay_ms = num_or(s, "t_relay_ms", d.t_relay_ms);
        d.setpoints_pu = setpoint_map(s, "setpoints_pu");
        d.epsilon = num_or(s, "epsilon", d.epsilon);
        d.kpi_target = num_or(s, "kpi_target", d.kpi_target);
        d.alpha_gain = num_or(s, "alpha_gain", d.alpha_gain);
        d.alpha_max = num_or(s, "alpha_max", d.alpha_max);
        d.dt_us = num_or(s, "dt_us", d.dt_us);
        d.horizon_ms = num_or(s, "horizon_ms", d.horizon_ms);
        d.part_b_cap = static_cast<int>(num_or(s, "part_b_cap", d.part_b_cap));
        d.part_c_cap = static_cast<int>(num_or(s, "part_c_cap", d.part_c_cap));
        d.l_floor_mh = num_or(s, "l_floor_mH", d.l_floor_mh);
        cfg.scenarios.push_back(std::move(d));
    }
    return cfg;
}

Config load_config_string(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("parse error: ") + e.what());
    }
    Config cfg = parse_config(doc);
    auto violations = validate(cfg.model);
    for (const auto& s : cfg.scenarios) {
        auto v = validate(s, cfg.model);
        violations.insert(violations.end(), v.begin(), v.end());
    }
    if (!violations.empty()) throw ValidationError(std::move(violations));
    return cfg;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open configuration file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return load_config_string(ss.str());
}

json to_json(const Config& cfg) {
    const auto& m = cfg.model;
    json doc;
    doc["name"] = m.name;
    doc["buses"] = json::array();
    for (const auto& b : m.buses) doc["buses"].push_back(b.id);
    doc["cables"] = json::array();
    for (const auto& c : m.cables) {
        json j = cable_params_json(c.params);
        j["id"] = c.id;
        j["from"] = c.from;
        j["to"] = c.to;
        doc["cables"].push_back(j);
    }
    doc["converters"] = json::array();
    for (const auto& c : m.converters) {
        json j = converter_params_json(c.params);
        j["id"] = c.id;
        j["bus"] = c.bus;
        doc["converters"].push_back(j);
    }
    doc["breakers"] = json::array();
    for (const auto& b : m.breakers) {
        doc["breakers"].push_back({{"id", b.id},
                                   {"from", b.from},
                                   {"to", b.to},
                                   {"I_rated_kA", b.params.i_rated_ka},
                                   {"I_max_kA", b.params.i_max_ka},
                                   {"t_cb_ms", b.params.t_cb_ms},
                                   {"t_relay_ms", b.params.t_relay_ms},
                                   {"clamp_pu", b.params.clamp_pu},
                                   {"L_dc_mH", b.l_dc_mh}});
    }
    doc["zones"] = json::array();
    for (const auto& z : m.zones) {
        doc["zones"].push_back({{"id", z.id}, {"buses", z.buses}, {"cables", z.cables}, {"converters", z.converters}});
    }
    if (!m.critical_flows.empty()) {
        doc["critical_flows"] = json::array();
        for (const auto& f : m.critical_flows)
            doc["critical_flows"].push_back({{"breaker", f.breaker}, {"zone", f.zone}, {"setpoints_pu", f.setpoints_pu}});
    }
    doc["scenarios"] = json::array();
    for (const auto& s : cfg.scenarios) {
        doc["scenarios"].push_back({{"id", s.id},
                                    {"K_pu", s.k_pu},
                                    {"I_cb_max_kA", s.i_cb_max_ka},
                                    {"t_cb_ms", s.t_cb_ms},
                                    {"t_relay_ms", s.t_relay_ms},
                                    {"setpoints_pu", s.setpoints_pu},
                                    {"epsilon", s.epsilon},
                                    {"kpi_target", s.kpi_target},
                                    {"alpha_gain", s.alpha_gain},
                                    {"alpha_max", s.alpha_max},
                                    {"dt_us", s.dt_us},
                                    {"horizon_ms", s.horizon_ms},
                                    {"part_b_cap", s.part_b_cap},
                                    {"part_c_cap", s.part_c_cap},
                                    {"l_floor_mH", s.l_floor_mh}});
    }
    return doc;
}

std::string serialize(const Config& cfg) { return to_json(cfg).dump(2); }

std::string config_hash(const Config& cfg) {
    const std::string text = to_json(cfg).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

}  // namespace hvdc

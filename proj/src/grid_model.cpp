#include "hvdc/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

namespace hvdc {

namespace {

std::string join_violations(const std::vector<std::string>& v) {
    std::ostringstream os;
    os << "invalid configuration:";
    for (const auto& s : v) os << "\n  - " << s;
    return os.str();
}

template <typename T>
std::optional<std::size_t> find_by_id(const std::vector<T>& items, const std::string& id) {
    for (std::size_t i = 0; i < items.size(); ++i)
        if (items[i].id == id) return i;
    return std::nullopt;
}

template <typename T>
const T& get_by_id(const std::vector<T>& items, const std::string& id, const char* what) {
    auto idx = find_by_id(items, id);
    if (!idx) throw ConfigError(std::string("unknown ") + what + " '" + id + "'");
    return items[*idx];
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : ConfigError(join_violations(violations)), violations_(std::move(violations)) {}

const char* to_string(ControlMode m) {
    return m == ControlMode::DcVoltageDroop ? "droop" : "pq";
}

const char* to_string(FrtRequirement f) {
    return f == FrtRequirement::ContinuousOperation ? "continuous" : "may-block";
}

double ConverterParams::ac_current_limit_peak_ka() const {
    return i_ac_max_pu * std::sqrt(2.0) * s_mva / (std::sqrt(3.0) * u_ac_kv);
}

double ConverterParams::aggregate_capacitance_uf() const {
    return n_sm > 0 ? 6.0 * c_sm_uf / n_sm : 0.0;
}

double CableParams::surge_impedance_ohm() const {
    return std::sqrt(l_mh_per_km * 1e-3 / (c_uf_per_km * 1e-6));
}

double CableParams::wave_velocity_km_per_ms() const {
    // 1/sqrt(L'C') in km/s, scaled to km/ms
    return 1.0 / std::sqrt(l_mh_per_km * 1e-3 * c_uf_per_km * 1e-6) * 1e-3;
}

double CableParams::travel_time_ms() const { return length_km / wave_velocity_km_per_ms(); }

std::optional<std::size_t> GridModel::bus_index(const std::string& id) const { return find_by_id(buses, id); }
std::optional<std::size_t> GridModel::cable_index(const std::string& id) const { return find_by_id(cables, id); }
std::optional<std::size_t> GridModel::converter_index(const std::string& id) const {
    return find_by_id(converters, id);
}
std::optional<std::size_t> GridModel::breaker_index(const std::string& id) const {
    return find_by_id(breakers, id);
}
std::optional<std::size_t> GridModel::zone_index(const std::string& id) const { return find_by_id(zones, id); }

const Cable& GridModel::cable(const std::string& id) const { return get_by_id(cables, id, "cable"); }
const Converter& GridModel::converter(const std::string& id) const {
    return get_by_id(converters, id, "converter");
}
const Breaker& GridModel::breaker(const std::string& id) const { return get_by_id(breakers, id, "breaker"); }
const Zone& GridModel::zone(const std::string& id) const { return get_by_id(zones, id, "zone"); }

std::optional<std::string> GridModel::zone_of_bus(const std::string& bus) const {
    for (const auto& z : zones)
        if (contains(z.buses, bus)) return z.id;
    return std::nullopt;
}

std::optional<std::string> GridModel::zone_of_cable(const std::string& cable) const {
    for (const auto& z : zones)
        if (contains(z.cables, cable)) return z.id;
    return std::nullopt;
}

std::optional<std::string> GridModel::zone_of_converter(const std::string& conv) const {
    for (const auto& z : zones)
        if (contains(z.converters, conv)) return z.id;
    return std::nullopt;
}

std::vector<std::vector<int>> GridModel::zone_adjacency() const {
    const std::size_t n = zones.size();
    std::vector<std::vector<int>> count(n, std::vector<int>(n, 0));
    for (const auto& b : breakers) {
        auto za = zone_of_bus(b.from);
        auto zb = zone_of_bus(b.to);
        if (!za || !zb || *za == *zb) continue;
        auto i = *zone_index(*za);
        auto j = *zone_index(*zb);
        ++count[i][j];
        ++count[j][i];
    }
    for (auto& row : count)
        for (auto& c : row) c = (c == 1) ? 1 : 0;
    return count;
}

int GridModel::adjacency(const std::string& zi, const std::string& zj) const {
    auto i = zone_index(zi);
    auto j = zone_index(zj);
    if (!i || !j) return 0;
    return zone_adjacency()[*i][*j];
}

std::vector<std::string> GridModel::boundary_breakers(const std::string& zone) const {
    std::vector<std::string> out;
    for (const auto& b : breakers) {
        if (zone_of_bus(b.from) == zone || zone_of_bus(b.to) == zone) out.push_back(b.id);
    }
    return out;
}

double GridModel::nominal_voltage_kv() const {
    return converters.empty() ? 0.0 : converters.front().params.u_dc_kv;
}

GridModel GridModel::with_scenario(const DesignScenario& scen) const {
    GridModel m = *this;
    for (auto& c : m.converters) c.params.k_pu = scen.k_pu;
    for (auto& b : m.breakers) {
        b.params.i_max_ka = scen.i_cb_max_ka;
        b.params.t_cb_ms = scen.t_cb_ms;
        b.params.t_relay_ms = scen.t_relay_ms;
    }
    return m;
}

std::vector<std::string> validate(const GridModel& model) {
    std::vector<std::string> out;
    auto bad = [&out](std::string s) { out.push_back(std::move(s)); };

    std::set<std::string> bus_ids;
    for (const auto& b : model.buses) {
        if (!bus_ids.insert(b.id).second) bad("bus " + b.id + " defined more than once");
    }
    auto known_bus = [&](const std::string& id) { return bus_ids.count(id) > 0; };

    for (const auto& c : model.cables) {
        const auto& p = c.params;
        if (!known_bus(c.from) || !known_bus(c.to)) bad("cable " + c.id + ": unknown endpoint bus");
        if (c.from == c.to) bad("cable " + c.id + ": endpoints must differ");
        if (p.length_km < 0.0) bad("cable " + c.id + ": length must be non-negative");
        if (!(p.r_ohm_per_km > 0.0 && p.l_mh_per_km > 0.0 && p.c_uf_per_km > 0.0))
            bad("cable " + c.id + ": per-km parameters must be positive");
        if (p.r_hf_ohm_per_km < 0.0 || p.hf_time_constant_ms < 0.0)
            bad("cable " + c.id + ": high-frequency loss parameters must be non-negative");
        if ((p.r_hf_ohm_per_km > 0.0) != (p.hf_time_constant_ms > 0.0))
            bad("cable " + c.id + ": high-frequency loss needs both resistance and time constant");
    }

    for (const auto& cv : model.converters) {
        const auto& p = cv.params;
        const std::string tag = "converter " + cv.id;
        if (!known_bus(cv.bus)) bad(tag + ": unknown bus " + cv.bus);
        if (!(p.k_pu > 1.0)) bad(tag + ": K must exceed 1");
        if (!(p.i_ac_max_pu >= 1.0)) bad(tag + ": i_ac_max must be at least 1 pu");
        if (!(p.s_mva > 0.0 && p.p_mw > 0.0)) bad(tag + ": powers must be positive");
        if (!(p.u_dc_kv > 0.0 && p.u_ac_kv > 0.0)) bad(tag + ": voltages must be positive");
        if (!(p.r_arm_ohm > 0.0 && p.l_arm_mh > 0.0)) bad(tag + ": arm impedance must be positive");
        if (!(p.i_arm_rated_ka > 0.0)) bad(tag + ": rated arm current must be positive");
        if (!(p.c_sm_uf > 0.0 && p.n_sm > 0)) bad(tag + ": submodule data must be positive");
        if (p.control == ControlMode::DcVoltageDroop && !(p.droop_kv_per_mw > 0.0))
            bad(tag + ": droop gain must be positive");
        if (!(p.p_min_pu <= p.p_max_pu) || p.p_min_pu < -1.0 || p.p_max_pu > 1.0)
            bad(tag + ": setpoint range must lie within [-1, 1]");
    }

    for (const auto& b : model.breakers) {
        const auto& p = b.params;
        const std::string tag = "breaker " + b.id;
        if (!known_bus(b.from) || !known_bus(b.to)) bad(tag + ": unknown endpoint bus");
        if (!(p.i_rated_ka > 0.0)) bad(tag + ": I_cb_r must be positive");
        if (!(p.i_max_ka > p.i_rated_ka)) bad(tag + ": I_cb_max must exceed I_cb_r");
        if (!(p.t_cb_ms > 0.0)) bad(tag + ": t_cb must be positive");
        if (!(p.t_relay_ms >= 0.0)) bad(tag + ": t_relay must be non-negative");
        if (!(p.clamp_pu > 1.0)) bad(tag + ": clamp factor must exceed 1");
        if (b.l_dc_mh < 0.0) bad(tag + ": inductance must be non-negative");
    }

    // zone partition
    std::map<std::string, int> bus_hits, cable_hits, conv_hits;
    for (const auto& z : model.zones) {
        for (const auto& b : z.buses) {
            if (!known_bus(b)) bad("zone " + z.id + ": unknown bus " + b);
            ++bus_hits[b];
        }
        for (const auto& c : z.cables) {
            if (!model.cable_index(c)) bad("zone " + z.id + ": unknown cable " + c);
            ++cable_hits[c];
        }
        for (const auto& c : z.converters) {
            if (!model.converter_index(c)) bad("zone " + z.id + ": unknown converter " + c);
            ++conv_hits[c];
        }
    }
    for (const auto& b : model.buses) {
        if (bus_hits[b.id] == 0) bad("bus " + b.id + " unassigned to any zone");
        if (bus_hits[b.id] > 1) bad("bus " + b.id + " assigned to more than one zone");
    }
    for (const auto& c : model.cables) {
        if (cable_hits[c.id] == 0) bad("cable " + c.id + " unassigned to any zone");
        if (cable_hits[c.id] > 1) bad("cable " + c.id + " assigned to more than one zone");
        auto zc = model.zone_of_cable(c.id);
        if (zc && (model.zone_of_bus(c.from) != zc || model.zone_of_bus(c.to) != zc))
            bad("cable " + c.id + ": endpoints must lie in the cable's zone");
    }
    for (const auto& c : model.converters) {
        if (conv_hits[c.id] == 0) bad("converter " + c.id + " unassigned to any zone");
        if (conv_hits[c.id] > 1) bad("converter " + c.id + " assigned to more than one zone");
        auto zc = model.zone_of_converter(c.id);
        if (zc && model.zone_of_bus(c.bus) != zc)
            bad("converter " + c.id + ": bus must lie in the converter's zone");
    }

    // breakers on zone boundaries, at most one breaker per zone pair
    std::map<std::pair<std::string, std::string>, int> pair_count;
    for (const auto& b : model.breakers) {
        auto za = model.zone_of_bus(b.from);
        auto zb = model.zone_of_bus(b.to);
        if (!za || !zb || *za == *zb) {
            bad("breaker " + b.id + " not on zone boundary");
            continue;
        }
        auto key = std::minmax(*za, *zb);
        ++pair_count[{key.first, key.second}];
    }
    for (const auto& [key, n] : pair_count) {
        if (n > 1) bad("zones " + key.first + " and " + key.second + " joined by more than one breaker");
    }

    // connectivity over cables and breakers
    if (!model.buses.empty() && out.empty()) {
        std::map<std::string, std::vector<std::string>> adj;
        for (const auto& c : model.cables) {
            adj[c.from].push_back(c.to);
            adj[c.to].push_back(c.from);
        }
        for (const auto& b : model.breakers) {
            adj[b.from].push_back(b.to);
            adj[b.to].push_back(b.from);
        }
        std::set<std::string> seen{model.buses.front().id};
        std::queue<std::string> q;
        q.push(model.buses.front().id);
        while (!q.empty()) {
            auto cur = q.front();
            q.pop();
            for (const auto& nb : adj[cur])
                if (seen.insert(nb).second) q.push(nb);
        }
        for (const auto& b : model.buses)
            if (!seen.count(b.id)) bad("grid is not connected: bus " + b.id + " unreachable");
    }

    for (const auto& f : model.critical_flows) {
        if (!model.breaker_index(f.breaker)) bad("critical flow: unknown breaker " + f.breaker);
        if (!model.zone_index(f.zone)) bad("critical flow: unknown zone " + f.zone);
        for (const auto& [conv, sp] : f.setpoints_pu) {
            if (!model.converter_index(conv)) bad("critical flow: unknown converter " + conv);
            if (sp < -1.0 || sp > 1.0) bad("critical flow: setpoint of " + conv + " outside [-1, 1]");
        }
    }
    return out;
}

std::vector<std::string> validate(const DesignScenario& scen, const GridModel& model) {
    std::vector<std::string> out;
    const std::string tag = "scenario " + scen.id;
    if (!(scen.k_pu > 1.0)) out.push_back(tag + ": K must exceed 1");
    if (!(scen.i_cb_max_ka > 0.0)) out.push_back(tag + ": I_cb_max must be positive");
    for (const auto& b : model.breakers) {
        if (!(scen.i_cb_max_ka > b.params.i_rated_ka))
            out.push_back(tag + ": I_cb_max must exceed I_cb_r of breaker " + b.id);
    }
    if (!(scen.t_cb_ms > 0.0)) out.push_back(tag + ": t_cb must be positive");
    if (!(scen.t_relay_ms >= 0.0)) out.push_back(tag + ": t_relay must be non-negative");
    if (!(scen.epsilon > 0.0 && scen.epsilon < 1.0)) out.push_back(tag + ": epsilon must lie in (0, 1)");
    if (!(scen.kpi_target > 0.0 && scen.kpi_target <= 1.0))
        out.push_back(tag + ": KPI target must lie in (0, 1]");
    if (!(scen.alpha_gain > 0.0) || !(scen.alpha_max > 0.0 && scen.alpha_max < 1.0))
        out.push_back(tag + ": reduction rate parameters must be positive and below 1");
    if (!(scen.dt_us > 0.0)) out.push_back(tag + ": time step must be positive");
    if (scen.horizon_ms < 0.0) out.push_back(tag + ": horizon must be non-negative");
    if (!(scen.l_floor_mh >= 0.0)) out.push_back(tag + ": inductance floor must be non-negative");
    if (scen.part_b_cap < 1 || scen.part_c_cap < 1) out.push_back(tag + ": iteration caps must be positive");
    for (const auto& [conv, sp] : scen.setpoints_pu) {
        if (!model.converter_index(conv)) out.push_back(tag + ": unknown converter " + conv);
        if (sp < -1.0 || sp > 1.0) out.push_back(tag + ": setpoint of " + conv + " outside [-1, 1]");
    }
    return out;
}

std::optional<std::vector<std::string>> zone_cable_path(const GridModel& model, const std::string& zone,
                                                        const std::string& from_bus,
                                                        const std::string& to_bus) {
    if (from_bus == to_bus) return std::vector<std::string>{};
    const auto& z = model.zone(zone);
    // Dijkstra over the zone's cables
    std::map<std::string, double> dist;
    std::map<std::string, std::pair<std::string, std::string>> prev;  // bus -> (prev bus, cable)
    using Item = std::pair<double, std::string>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[from_bus] = 0.0;
    pq.push({0.0, from_bus});
    while (!pq.empty()) {
        auto [d, bus] = pq.top();
        pq.pop();
        if (d > dist[bus]) continue;
        if (bus == to_bus) break;
        for (const auto& cid : z.cables) {
            const auto& c = model.cable(cid);
            std::string other;
            if (c.from == bus)
                other = c.to;
            else if (c.to == bus)
                other = c.from;
            else
                continue;
            double nd = d + c.params.length_km;
            auto it = dist.find(other);
            if (it == dist.end() || nd < it->second) {
                dist[other] = nd;
                prev[other] = {bus, cid};
                pq.push({nd, other});
            }
        }
    }
    if (!dist.count(to_bus)) return std::nullopt;
    std::vector<std::string> path;
    for (std::string cur = to_bus; cur != from_bus; cur = prev[cur].first) path.push_back(prev[cur].second);
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace hvdc

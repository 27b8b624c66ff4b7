#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "hvdc/config.hpp"
#include "support.hpp"

using namespace hvdc;
using nlohmann::json;

namespace {

json raw(const std::string& name) {
    std::ifstream in(test::config_path(name));
    return json::parse(in);
}

void expect_same(const GridModel& a, const GridModel& b) {
    CHECK(a.name == b.name);
    REQUIRE(a.buses.size() == b.buses.size());
    for (std::size_t i = 0; i < a.buses.size(); ++i) CHECK(a.buses[i].id == b.buses[i].id);
    REQUIRE(a.cables.size() == b.cables.size());
    for (std::size_t i = 0; i < a.cables.size(); ++i) {
        const auto &x = a.cables[i], &y = b.cables[i];
        CHECK(x.id == y.id);
        CHECK(x.from == y.from);
        CHECK(x.to == y.to);
        CHECK(x.params.length_km == y.params.length_km);
        CHECK(x.params.r_ohm_per_km == y.params.r_ohm_per_km);
        CHECK(x.params.l_mh_per_km == y.params.l_mh_per_km);
        CHECK(x.params.c_uf_per_km == y.params.c_uf_per_km);
        CHECK(x.params.r_hf_ohm_per_km == y.params.r_hf_ohm_per_km);
        CHECK(x.params.hf_time_constant_ms == y.params.hf_time_constant_ms);
    }
    REQUIRE(a.converters.size() == b.converters.size());
    for (std::size_t i = 0; i < a.converters.size(); ++i) {
        const auto &x = a.converters[i], &y = b.converters[i];
        CHECK(x.id == y.id);
        CHECK(x.bus == y.bus);
        CHECK(x.params.s_mva == y.params.s_mva);
        CHECK(x.params.p_mw == y.params.p_mw);
        CHECK(x.params.u_dc_kv == y.params.u_dc_kv);
        CHECK(x.params.u_ac_kv == y.params.u_ac_kv);
        CHECK(x.params.i_arm_rated_ka == y.params.i_arm_rated_ka);
        CHECK(x.params.i_ac_max_pu == y.params.i_ac_max_pu);
        CHECK(x.params.k_pu == y.params.k_pu);
        CHECK(x.params.l_arm_mh == y.params.l_arm_mh);
        CHECK(x.params.r_arm_ohm == y.params.r_arm_ohm);
        CHECK(x.params.c_sm_uf == y.params.c_sm_uf);
        CHECK(x.params.n_sm == y.params.n_sm);
        CHECK(x.params.control == y.params.control);
        CHECK(x.params.droop_kv_per_mw == y.params.droop_kv_per_mw);
        CHECK(x.params.frt == y.params.frt);
        CHECK(x.params.p_min_pu == y.params.p_min_pu);
        CHECK(x.params.p_max_pu == y.params.p_max_pu);
    }
    REQUIRE(a.breakers.size() == b.breakers.size());
    for (std::size_t i = 0; i < a.breakers.size(); ++i) {
        const auto &x = a.breakers[i], &y = b.breakers[i];
        CHECK(x.id == y.id);
        CHECK(x.from == y.from);
        CHECK(x.to == y.to);
        CHECK(x.l_dc_mh == y.l_dc_mh);
        CHECK(x.params.i_rated_ka == y.params.i_rated_ka);
        CHECK(x.params.i_max_ka == y.params.i_max_ka);
        CHECK(x.params.t_cb_ms == y.params.t_cb_ms);
        CHECK(x.params.t_relay_ms == y.params.t_relay_ms);
        CHECK(x.params.clamp_pu == y.params.clamp_pu);
    }
    REQUIRE(a.zones.size() == b.zones.size());
    for (std::size_t i = 0; i < a.zones.size(); ++i) {
        CHECK(a.zones[i].id == b.zones[i].id);
        CHECK(a.zones[i].buses == b.zones[i].buses);
        CHECK(a.zones[i].cables == b.zones[i].cables);
        CHECK(a.zones[i].converters == b.zones[i].converters);
    }
    REQUIRE(a.critical_flows.size() == b.critical_flows.size());
    for (std::size_t i = 0; i < a.critical_flows.size(); ++i) {
        CHECK(a.critical_flows[i].breaker == b.critical_flows[i].breaker);
        CHECK(a.critical_flows[i].zone == b.critical_flows[i].zone);
        CHECK(a.critical_flows[i].setpoints_pu == b.critical_flows[i].setpoints_pu);
    }
}

template <class F>
std::vector<std::string> violations_after(F&& mutate) {
    json doc = raw("case1.json");
    mutate(doc);
    try {
        load_config_string(doc.dump());
    } catch (const ValidationError& e) {
        return e.violations();
    }
    return {};
}

}  // namespace

TEST_CASE("bundled configurations load with the expected structure") {
    const auto& m1 = test::case1().model;
    CHECK(m1.buses.size() == 7);
    CHECK(m1.breakers.size() == 2);
    CHECK(m1.zones.size() == 3);
    CHECK(m1.converters.size() == 5);
    CHECK(test::case1().scenarios.size() == 12);

    const auto& m2 = test::case2().model;
    CHECK(m2.breakers.size() == 10);
    CHECK(m2.zones.size() == 9);
    CHECK(m2.converters.size() == 4);
}

TEST_CASE("serialize then load reproduces the model field by field") {
    for (const auto* cfg : {&test::case1(), &test::case2()}) {
        const Config again = load_config_string(serialize(*cfg));
        expect_same(cfg->model, again.model);
        REQUIRE(again.scenarios.size() == cfg->scenarios.size());
        for (std::size_t i = 0; i < again.scenarios.size(); ++i) {
            const auto &x = cfg->scenarios[i], &y = again.scenarios[i];
            CHECK(x.id == y.id);
            CHECK(x.k_pu == y.k_pu);
            CHECK(x.i_cb_max_ka == y.i_cb_max_ka);
            CHECK(x.t_cb_ms == y.t_cb_ms);
            CHECK(x.t_relay_ms == y.t_relay_ms);
            CHECK(x.setpoints_pu == y.setpoints_pu);
            CHECK(x.epsilon == y.epsilon);
            CHECK(x.kpi_target == y.kpi_target);
            CHECK(x.dt_us == y.dt_us);
            CHECK(x.part_b_cap == y.part_b_cap);
            CHECK(x.part_c_cap == y.part_c_cap);
            CHECK(x.l_floor_mh == y.l_floor_mh);
        }
        CHECK(serialize(again) == serialize(*cfg));
    }
}

TEST_CASE("every bus, cable and converter sits in exactly one zone") {
    for (const auto* cfg : {&test::case1(), &test::case2()}) {
        const auto& m = cfg->model;
        std::map<std::string, int> seen;
        for (const auto& z : m.zones) {
            for (const auto& b : z.buses) ++seen["bus:" + b];
            for (const auto& c : z.cables) ++seen["cable:" + c];
            for (const auto& c : z.converters) ++seen["conv:" + c];
        }
        for (const auto& b : m.buses) CHECK(seen["bus:" + b.id] == 1);
        for (const auto& c : m.cables) CHECK(seen["cable:" + c.id] == 1);
        for (const auto& c : m.converters) CHECK(seen["conv:" + c.id] == 1);
    }
}

TEST_CASE("converter derived values") {
    for (const auto& c : test::case1().model.converters) {
        CHECK(c.params.rated_dc_current_ka() == c.params.p_mw / c.params.u_dc_kv);
        CHECK(c.params.equivalent_inductance_mh() == 2.0 / 3.0 * c.params.l_arm_mh);
    }
    // rated converter data
    const auto& p = test::case1().model.converter("C1").params;
    CHECK(p.s_mva == 1034);
    CHECK(p.p_mw == 1000);
    CHECK(p.u_dc_kv == 525);
    CHECK(p.u_ac_kv == 273);
    CHECK(p.i_arm_rated_ka == 2.2);
    CHECK(p.i_ac_max_pu == 1.2);
    CHECK(p.l_arm_mh == 15);
    CHECK(p.r_arm_ohm == 0.4);
    CHECK(p.c_sm_uf == 6000);
    CHECK(p.n_sm == 276);
    CHECK(p.rated_dc_current_ka() == doctest::Approx(1.9048).epsilon(1e-4));
    CHECK(p.equivalent_inductance_mh() == doctest::Approx(10.0));
    CHECK(test::case1().model.breaker("CB12").params.i_rated_ka == 3);
}

TEST_CASE("zone adjacency follows the breakers") {
    const auto& m = test::case1().model;
    CHECK(m.adjacency("Z1", "Z2") == 1);
    CHECK(m.adjacency("Z2", "Z3") == 1);
    CHECK(m.adjacency("Z1", "Z3") == 0);
    CHECK(m.boundary_breakers("Z2") == std::vector<std::string>{"CB12", "CB23"});
}

TEST_CASE("validation reports broken models") {
    CHECK(violations_after([](json&) {}).empty());

    auto twice = violations_after([](json& d) { d["zones"][1]["buses"].push_back("B1"); });
    CHECK_FALSE(twice.empty());

    auto dangling = violations_after([](json& d) { d["cables"][0]["to"] = "nowhere"; });
    CHECK_FALSE(dangling.empty());

    auto negative = violations_after([](json& d) { d["cables"][0]["length_km"] = -5; });
    CHECK_FALSE(negative.empty());

    auto orphan = violations_after([](json& d) { d["zones"][0]["converters"] = json::array({"C1"}); });
    CHECK_FALSE(orphan.empty());

    // same input, same list
    auto again = violations_after([](json& d) { d["zones"][1]["buses"].push_back("B1"); });
    CHECK(again == twice);
}

TEST_CASE("malformed input is a config error") {
    CHECK_THROWS_AS(load_config_string("{not json"), ConfigError);
    json doc = raw("case1.json");
    doc.erase("buses");
    CHECK_THROWS_AS(load_config_string(doc.dump()), ConfigError);
    CHECK_THROWS_AS(load_config(test::config_path("missing.json")), ConfigError);
}

TEST_CASE("config hash is stable and content sensitive") {
    const auto& c = test::case1();
    CHECK(config_hash(c) == config_hash(load_config(test::config_path("case1.json"))));
    CHECK(config_hash(c) != config_hash(test::case2()));
    Config changed = c;
    changed.scenarios[0].t_cb_ms = 4.0;
    CHECK(config_hash(changed) != config_hash(c));
}

TEST_CASE("scenario application overrides the breaker and converter ratings") {
    const auto& c = test::case1();
    DesignScenario s = c.scenarios.back();
    const GridModel m = c.model.with_scenario(s);
    for (const auto& b : m.breakers) {
        CHECK(b.params.i_max_ka == s.i_cb_max_ka);
        CHECK(b.params.t_cb_ms == s.t_cb_ms);
    }
    for (const auto& cv : m.converters) CHECK(cv.params.k_pu == s.k_pu);
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "hvdc/analytics.hpp"
#include "hvdc/emt/simulator.hpp"
#include "support.hpp"

using namespace hvdc;
using doctest::Approx;

TEST_CASE("converter current limit") {
    auto p = test::case1().model.converter("C1").params;
    // independent: i_ac = 1.2 * S / (sqrt3 * u_ac) * sqrt2, I = 3 (K i_a - i_ac / 2)
    const double i_ac = 1.2 * 1034.0 * std::sqrt(2.0) / (std::sqrt(3.0) * 273.0);
    CHECK(p.ac_current_limit_peak_ka() == Approx(i_ac).epsilon(1e-9));
    CHECK(i_ac == Approx(3.7109).epsilon(1e-4));

    const auto k15 = converter_limit(p, 1.5);
    CHECK(k15.i_max_ka == Approx(4.3337).epsilon(1e-3));
    CHECK(k15.i_max_ka == Approx(3.0 * (1.5 * 2.2 - i_ac / 2.0)).epsilon(1e-12));
    CHECK(k15.i_rated_ka == Approx(1000.0 / 525.0));
    CHECK(converter_limit(p, 2.0).i_max_ka == Approx(7.6337).epsilon(1e-3));
}

TEST_CASE("breaker requirement") {
    CHECK(inductor_for_breaker(525, 0, 12, 3, 2) == Approx(116.7).epsilon(1e-3));
    CHECK(inductor_for_breaker(525, 0, 12, 3, 2) == Approx(525.0 * 2.0 / 9.0));
    // a negative mean voltage adds to the driving voltage
    CHECK(inductor_for_breaker(525, -100, 12, 3, 2) == Approx(625.0 * 2.0 / 9.0));
    CHECK_THROWS_AS(inductor_for_breaker(525, 0, 3, 3, 2), AnalyticsError);
}

TEST_CASE("breaker requirement is linear in t_n and in the inverse margin") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> tn(0.5, 8.0), scale(1.1, 4.0), imax(6.0, 30.0);
    for (int i = 0; i < 200; ++i) {
        const double t = tn(rng), s = scale(rng), m = imax(rng);
        const double base = inductor_for_breaker(525, 0, m, 3, t);
        CHECK(inductor_for_breaker(525, 0, m, 3, s * t) == Approx(s * base).epsilon(1e-12));
        // scaling the margin by s scales L by 1/s
        const double m2 = 3.0 + s * (m - 3.0);
        CHECK(inductor_for_breaker(525, 0, m2, 3, t) == Approx(base / s).epsilon(1e-12));
    }
}

TEST_CASE("converter requirement, first analytical iteration") {
    const auto p = test::case1().model.converter("C1").params;
    const auto lim = converter_limit(p, 1.5);
    const auto r = inductor_for_converter(525, 0, 2, 10, lim.margin_ka(), 0, 0);
    CHECK(r.constrained);
    // (525 * 2 - 10 * 2.4289) / 2.4289
    CHECK(r.l_mh == Approx(422.3).epsilon(5e-3));
    CHECK(r.l_mh == Approx((1050.0 - 10.0 * lim.margin_ka()) / lim.margin_ka()).epsilon(1e-12));
}

TEST_CASE("converter requirement clamps at zero and rejects empty margins") {
    const auto r = inductor_for_converter(525, 0, 0.01, 500, 5, 0, 0);
    CHECK_FALSE(r.constrained);
    CHECK(r.l_mh == 0.0);
    CHECK(r.raw_mh < 0.0);
    CHECK_THROWS_AS(inductor_for_converter(525, 0, 2, 10, 0, 0, 0), AnalyticsError);
    CHECK_THROWS_AS(inductor_for_converter(525, 0, 2, 10, 1, -2, 0), AnalyticsError);
}

TEST_CASE("converter requirement strictly decreases with infeed") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> pos(0.01, 5.0);
    for (int i = 0; i < 500; ++i) {
        const double d_con = pos(rng), l_eq = pos(rng);
        const double t_n = 2.0 + pos(rng);
        const double a = pos(rng), b = a + pos(rng);
        const auto lo = inductor_for_converter(525, 0, t_n, l_eq, d_con, a, 0);
        const auto hi = inductor_for_converter(525, 0, t_n, l_eq, d_con, 0, b);
        REQUIRE(lo.raw_mh > 0.0);
        CHECK(hi.raw_mh < lo.raw_mh);
    }
}

TEST_CASE("convergence check") {
    CHECK(converged(100, 100, 0.05));
    CHECK(converged(104, 100, 0.05));
    CHECK_FALSE(converged(106, 100, 0.05));
    CHECK_FALSE(converged(94, 100, 0.05));
}

TEST_CASE("KPI values and the limiting tag") {
    const auto k = kpis(1.5, 2.2, 3.245, 12, 8, 3);
    REQUIRE(k.converter);
    CHECK(*k.converter == Approx((3.3 - 3.245) / 1.1));
    CHECK(*k.converter == Approx(0.050).epsilon(1e-2));
    CHECK(k.breaker == Approx(4.0 / 9.0));
    CHECK(k.overall == *k.converter);
    CHECK(k.limiting == Limiting::Converter);

    const auto b = kpis(2.0, 2.2, 2.2, 12, 11, 3);
    CHECK(b.limiting == Limiting::Breaker);
    CHECK(b.overall == Approx(1.0 / 9.0));

    // tie goes to the converter
    const auto tie = kpis(2.0, 2.0, 3.0, 12, 7.5, 3);
    CHECK(*tie.converter == Approx(tie.breaker));
    CHECK(tie.limiting == Limiting::Converter);

    const auto only = kpis_breaker_only(12, 10.2, 3);
    CHECK_FALSE(only.converter);
    CHECK(only.overall == Approx(0.2));
    CHECK(only.limiting == Limiting::Breaker);
}

TEST_CASE("converter KPI normalization") {
    for (double k : {1.01, 1.5, 2.0, 3.7}) {
        for (double ir : {0.5, 2.2, 4.0}) {
            CHECK(*kpis(k, ir, ir, 12, 5, 3).converter == Approx(1.0).epsilon(1e-12));
            CHECK(*kpis(k, ir, k * ir, 12, 5, 3).converter == Approx(0.0).scale(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("critical converter is the closest continuous-operation one") {
    const auto& m = test::case1().model;
    auto z1 = critical_converter(m, "Z1", "B1");
    REQUIRE(z1);
    CHECK(z1->id == "C1");
    CHECK(z1->l_eq_mh == Approx(10.0));
    CHECK(z1->path.empty());

    auto z2 = critical_converter(m, "Z2", "B3");
    REQUIRE(z2);
    CHECK(z2->id == "C3");
    // 10 mH plus 250 km at 0.21 mH/km
    CHECK(z2->l_eq_mh == Approx(10.0 + 0.21 * m.cable(z2->path.front()).params.length_km));
}

TEST_CASE("critical converter choice survives uniform scaling of the margins") {
    GridModel m = test::case2().model;
    std::map<std::string, std::string> before;
    for (const auto& z : m.zones)
        for (const auto& b : m.boundary_breakers(z.id)) {
            const auto& br = m.breaker(b);
            const auto near = m.zone_of_bus(br.from) == z.id ? br.from : br.to;
            auto c = critical_converter(m, z.id, near);
            before[b + "/" + z.id] = c ? c->id : "";
        }
    for (auto& c : m.converters) c.params.i_arm_rated_ka *= 1.7;
    for (const auto& [key, id] : before) {
        const auto slash = key.find('/');
        const auto b = key.substr(0, slash), z = key.substr(slash + 1);
        const auto& br = m.breaker(b);
        const auto near = m.zone_of_bus(br.from) == z ? br.from : br.to;
        auto c = critical_converter(m, z, near);
        CHECK((c ? c->id : std::string()) == id);
    }
}

TEST_CASE("critical power flows of the partially selective grid") {
    const auto& m = test::case1().model;
    auto flow = [&](const std::string& b, const std::string& z, const std::string& near) {
        return critical_power_flow(m, b, z, critical_converter(m, z, near));
    };
    using F = std::map<std::string, double>;
    // droop converters stay at zero
    CHECK(flow("CB12", "Z1", "B1") == F{{"C1", 1}, {"C2", 0}, {"C3", -1}, {"C4", -1}, {"C5", 0}});
    CHECK(flow("CB12", "Z2", "B3") == F{{"C1", 0}, {"C2", 0}, {"C3", 1}, {"C4", 1}, {"C5", 0}});
    const auto& cb23 = m.breaker("CB23");
    const auto z2 = *m.zone_of_bus(cb23.from) == "Z2" ? cb23.from : cb23.to;
    const auto z3 = z2 == cb23.from ? cb23.to : cb23.from;
    CHECK(flow("CB23", "Z2", z2) == F{{"C1", 1}, {"C2", 0}, {"C3", 1}, {"C4", -1}, {"C5", 0}});
    CHECK(flow("CB23", "Z3", z3) == F{{"C1", 0}, {"C2", 0}, {"C3", -1}, {"C4", 1}, {"C5", 0}});
}

TEST_CASE("explicit critical flows take precedence") {
    const auto& m = test::case2().model;
    auto c = critical_converter(m, "ZB1", "B1");
    const auto f = critical_power_flow(m, "L1", "ZB1", c);
    CHECK(f.at("C1") == 1);
    CHECK(f.at("C2") == 1);
    const auto g = critical_power_flow(m, "L6", *m.zone_of_bus(m.breaker("L6").from), std::nullopt);
    CHECK(g.at("C3") == 1);
    CHECK(g.at("C4") == 1);
}

TEST_CASE("terminal fault case across the breaker") {
    const auto& m = test::case1().model;
    auto crit = critical_converter(m, "Z1", "B1");
    auto fc = critical_fault_case(m, "CB12", "Z1", crit, critical_power_flow(m, "CB12", "Z1", crit));
    CHECK(fc.study_breaker == "CB12");
    CHECK(fc.near_bus == "B1");
    CHECK(fc.far_bus == "B3");
    CHECK(fc.faulted_zone == "Z2");
    CHECK(fc.fault.on_bus());
    CHECK(fc.critical_converter == std::optional<std::string>("C1"));
}

TEST_CASE("voltage envelope on the bundled case") {
    const auto& cfg = test::case1();
    const auto& m = cfg.model;
    const auto& s = cfg.scenarios[0];
    auto crit = critical_converter(m, "Z1", "B1");
    auto fc = critical_fault_case(m, "CB12", "Z1", crit, critical_power_flow(m, "CB12", "Z1", crit));
    fc.inductances_mh["CB12"] = 116.7;
    emt::EmtSimulator sim;
    const auto env = voltage_envelope(sim, m, s, fc);
    REQUIRE(env.points.size() >= 6);
    CHECK(env.points.front().position_pct == 0.0);
    CHECK(env.u_m_kv <= 0.0);
    for (double t : {0.2, 0.5, 1.0, 2.0, 3.0, 5.0}) CHECK(env.u_m_at(t) <= 0.0);
    for (std::size_t i = 1; i < env.points.size(); ++i)
        CHECK(env.points[i].position_km > env.points[i - 1].position_km);
    CHECK(env.emt_runs == static_cast<int>(env.points.size()));
}

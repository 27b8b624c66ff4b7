#include <doctest.h>

#include <cmath>

#include "hvdc/analytics.hpp"
#include "hvdc/emt/network.hpp"
#include "hvdc/emt/simulator.hpp"
#include "support.hpp"

using namespace hvdc;

namespace {

FaultCase cb12_zone1(double l_mh) {
    const auto& m = test::case1().model;
    auto crit = critical_converter(m, "Z1", "B1");
    auto fc = critical_fault_case(m, "CB12", "Z1", crit, critical_power_flow(m, "CB12", "Z1", crit));
    fc.inductances_mh["CB12"] = l_mh;
    return fc;
}

double peak_abs(const std::vector<double>& v) {
    double p = 0.0;
    for (double x : v) p = std::max(p, std::abs(x));
    return p;
}

}  // namespace

TEST_CASE("fault wave crosses an isolated line in one travel time") {
    const Config cfg = load_config_string(test::kLineConfig);
    const auto& cable = cfg.model.cables[0].params;
    const double tau_ms = cable.length_km * std::sqrt(cable.l_mh_per_km * 1e-3 * cable.c_uf_per_km * 1e-6) * 1e3;
    CHECK(cable.travel_time_ms() == doctest::Approx(tau_ms));

    for (double dt_us : {5.0, 10.0, 20.0}) {
        DesignScenario s = cfg.scenarios[0];
        s.dt_us = dt_us;
        auto net = emt::build_network(cfg.model, s);
        net.initialize_steady_state({});
        const double u0 = net.bus_voltage("B");
        net.set_fault(net.node("A"));
        net.activate_fault();
        double arrival = -1.0;
        while (net.time() < 5e-3) {
            net.step();
            if (net.bus_voltage("B") < u0 - 0.05 * 525e3) {
                arrival = net.time() * 1e3;
                break;
            }
        }
        CAPTURE(dt_us);
        REQUIRE(arrival > 0.0);
        CHECK(std::abs(arrival - tau_ms) <= dt_us * 1e-3 + 1e-9);
    }
}

TEST_CASE("halving the time step barely moves the peak breaker current") {
    const auto& cfg = test::case1();
    emt::EmtSimulator sim;
    DesignScenario s = cfg.scenarios[0];
    const auto fc = cb12_zone1(180.0);
    const double coarse = sim.run(cfg.model, s, fc).measured.i_cb_peak_ka;
    s.dt_us /= 2.0;
    const double fine = sim.run(cfg.model, s, fc).measured.i_cb_peak_ka;
    CHECK(std::abs(coarse - fine) / fine < 0.02);
}

TEST_CASE("peak breaker current does not grow with the inductor") {
    const auto& cfg = test::case1();
    emt::EmtSimulator sim;
    for (const auto& s : {cfg.scenarios[0], cfg.scenarios[6]}) {
        double prev = INFINITY;
        for (double l : {90.0, 180.0, 360.0}) {
            const double peak = sim.run(cfg.model, s, cb12_zone1(l)).measured.i_cb_peak_ka;
            CHECK(peak <= prev);
            prev = peak;
        }
    }
}

TEST_CASE("stored energy never rises with sources zeroed") {
    const auto& cfg = test::case1();
    const auto& s = cfg.scenarios[0];
    for (const char* fault_bus : {"", "B3", "B6"}) {
        auto net = emt::build_network(cfg.model.with_scenario(s), s);
        net.disable_sources();
        net.initialize_steady_state(s.setpoints_pu);
        if (*fault_bus) {
            net.set_fault(net.node(fault_bus));
            net.activate_fault();
        }
        const double e0 = net.stored_energy();
        REQUIRE(e0 > 0.0);
        double prev = e0, worst = 0.0;
        for (int k = 0; k < 3000; ++k) {
            net.step();
            const double e = net.stored_energy();
            worst = std::max(worst, e - prev);
            prev = e;
        }
        CAPTURE(fault_bus);
        CHECK(worst <= 1e-12 * e0);
        if (*fault_bus) CHECK(prev < e0);
    }
}

TEST_CASE("reruns are identical") {
    const auto& cfg = test::case1();
    emt::EmtSimulator sim;
    const auto fc = cb12_zone1(150.0);
    const auto a = sim.run(cfg.model, cfg.scenarios[1], fc);
    const auto b = sim.run(cfg.model, cfg.scenarios[1], fc);
    CHECK(a.time_s == b.time_s);
    CHECK(a.traces == b.traces);
    CHECK(a.blocks.size() == b.blocks.size());
}

TEST_CASE("measurements equal their recomputation from the traces") {
    const auto& cfg = test::case1();
    emt::EmtSimulator sim;
    const auto& s = cfg.scenarios[0];
    const auto fc = cb12_zone1(200.0);
    const auto r = sim.run(cfg.model, s, fc);
    MeasurementSpec spec;
    spec.u_dc_kv = cfg.model.nominal_voltage_kv();
    spec.t_n_ms = s.neutralization_time_ms();
    spec.critical_converter = fc.critical_converter;
    spec.converters_of_interest = fc.converters_of_interest;
    const auto m = derive_measurements(r, spec);
    CHECK(m.t_arrival_ms == r.measured.t_arrival_ms);
    CHECK(m.t_clamp_ms == r.measured.t_clamp_ms);
    CHECK(m.delta_i_in_ka == r.measured.delta_i_in_ka);
    CHECK(m.delta_i_cab_ka == r.measured.delta_i_cab_ka);
    CHECK(m.delta_i_con_ka == r.measured.delta_i_con_ka);
    CHECK(m.i_arm_peak_ka == r.measured.i_arm_peak_ka);
    CHECK(m.i_cb_peak_ka == r.measured.i_cb_peak_ka);
    CHECK(m.u_c_avg_kv == r.measured.u_c_avg_kv);
    // peak breaker current is the largest I_cb sample up to t_a + t_n
    CHECK(m.i_cb_peak_ka <= peak_abs(r.trace("I_cb")) * 1e-3 + 1e-12);
}

TEST_CASE("breaker trips and clamps the fault current") {
    const auto& cfg = test::case1();
    emt::EmtSimulator sim;
    const auto& s = cfg.scenarios[0];
    const auto r = sim.run(cfg.model, s, cb12_zone1(200.0));
    const auto& m = r.measured;
    CHECK(m.t_arrival_ms > 0.0);
    CHECK(m.t_clamp_ms == doctest::Approx(m.t_arrival_ms + s.neutralization_time_ms()).epsilon(0.02));
    const auto& i = r.trace("I_cb");
    std::size_t top = 0;
    for (std::size_t k = 0; k < i.size(); ++k)
        if (std::abs(i[k]) > std::abs(i[top])) top = k;
    // current peaks as the varistor takes over, then falls
    CHECK(r.time_s[top] * 1e3 == doctest::Approx(m.t_clamp_ms).epsilon(0.05));
    CHECK(std::abs(i.back()) < 0.5 * std::abs(i[top]));
    CHECK(r.varistor_energy_mj.at("CB12") > 0.0);
}

TEST_CASE("disconnected subnetworks are rejected") {
    Config cfg = load_config_string(test::kLineConfig);
    cfg.model.buses.push_back({"lonely"});
    cfg.model.zones[0].buses.push_back("lonely");
    CHECK_THROWS_AS(emt::build_network(cfg.model, cfg.scenarios[0]), SimulationError);
}

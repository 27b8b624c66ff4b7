#pragma once

#include <functional>
#include <string>

#include "hvdc/config.hpp"
#include "hvdc/emt/fault_case.hpp"

namespace hvdc::test {

inline std::string config_path(const std::string& name) { return std::string(HVDC_CONFIG_DIR) + "/" + name; }

inline const Config& case1() {
    static const Config c = load_config(config_path("case1.json"));
    return c;
}

inline const Config& case2() {
    static const Config c = load_config(config_path("case2.json"));
    return c;
}

// one converter feeding a 150 km line, no breakers
inline const char* kLineConfig = R"({
  "name": "line",
  "defaults": {
    "converter": {"S_MVA": 1034, "P_MW": 1000, "U_dc_kV": 525, "u_ac_kV": 273, "i_arm_rated_kA": 2.2,
                  "i_ac_max_pu": 1.2, "K_pu": 1.5, "R_arm_ohm": 0.4, "L_arm_mH": 15, "C_sm_uF": 6000,
                  "N_sm": 276, "droop_kV_per_MW": 0.025},
    "cable": {"R_ohm_per_km": 0.011, "L_mH_per_km": 0.21, "C_uF_per_km": 0.22},
    "breaker": {"I_rated_kA": 3, "I_max_kA": 12, "t_cb_ms": 2, "t_relay_ms": 0, "clamp_pu": 1.5}
  },
  "buses": ["A", "B"],
  "cables": [{"id": "c", "from": "A", "to": "B", "length_km": 150}],
  "converters": [{"id": "CA", "bus": "A", "control": "droop"}],
  "breakers": [],
  "zones": [{"id": "Z", "buses": ["A", "B"], "cables": ["c"], "converters": ["CA"]}],
  "scenarios": [{"id": "s", "dt_us": 10}]
})";

// Returns measurements scripted as functions of the study breaker's inductance.
class FakeSimulator : public Simulator {
public:
    std::function<double(double)> i_cb_ka;
    std::function<double(double)> i_arm_ka;
    int runs = 0;

    TransientResult run(const GridModel& model, const DesignScenario&, const FaultCase& fc) override {
        ++runs;
        double l = model.breaker(fc.study_breaker).l_dc_mh;
        if (auto it = fc.inductances_mh.find(fc.study_breaker); it != fc.inductances_mh.end()) l = it->second;
        TransientResult r;
        r.dt_s = 20e-6;
        const std::size_t n = 1000;
        for (std::size_t k = 0; k < n; ++k) r.time_s.push_back(static_cast<double>(k) * r.dt_s);
        r.traces["U_C"].assign(n, 0.0);
        r.traces["I_cb"].assign(n, i_cb_ka(l) * 1e3);
        r.measured.i_cb_peak_ka = i_cb_ka(l);
        r.measured.i_arm_peak_ka = i_arm_ka(l);
        return r;
    }
};

}  // namespace hvdc::test

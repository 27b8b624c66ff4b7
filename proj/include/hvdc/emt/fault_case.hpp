// Simulator port: what a sizing run asks of a transient simulator and
// what it gets back. Any EMT tool adapter can implement Simulator.
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvdc/grid_model.hpp"

namespace hvdc {

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pole-to-ground fault location. With an empty `cable` the fault sits on
/// `bus`; otherwise it sits `position_km` along `cable`, measured from the
/// end attached to `bus`.
struct FaultLocation {
    std::string bus;
    std::string cable;
    double position_km = 0.0;

    bool on_bus() const { return cable.empty() || position_km <= 0.0; }
};

struct FaultCase {
    std::string study_breaker;
    std::string near_bus;      // breaker terminal in the zone being protected
    std::string far_bus;       // breaker terminal in the faulted zone
    std::string faulted_zone;
    FaultLocation fault;

    std::map<std::string, double> setpoints_pu;
    std::map<std::string, double> inductances_mh;  // overrides model L_dc per breaker

    std::optional<std::string> critical_converter;
    std::optional<std::string> connection_cable;  // first cable from near bus toward the critical converter
    std::vector<std::string> infeed_cables;       // other cables at the near bus inside the protected zone
    std::vector<std::string> infeed_breakers;     // other breakers at the near bus
    std::vector<std::string> converters_of_interest;

    bool trip = true;          // breakers bordering the faulted zone operate
    bool zero_sources = false; // AC infeed and controls disabled (passivity studies)
    double horizon_ms = 0.0;   // 0 = automatic
};

/// Scalars derived from the probe traces of one run (kV, kA, ms).
struct Measurements {
    double t_arrival_ms = 0.0;
    double t_clamp_ms = 0.0;
    double delta_i_in_ka = 0.0;
    double delta_i_cab_ka = 0.0;
    double delta_i_con_ka = 0.0;
    double i_arm_peak_ka = 0.0;   // i_a^a
    double i_cb_peak_ka = 0.0;    // I_cb^a
    double u_c_avg_kv = 0.0;      // mean of U_C over [t_arrival, t_arrival + t_n]
};

struct BlockEvent {
    std::string converter;
    double time_ms = 0.0;
};

struct TransientResult {
    double dt_s = 0.0;
    std::vector<double> time_s;
    /// Probe traces in SI units (V, A). Always present:
    ///   "U_near", "U_C", "I_cb", "I_in", "I_conn",
    ///   "I_dc:<conv>", "i_arm:<conv>", "U:<bus>", "I_br:<breaker>".
    std::map<std::string, std::vector<double>> traces;
    std::vector<BlockEvent> blocks;
    std::map<std::string, double> varistor_energy_mj;
    Measurements measured;

    const std::vector<double>& trace(const std::string& name) const;
    bool blocked(const std::string& converter) const;
};

/// Everything needed to re-derive Measurements from raw traces.
struct MeasurementSpec {
    double u_dc_kv = 0.0;
    double t_n_ms = 0.0;
    double arrival_drop_pu = 0.05;
    std::optional<std::string> critical_converter;
    std::vector<std::string> converters_of_interest;
};

/// Derive the sizing measurements from traces. Throws SimulationError if
/// the fault wave never reaches the breaker terminal within the horizon.
Measurements derive_measurements(const TransientResult& result, const MeasurementSpec& spec);

class Simulator {
public:
    virtual ~Simulator() = default;
    virtual TransientResult run(const GridModel& model, const DesignScenario& scen, const FaultCase& fc) = 0;
};

}  // namespace hvdc

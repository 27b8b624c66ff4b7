// Grid, protection-zone and design-scenario data model.
//
// Quantities are kept in the units used by the configuration files
// (kV, kA, MW, MVA, mH, ms, km, uF). Note that kV * ms / kA = mH, so
// the closed-form sizing relations can be evaluated directly on these
// fields without conversion.
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hvdc {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by load_config when the parsed model violates an invariant.
class ValidationError : public ConfigError {
public:
    explicit ValidationError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

enum class ControlMode { DcVoltageDroop, ConstantPQ };
enum class FrtRequirement { ContinuousOperation, MayBlock };

const char* to_string(ControlMode m);
const char* to_string(FrtRequirement f);

struct ConverterParams {
    double s_mva = 0.0;           // rated apparent power, per pole
    double p_mw = 0.0;            // rated active power, per pole
    double u_dc_kv = 0.0;         // rated DC voltage
    double u_ac_kv = 0.0;         // rated AC voltage, rms line-to-line, converter side
    double i_arm_rated_ka = 0.0;  // rated peak arm current
    double i_ac_max_pu = 0.0;     // AC current limit, pu of rated peak AC current
    double k_pu = 0.0;            // overcurrent (blocking) factor
    double r_arm_ohm = 0.0;
    double l_arm_mh = 0.0;
    double c_sm_uf = 0.0;         // submodule capacitance
    int n_sm = 0;                 // submodules per arm
    ControlMode control = ControlMode::ConstantPQ;
    double droop_kv_per_mw = 0.0;
    FrtRequirement frt = FrtRequirement::ContinuousOperation;
    double p_min_pu = -1.0;       // allowed setpoint range (e.g. 0 for offshore)
    double p_max_pu = 1.0;

    double rated_dc_current_ka() const { return p_mw / u_dc_kv; }
    double equivalent_inductance_mh() const { return 2.0 / 3.0 * l_arm_mh; }
    double equivalent_resistance_ohm() const { return 2.0 / 3.0 * r_arm_ohm; }
    /// Peak AC phase current at the AC limit, kA.
    double ac_current_limit_peak_ka() const;
    /// Aggregate DC-side capacitance 6 C_sm / N, uF.
    double aggregate_capacitance_uf() const;
};

struct BreakerParams {
    double i_rated_ka = 0.0;
    double i_max_ka = 0.0;
    double t_cb_ms = 0.0;
    double t_relay_ms = 0.1;
    double clamp_pu = 1.5;

    double neutralization_time_ms() const { return t_relay_ms + t_cb_ms; }
};

struct CableParams {
    double length_km = 0.0;
    double r_ohm_per_km = 0.011;
    double l_mh_per_km = 0.21;
    double c_uf_per_km = 0.22;
    // Optional high-frequency loss branch (R_hf parallel L_hf per lumped
    // resistance point). Leaves the DC resistance untouched and attenuates
    // travelling-wave fronts. Zero disables it.
    double r_hf_ohm_per_km = 0.0;
    double hf_time_constant_ms = 0.0;

    double surge_impedance_ohm() const;
    double wave_velocity_km_per_ms() const;
    double travel_time_ms() const;
    double total_inductance_mh() const { return l_mh_per_km * length_km; }
    double total_resistance_ohm() const { return r_ohm_per_km * length_km; }
};

struct Bus {
    std::string id;
};

struct Cable {
    std::string id;
    std::string from;
    std::string to;
    CableParams params;
};

struct Converter {
    std::string id;
    std::string bus;
    ConverterParams params;
};

struct Breaker {
    std::string id;
    std::string from;  // bus on one side
    std::string to;    // bus on the other side
    BreakerParams params;
    double l_dc_mh = 0.0;
};

struct Zone {
    std::string id;
    std::vector<std::string> buses;
    std::vector<std::string> cables;
    std::vector<std::string> converters;
};

/// Explicit critical power flow for one sizing direction (overrides the
/// rule-based derivation, e.g. for meshed grids).
struct CriticalFlowOverride {
    std::string breaker;
    std::string zone;  // zone whose requirement is being sized
    std::map<std::string, double> setpoints_pu;
};

struct DesignScenario {
    std::string id;
    double k_pu = 1.5;
    double i_cb_max_ka = 12.0;
    double t_cb_ms = 2.0;
    double t_relay_ms = 0.1;
    std::map<std::string, double> setpoints_pu;  // + = rectifier
    double epsilon = 0.05;
    double kpi_target = 0.05;
    double alpha_gain = 0.4;  // alpha = min(alpha_gain * kpi, alpha_max)
    double alpha_max = 0.4;
    double dt_us = 20.0;
    double horizon_ms = 0.0;  // 0 selects an automatic horizon
    int part_b_cap = 15;
    int part_c_cap = 25;
    double l_floor_mh = 20.0;  // Part C stops here, constraint treated as inactive

    double neutralization_time_ms() const { return t_relay_ms + t_cb_ms; }
};

class GridModel {
public:
    std::string name;
    std::vector<Bus> buses;
    std::vector<Cable> cables;
    std::vector<Converter> converters;
    std::vector<Breaker> breakers;
    std::vector<Zone> zones;
    std::vector<CriticalFlowOverride> critical_flows;

    std::optional<std::size_t> bus_index(const std::string& id) const;
    std::optional<std::size_t> cable_index(const std::string& id) const;
    std::optional<std::size_t> converter_index(const std::string& id) const;
    std::optional<std::size_t> breaker_index(const std::string& id) const;
    std::optional<std::size_t> zone_index(const std::string& id) const;

    const Cable& cable(const std::string& id) const;
    const Converter& converter(const std::string& id) const;
    const Breaker& breaker(const std::string& id) const;
    const Zone& zone(const std::string& id) const;

    /// Zone owning a bus / cable / converter; empty if unassigned.
    std::optional<std::string> zone_of_bus(const std::string& bus) const;
    std::optional<std::string> zone_of_cable(const std::string& cable) const;
    std::optional<std::string> zone_of_converter(const std::string& conv) const;

    /// C_ij in zone order; 1 iff exactly one breaker joins zones i and j.
    std::vector<std::vector<int>> zone_adjacency() const;
    int adjacency(const std::string& zi, const std::string& zj) const;

    /// Breakers with one terminal in the given zone.
    std::vector<std::string> boundary_breakers(const std::string& zone) const;

    /// Nominal DC voltage (taken from the first converter).
    double nominal_voltage_kv() const;

    /// Copy with the scenario's K / I_cb_max / t_cb / t_relay applied.
    GridModel with_scenario(const DesignScenario& scen) const;
};

/// Deterministic, order-stable list of invariant violations.
std::vector<std::string> validate(const GridModel& model);
std::vector<std::string> validate(const DesignScenario& scen, const GridModel& model);

/// Shortest cable path (by length) between two buses restricted to one zone.
/// Returns the ordered cable ids; nullopt if unreachable.
std::optional<std::vector<std::string>> zone_cable_path(const GridModel& model, const std::string& zone,
                                                        const std::string& from_bus,
                                                        const std::string& to_bus);

}  // namespace hvdc

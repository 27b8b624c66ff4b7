// Fixed-step nodal network with trapezoidal companion models and
// Bergeron travelling-wave line sections. Internal quantities are SI.
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hvdc/emt/fault_case.hpp"
#include "hvdc/grid_model.hpp"

namespace hvdc::emt {

constexpr int kGround = -1;

/// Series R-L branch with an optional series counter-voltage `e`
/// (opposing current from a to b). L = 0 degenerates to a resistor.
struct RlBranch {
    int a = kGround;
    int b = kGround;
    double r = 0.0;
    double l = 0.0;
    double e = 0.0;
    bool open = false;

    // companion state
    double g = 0.0;
    double hist = 0.0;
    double i = 0.0;      // a -> b
    double v = 0.0;      // v_a - v_b
    double e_prev = 0.0;
};

struct Capacitor {
    int a = kGround;
    int b = kGround;
    double c = 0.0;
    double g = 0.0;
    double hist = 0.0;
    double i = 0.0;
    double v = 0.0;
};

/// Lossless constant-parameter line section between nodes k and m.
struct LineSection {
    int k = kGround;
    int m = kGround;
    double z = 0.0;
    double delay_steps = 0.0;
    // w = v / Z + i (i into the line) sampled at every step, ring buffers
    std::vector<double> wk, wm;
    std::size_t head = 0;  // slot of the most recent sample
    double hk = 0.0, hm = 0.0;
    double ik = 0.0, im = 0.0;
    double vk = 0.0, vm = 0.0;

    double delayed(const std::vector<double>& w) const;
    double stored_energy(double dt) const;
};

struct Injection {
    int node = kGround;
    double current = 0.0;  // into the node
};

/// Contribution of one element to the current a cable delivers into a bus.
struct EndTerm {
    enum class Kind { Branch, Capacitor, LineK, LineM } kind = Kind::Branch;
    std::size_t index = 0;
    double sign = 1.0;
};

/// One element of the series chain of a cable, walked from end a to end b.
struct ChainLink {
    enum class Kind { Series, HfPair, Line, Pi } kind = Kind::Series;
    std::size_t first = 0;   // branch / line index
    std::size_t second = 0;  // second branch (HfPair) or capacitor pair start (Pi)
};

struct CableModel {
    std::string id;
    int node_a = kGround;
    int node_b = kGround;
    double r_total = 0.0;
    bool lumped = false;
    std::vector<ChainLink> chain;
    std::vector<EndTerm> end_a, end_b;
};

enum class BreakerPhase { Closed, Commutating, Clamping, Open };
const char* to_string(BreakerPhase p);

struct BreakerModel {
    std::string id;
    std::size_t branch = 0;  // from -> to
    int node_from = kGround;
    int node_to = kGround;
    BreakerParams params;
    double l_dc_h = 0.0;

    // protection
    bool armed = false;        // operates for the current fault
    int detect_node = kGround; // terminal on the faulted side
    double detect_threshold_v = 0.0;
    std::optional<double> arrival_s;
    double trip_s = 0.0;
    double clamp_s = 0.0;

    BreakerPhase phase = BreakerPhase::Closed;
    double clamp_v = 0.0;
    double direction = 1.0;
    double varistor_energy_j = 0.0;
};

struct ConverterModel {
    std::string id;
    int terminal = kGround;
    int internal = kGround;
    std::size_t branch = 0;     // internal -> terminal, carries I_dc
    std::size_t capacitor = 0;
    std::size_t injection = 0;
    ConverterParams params;

    // controls (SI)
    double p_set_w = 0.0;
    double u_ref_v = 0.0;
    double droop_w_per_v = 0.0;
    double energy_gain_w_per_v = 0.0;
    double e_ref_v = 0.0;
    double p_max_w = 0.0;
    double p_ac_w = 0.0;
    double lag_s = 0.0;
    double i_ac_peak_a = 0.0;   // AC current limit (peak)
    double i_ac_now_a = 0.0;    // present AC current (peak), saturates at the limit
    double ac_peak_per_w = 0.0; // peak AC current per watt of AC power
    double arm_limit_a = 0.0;   // K * i_a^r
    bool zero_sources = false;
    bool blocked = false;
    double block_time_s = 0.0;

    double arm_current_estimate(double i_dc) const;
};

struct FaultModel {
    int node = kGround;
    double g = 1e4;  // 0.1 mOhm
    bool active = false;
};

/// Numerical knobs of the engine. Defaults are documented in README.md.
struct EngineOptions {
    double breaker_on_resistance_ohm = 0.01;
    double varistor_slope_ohm = 0.5;
    double control_lag_ms = 2.0;
    double energy_time_constant_ms = 20.0;
    double divergence_factor = 10.0;
};

class DiscretizedNetwork {
public:
    DiscretizedNetwork() = default;

    int add_node(std::string name);
    int node(const std::string& name) const;
    std::optional<int> find_node(const std::string& name) const;
    std::size_t node_count() const { return names_.size(); }
    std::size_t bus_node_count() const { return bus_nodes_.size(); }
    const std::string& node_name(int n) const { return names_.at(static_cast<std::size_t>(n)); }

    double dt() const { return dt_; }
    double time() const { return time_; }
    long step_index() const { return step_; }
    double nominal_voltage() const { return u_nom_; }

    const std::vector<CableModel>& cables() const { return cables_; }
    const std::vector<ConverterModel>& converters() const { return converters_; }
    const std::vector<BreakerModel>& breakers() const { return breakers_; }
    std::vector<BreakerModel>& breakers() { return breakers_; }
    const std::vector<LineSection>& lines() const { return lines_; }
    const std::vector<RlBranch>& branches() const { return branches_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    const CableModel& cable(const std::string& id) const;
    const ConverterModel& converter(const std::string& id) const;
    const BreakerModel& breaker(const std::string& id) const;
    BreakerModel& breaker(const std::string& id);

    double voltage(int n) const { return n == kGround ? 0.0 : v_(n); }
    double bus_voltage(const std::string& bus) const { return voltage(node(bus)); }
    /// Current delivered by a cable into the bus at one of its ends.
    double cable_current_into(const CableModel& c, int bus_node) const;
    double breaker_current(const BreakerModel& b) const { return branches_[b.branch].i; }
    double converter_current(const ConverterModel& c) const { return branches_[c.branch].i; }

    /// Solve the DC operating point for the given converter setpoints (pu)
    /// and load it into every companion model's history.
    void initialize_steady_state(const std::map<std::string, double>& setpoints_pu);

    /// Advance one time step.
    void step();

    /// Restart the clock at t = 0 without touching the electrical state.
    void reset_clock() {
        time_ = 0.0;
        step_ = 0;
    }

    void set_fault(int node);
    void activate_fault();
    void disable_sources();

    /// Total stored energy in inductors, capacitors and line sections (J).
    double stored_energy() const;

    // construction helpers used by build_network
    std::size_t add_branch(int a, int b, double r, double l);
    std::size_t add_capacitor(int a, int b, double c);
    std::size_t add_line(int k, int m, double z, double delay_s);
    std::size_t add_injection(int node);
    void add_cable(const Cable& cable, int node_a, int node_b);
    void add_converter(const Converter& conv, int terminal);
    void add_breaker(const Breaker& br, int node_from, int node_to);
    void configure(double dt_s, double u_nom_v, EngineOptions opts);
    void mark_bus(int node) { bus_nodes_.push_back(node); }

private:
    void refactor();
    void run_controls();
    void check_divergence() const;
    std::vector<int> floating_nodes() const;

    std::vector<std::string> names_;
    std::map<std::string, int> index_;
    std::vector<int> bus_nodes_;

    std::vector<RlBranch> branches_;
    std::vector<Capacitor> capacitors_;
    std::vector<LineSection> lines_;
    std::vector<Injection> injections_;
    std::vector<CableModel> cables_;
    std::vector<ConverterModel> converters_;
    std::vector<BreakerModel> breakers_;
    std::optional<FaultModel> fault_;
    std::vector<std::string> warnings_;

    EngineOptions opts_;
    double dt_ = 20e-6;
    double u_nom_ = 0.0;
    double time_ = 0.0;
    long step_ = 0;

    Eigen::MatrixXd g_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd v_;
    Eigen::VectorXd rhs_;
    bool dirty_ = true;
};

/// Lower a grid model into a discretized network. `split` optionally cuts a
/// cable at a position (km from the end attached to the given bus) and
/// inserts a node named "F" there. Throws SimulationError if the conductance
/// matrix is singular, naming the floating subnetwork.
DiscretizedNetwork build_network(const GridModel& model, const DesignScenario& scen,
                                 const std::optional<FaultLocation>& split = std::nullopt,
                                 const EngineOptions& opts = {});

}  // namespace hvdc::emt

// Hybrid analytical / EMT sizing of DC inductors.
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvdc/analytics.hpp"
#include "hvdc/emt/fault_case.hpp"
#include "hvdc/grid_model.hpp"

namespace hvdc {

struct IterationRecord {
    char part = 'A';
    double l_mh = 0.0;
    std::optional<Measurements> measured;
    std::optional<KpiSet> kpis;
    std::optional<double> alpha;
    std::string note;
};

struct SizingTrace {
    std::vector<IterationRecord> records;
    int emt_runs = 0;
    int envelope_runs = 0;
};

class SizingError : public std::runtime_error {
public:
    SizingError(const std::string& what, SizingTrace trace) : std::runtime_error(what), trace_(std::move(trace)) {}
    const SizingTrace& trace() const { return trace_; }

private:
    SizingTrace trace_;
};

/// Outcome of sizing one breaker's inductor for one zone's requirement.
struct CoreResult {
    std::string breaker;
    std::string zone;
    std::string near_bus;
    std::string far_bus;
    double l_mh = 0.0;
    double l_cb_mh = 0.0;                   // breaker requirement from the envelope
    std::optional<double> l_part_b_mh;      // Part B fixed point
    std::optional<CriticalConverter> critical;
    std::map<std::string, double> setpoints_pu;
    FaultCase fault_case;
    double u_m_kv = 0.0;
    std::optional<double> t_c_ms;
    KpiSet kpis;
    bool converged = false;
    bool active = true;  // false when the requirement vanished below the floor
    SizingTrace trace;
};

struct CoreOptions {
    /// Skip Parts A and B and refine from this value (reusing `warm`).
    std::optional<double> warm_start_mh;
    const CoreResult* warm = nullptr;
};

/// Size the inductor of `breaker` so that `zone` meets its requirements.
/// `model` carries the current inductances of all other breakers.
CoreResult size_core(Simulator& sim, const GridModel& model, const DesignScenario& scen, const std::string& breaker,
                     const std::string& zone, const CoreOptions& opts = {});

struct BreakerResult {
    std::string breaker;
    std::vector<CoreResult> directions;  // one per bordering zone
    std::vector<CoreResult> first_pass;  // directions before refinement
    double l_first_pass_mh = 0.0;  // before refinement
    double l_final_mh = 0.0;
    std::string governing_zone;
    bool refined = false;
};

struct SizingReport {
    std::string scenario;
    std::vector<BreakerResult> breakers;
    std::map<std::string, double> final_mh;
    int emt_runs = 0;
    int envelope_runs = 0;
    int refinement_passes = 0;
    std::vector<std::string> refined;  // breakers re-run during refinement
};

struct SizeAllOptions {
    bool refine_to_fixpoint = false;
    int max_passes = 5;
};

/// Size every breaker in ascending id order, then run one refinement pass
/// (or passes until nothing changes when refine_to_fixpoint is set).
SizingReport size_all(Simulator& sim, const GridModel& model, const DesignScenario& scen,
                      const SizeAllOptions& opts = {});

/// True if any other breaker's inductance moved by at least epsilon
/// (relative) since `sized_with` was recorded.
bool refinement_needed(const std::map<std::string, double>& sized_with, const std::map<std::string, double>& now,
                       const std::string& self, double epsilon);

struct ReplayCheck {
    std::string breaker;
    std::string zone;                       // protected zone of the fault case
    std::vector<BlockEvent> healthy_blocks;  // blocks outside the faulted zone
    double i_cb_peak_ka = 0.0;               // largest tripping-breaker current
    double i_cb_max_ka = 0.0;
    bool ok() const { return healthy_blocks.empty() && i_cb_peak_ka <= i_cb_max_ka; }
};

/// Re-simulate every critical fault case of `report` at its final
/// inductances over the whole horizon.
std::vector<ReplayCheck> replay_critical_cases(Simulator& sim, const GridModel& model, const DesignScenario& scen,
                                               const SizingReport& report);

/// Model with the given inductances applied.
GridModel apply_inductances(const GridModel& model, const std::map<std::string, double>& l_mh);

}  // namespace hvdc

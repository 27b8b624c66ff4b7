// Report export: JSON tree, per-scenario summary CSV, per-breaker
// iteration traces and envelope tables.
#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hvdc/config.hpp"
#include "hvdc/sizing.hpp"

namespace hvdc {

/// One scenario's outcome: a report, or the error with whatever trace the
/// failing core run had collected.
struct ScenarioOutcome {
    DesignScenario scenario;
    std::optional<SizingReport> report;
    std::string error;
    SizingTrace partial;

    bool ok() const { return report.has_value(); }
};

nlohmann::json to_json(const Measurements& m);
nlohmann::json to_json(const KpiSet& k);
nlohmann::json to_json(const FaultCase& fc);
FaultCase fault_case_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CoreResult& c);
nlohmann::json to_json(const ScenarioOutcome& o);

/// Whole document written as report.json. No timestamps, so identical
/// runs give identical bytes.
nlohmann::json report_document(const Config& cfg, const std::vector<ScenarioOutcome>& outcomes);

/// One row per scenario: scenario,K_pu,I_cb_max_kA,t_cb_ms,t_relay_ms, then
/// per breaker (ascending id) one <id>_<zone>_mH column per bordering zone
/// (ascending zone id), <id>_final_mH, <id>_zone and <id>_limiting, then
/// emt_runs,envelope_runs,status.
void write_summary_csv(std::ostream& os, const GridModel& model, const std::vector<ScenarioOutcome>& outcomes);

/// Iteration history of both directions of one breaker;
/// pass 2 rows come from the refinement pass:
/// zone,pass,iteration,part,L_mH,kpi,kpi_converter,kpi_breaker,limiting,alpha,
/// dI_in_kA,dI_cab_kA,i_arm_peak_kA,i_cb_peak_kA,note
void write_iteration_csv(std::ostream& os, const BreakerResult& br);

/// position_km,position_pct,t_n_ms,u_c_avg_kV,i_cb_peak_kA,critical
void write_envelope_csv(std::ostream& os, const VoltageEnvelope& env, const std::vector<double>& t_n_ms,
                        double tol_kv);

/// Number formatting shared by every CSV writer.
std::string fmt(double v);

}  // namespace hvdc

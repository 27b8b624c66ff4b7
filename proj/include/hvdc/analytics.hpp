// Closed-form inductor requirements, KPIs and critical-case selection.
// Units: kV, kA, ms, mH (kV*ms/kA = mH).
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvdc/emt/fault_case.hpp"
#include "hvdc/grid_model.hpp"

namespace hvdc {

class AnalyticsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ConverterLimit {
    double i_max_ka = 0.0;    // I_con^m
    double i_rated_ka = 0.0;  // I_con^r
    double margin_ka() const { return i_max_ka - i_rated_ka; }
};

/// Maximum DC current before the arm current reaches K * i_a^r.
ConverterLimit converter_limit(const ConverterParams& p, double k_pu);

struct ConverterRequirement {
    double l_mh = 0.0;
    bool constrained = true;  // false when the raw value was negative
    double raw_mh = 0.0;
};

/// Inductance keeping the converter current rise within d_i_con_c during t_n.
ConverterRequirement inductor_for_converter(double u_dc_kv, double u_m_kv, double t_n_ms, double l_eq_mh,
                                            double d_i_con_c_ka, double d_i_in_ka, double d_i_cab_ka);

/// Inductance keeping the breaker current below i_cb_max at t_n.
double inductor_for_breaker(double u_dc_kv, double u_m_kv, double i_cb_max_ka, double i_cb_r_ka, double t_n_ms);

bool converged(double l_mh, double l_prev_mh, double epsilon);

enum class Limiting { Converter, Breaker };
const char* to_string(Limiting l);

struct KpiSet {
    std::optional<double> converter;
    double breaker = 0.0;
    double overall = 0.0;
    Limiting limiting = Limiting::Breaker;
};

/// Normalized margins. With no converter requirement only the breaker term
/// counts. Ties go to the converter.
KpiSet kpis(std::optional<double> k_pu, double i_arm_rated_ka, double i_arm_peak_ka, double i_cb_max_ka,
            double i_cb_peak_ka, double i_cb_rated_ka);
KpiSet kpis_breaker_only(double i_cb_max_ka, double i_cb_peak_ka, double i_cb_rated_ka);

struct CriticalConverter {
    std::string id;
    double l_eq_mh = 0.0;                // L_con + cable inductance to the breaker bus
    std::vector<std::string> path;       // cables from the breaker bus to the converter
};

/// Continuous-operation converter of `zone` with the smallest inductance to
/// `near_bus`; nullopt if the zone has none.
std::optional<CriticalConverter> critical_converter(const GridModel& model, const std::string& zone,
                                                    const std::string& near_bus);

/// Setpoints (pu) maximizing the load on the critical converter and breaker.
std::map<std::string, double> critical_power_flow(const GridModel& model, const std::string& breaker,
                                                  const std::string& zone,
                                                  const std::optional<CriticalConverter>& critical);

/// Terminal fault just across `breaker` as seen from `zone`.
FaultCase critical_fault_case(const GridModel& model, const std::string& breaker, const std::string& zone,
                              const std::optional<CriticalConverter>& critical,
                              const std::map<std::string, double>& setpoints);

struct EnvelopePoint {
    double position_km = 0.0;
    double position_pct = 0.0;
    double t_arrival_ms = 0.0;
    double u_c_avg_kv = 0.0;
    double i_cb_peak_ka = 0.0;
    std::size_t arrival_index = 0;
    std::vector<double> u_c_kv;   // full U_C trace
    std::vector<double> i_cb_ka;  // full breaker current trace
};

struct VoltageEnvelope {
    std::string cable;             // faulted cable swept, empty for a bus fault
    double dt_ms = 0.0;
    std::vector<EnvelopePoint> points;
    double u_m_kv = 0.0;           // min over positions of min(U_C average, 0)
    std::optional<double> t_c_ms;  // smallest t_n on a 0.1 ms grid with U_m = 0
    int emt_runs = 0;

    /// Mean of U_C over [t_a, t_a + t_n] for one point.
    double mean_u_c(const EnvelopePoint& p, double t_n_ms) const;
    double u_m_at(double t_n_ms) const;
    /// Largest breaker current within [0, t_a + t_n].
    double peak_current(const EnvelopePoint& p, double t_n_ms) const;
    std::size_t argmax_current(double t_n_ms) const;
    /// Index of the lowest mean U_C, or 0 when no point dips below -tol.
    std::size_t critical_index(double t_n_ms, double tol_kv) const;
};

/// Sweep the fault position along the first faulted-zone cable at the far
/// terminal of the breaker with tripping disabled.
VoltageEnvelope voltage_envelope(Simulator& sim, const GridModel& model, const DesignScenario& scen,
                                 const FaultCase& base, const std::vector<double>& positions_pct = {0, 10, 25, 50, 75, 100},
                                 bool refine = true);

/// The fault case's own cable if set, else the first cable of the faulted
/// zone attached to the breaker's far terminal.
std::optional<std::string> faulted_cable(const GridModel& model, const FaultCase& fc);

}  // namespace hvdc

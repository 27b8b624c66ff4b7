// Built-in EMT simulator behind the Simulator port.
#pragma once

#include <filesystem>

#include "hvdc/emt/fault_case.hpp"
#include "hvdc/emt/network.hpp"

namespace hvdc::emt {

struct SimulatorOptions {
    EngineOptions engine;
    double settle_tolerance_pu = 1e-3;  // pre-fault drift allowed over one window
    double settle_window_ms = 5.0;
    double settle_limit_ms = 500.0;
};

class EmtSimulator : public Simulator {
public:
    explicit EmtSimulator(SimulatorOptions opts = {}) : opts_(opts) {}

    TransientResult run(const GridModel& model, const DesignScenario& scen, const FaultCase& fc) override;

    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    SimulatorOptions opts_;
    std::vector<std::string> warnings_;
};

/// Horizon used when neither the fault case nor the scenario sets one.
double automatic_horizon_ms(const GridModel& model, const DesignScenario& scen);

/// Write every trace as one CSV column (time in ms, voltages kV, currents kA).
void write_traces_csv(const TransientResult& result, const std::filesystem::path& path);

}  // namespace hvdc::emt

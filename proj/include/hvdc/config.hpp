// JSON configuration files for grid models and design scenarios.
//
// Every numeric field carries its unit in the key (`_kV`, `_kA`, `_mH`,
// `_ms`, `_km`, ...). See README.md for the full schema.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hvdc/grid_model.hpp"

namespace hvdc {

struct Config {
    GridModel model;
    std::vector<DesignScenario> scenarios;
};

/// Parse without validation. Throws ConfigError on malformed input.
Config parse_config(const nlohmann::json& doc);

/// Read, parse and validate. Throws ConfigError (parse) or
/// ValidationError (invariants).
Config load_config(const std::filesystem::path& path);
Config load_config_string(const std::string& text);

nlohmann::json to_json(const Config& cfg);
std::string serialize(const Config& cfg);

/// Stable FNV-1a hash of the serialized configuration, hex encoded.
std::string config_hash(const Config& cfg);

}  // namespace hvdc

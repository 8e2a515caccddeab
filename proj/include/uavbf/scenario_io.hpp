#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "uavbf/model.hpp"

namespace uavbf {

/// Parses the scenario schema (dB/dBm on the wire, linear in memory).
/// Throws Error(ConfigError) on malformed input; validation errors propagate.
ScenarioSpec parse_scenario_spec(const nlohmann::json& doc);
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::filesystem::path& path);

/// Inverse of parse_scenario; powers and gains are written back in dB/dBm.
nlohmann::json scenario_to_json(const Scenario& scn);

}  // namespace uavbf

#pragma once

#include <filesystem>
#include <istream>
#include <string>

#include "atmarl/emulator.hpp"

namespace atmarl::emulator {

// Scenario files are `key = value` lines. Global keys come first; each
// `[service]` header opens a new service block:
//
//   bandwidth_mbps = 10
//   distribution = uniform
//   dist_weights = 0.25, 0.25, 0.25, 0.25
//   noise_pct = 5
//   seed = 1
//
//   [service]
//   kind = CV
//   demand_mbps = 0.5
//   ue_count = 16
//   kpi_target = 4.0
//
// `#` starts a comment. dist_weights is optional and defaults to the preset
// for the named distribution; kpi_target defaults to 4.0 (QoE) or 2.0 (PL).
ScenarioConfig parse_scenario(std::istream& in);
ScenarioConfig parse_scenario_string(const std::string& text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

std::string format_scenario(const ScenarioConfig& config);

// Assigns instance ids and labels ("cv", "urllc", "urllc2", ...).
void assign_labels(std::vector<ServiceSpec>& services);

inline constexpr double kDefaultQoeTarget = 4.0;
inline constexpr double kDefaultPlTarget = 2.0;

}  // namespace atmarl::emulator

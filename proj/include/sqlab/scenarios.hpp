#pragma once

#include "sqlab/dynamics.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sqlab {

/// Parsed config file:
///
///   scenario = counterexample-2
///   seed = 42
///   [params]
///   truncation = 32
///
/// Unknown sections or top-level keys are rejected; parameter names are
/// checked by the scenario itself.
struct ScenarioConfig {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> params;
};

ScenarioConfig parse_config(std::istream& in);
ScenarioConfig load_config(const std::filesystem::path& path);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ScenarioResult {
  std::string scenario;
  std::uint64_t seed = 0;
  /// Output file stem (parameter `output`, default: scenario name).
  std::string stem;
  nlohmann::ordered_json payload;
  std::vector<CheckResult> checks;
  std::optional<Trajectory> trajectory;
  int csv_modes = 0;

  bool passed() const;
};

struct ScenarioInfo {
  std::string name;
  std::string summary;
};

const std::vector<ScenarioInfo>& scenario_catalog();

/// Runs a scenario without touching the filesystem. Throws ConfigError for
/// bad parameters (before any work is done) and DivergenceError from the
/// integrator.
ScenarioResult run_scenario(const ScenarioConfig& config);

struct OutputFiles {
  std::filesystem::path json;
  std::filesystem::path meta;
  std::optional<std::filesystem::path> csv;
};

/// Writes <stem>.json (deterministic payload), <stem>.meta.json (timestamps,
/// wall time) and, for trajectory scenarios, <stem>.csv.
OutputFiles write_outputs(const ScenarioResult& result, const std::filesystem::path& dir,
                          double wall_seconds);

/// Serialized payload exactly as written to <stem>.json.
std::string payload_text(const ScenarioResult& result);

}  // namespace sqlab

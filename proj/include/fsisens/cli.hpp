#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace fsisens::cli {

using json = nlohmann::json;

enum ExitCode : int { exit_ok = 0, exit_checks_failed = 1, exit_config = 2, exit_divergence = 3, exit_internal = 4 };

/// Invalid configuration; the message names the offending key and invariant.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct KeyInfo {
  std::string key;  // dotted path, e.g. "coupling.omega"
  json default_value;
  std::string help;
};

struct ScenarioInfo {
  std::string name;
  std::string summary;
  std::string method;                 // what the scenario computes
  std::vector<std::string> keys;      // config keys read, in registry order
  std::vector<std::string> outputs;   // artifact names
};

const std::vector<KeyInfo>& config_registry();
const std::vector<ScenarioInfo>& scenarios();
const ScenarioInfo& scenario(const std::string& name);

/// Nested JSON object with every registry key at its default value.
json default_config();
/// Merges `user` over the defaults. Unknown keys, type mismatches and values violating a
/// module precondition raise ConfigError. `seed` overrides the "seed" key when given.
json resolve_config(const json& user, std::optional<std::uint64_t> seed = std::nullopt);
json load_config_file(const std::filesystem::path& path);

std::string describe(const std::string& scenario_name);

struct RunResult {
  int exit_code = exit_ok;
  std::string message;
  json summary;
};

/// Executes one scenario and writes its artifacts into `out`. Never throws for solver or
/// configuration failures; these are mapped to exit codes and recorded in summary.json.
RunResult run(const std::string& scenario_name, const json& resolved, const std::filesystem::path& out);

struct FieldDiff {
  std::string file;
  std::string field;
  double rel_diff = 0.0;
};

struct CompareReport {
  bool pass = true;
  double tolerance = 0.0;
  std::vector<FieldDiff> diffs;
  std::vector<std::string> problems;  // structural mismatches
};

/// Per-field relative differences between two result directories of the same scenario.
CompareReport compare(const std::filesystem::path& a, const std::filesystem::path& b, double tolerance);

/// spdlog level by name (trace, debug, info, warn, err, critical, off); false if unknown.
bool set_log_level(const std::string& name);

/// Full command line entry point, returns the process exit status.
int main_entry(int argc, char** argv);

}  // namespace fsisens::cli

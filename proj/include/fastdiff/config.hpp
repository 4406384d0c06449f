#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fastdiff/effective_limit.hpp"
#include "fastdiff/experiment_harness.hpp"

namespace fastdiff {

using Json = nlohmann::ordered_json;

/// Validated configuration. `document` is the fully resolved JSON (defaults
/// filled in), which reproduces the run when fed back in.
struct Config {
  Json document;
  ExperimentPlan plan;
  AveragingPlan averaging;
  std::string output_directory = "fastdiff-out";
  std::vector<std::string> formats{"csv"};
  std::vector<std::pair<int, ModeIndex>> probes;  ///< (species, mode) columns of trajectory.csv
  std::vector<MultiIndex> constant_orders;        ///< multi-indices reported by `constants`
  bool constants_oracle = false;

  const SystemSpec& system() const { return plan.system; }
  const BoundaryNoiseSpec& noise() const { return plan.noise; }
};

/// Names accepted by preset_document.
std::vector<std::string> preset_names();

/// The built-in configuration documents: "heat-case1", "heat-case2",
/// "autocat-case1", "autocat-case2". Throws ConfigError for unknown names.
Json preset_document(const std::string& name);

/// Validates `doc` against the schema (unknown keys rejected, errors carry a
/// JSON pointer) and builds the run objects.
Config parse_config(const Json& doc);

/// Reads and parses a JSON file; syntax errors become ConfigError.
Json load_json_file(const std::string& path);

/// Sets doc[pointer] = value, creating intermediate objects.
void override_field(Json& doc, const std::string& pointer, const Json& value);

}  // namespace fastdiff

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace horolab {

struct ScenarioInfo {
  std::string name;
  std::string verifies;
};

// Stable catalog of runnable experiments, ordered by name.
std::vector<ScenarioInfo> list_scenarios();

struct ExperimentConfig {
  std::string scenario = "triple-check";
  std::string frame = "sl2";
  std::string lattice = "sl2z";
  std::string timeChange = "coboundary";  // "unit" or "coboundary"
  std::string conjugacy = "coboundary";   // "identity" or "coboundary"
  double eps = 0.05;
  double rho = 0.025;
  double eta = 0.2;
  double b = 0.02;
  double theta = 0.12;
  double m0 = 1.5;
  double kappaTilde = 16.0;
  double omega = 0.05;
  double tolerance = 1e-6;
  std::uint64_t seed = 1;
  std::string outDir;
  std::map<std::string, double> knobs;
};

struct ValidationReport {
  bool ok = false;
  std::vector<std::string> errors;  // one "field: message" entry per violation
};

// Admissibility of the constants (eps < 1/10, rho <= eps/2, b below the
// frame's coefficient-growth threshold) and of the named selectors.
ValidationReport validate_config(const ExperimentConfig& cfg);

// Structured-text round trip. Parsing collects field-level messages and
// throws a std::runtime_error joining them; unknown keys are errors.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);

struct RunResult {
  int exitCode = 2;  // 0 ok, 1 hypothesis failed, 2 invalid config
  std::string scenario;
  std::string note;
  std::string manifest;  // structured text with the constants ledger
  std::vector<std::pair<std::string, std::string>> artifacts;  // name -> CSV
};

// Executes one named scenario; deterministic per seed. When cfg.outDir is
// nonempty the manifest and artifacts are also written there.
RunResult run_scenario(const ExperimentConfig& cfg);

}  // namespace horolab

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "closedloop/curvature.hpp"
#include "closedloop/operators.hpp"
#include "closedloop/primaldual.hpp"

namespace closedloop {

struct CheckRequest {
  std::string type;
  double rate_multiplier = 1.0;
  double tolerance = 1e-6;
  bool strict = true;
  int count = 100;  // sampled checks
};

struct SolverConfig {
  double h = 0.0;
  double t0 = 0.1;
  double T = 0.0;
  double tol = 1e-10;
  std::uint64_t seed = 1;
  Vector x0;
  Vector v0;
  int max_outer = 500;
};

struct OutputConfig {
  std::string csv_path;
  std::string json_path;
};

/// Normalized, validated scenario description.
struct ScenarioConfig {
  std::string kind;  // equilibrium | flow1 | flow2 | spds | ispds | curvature | w1
  std::string name;
  nlohmann::ordered_json instance;
  SolverConfig solver;
  double omega = 0.0;  // flow2 Hessian damping
  OutputConfig outputs;
  std::vector<CheckRequest> checks;
  nlohmann::ordered_json derived;  // echoed constants (rho, h_max, ...)
};

/// Parse + validate raw JSON; fills defaults and echoes derived constants.
ScenarioConfig validate_config(const std::string& raw);
ScenarioConfig validate_config_file(const std::string& path);

/// Canonical serialization; validate_config(serialize_config(c)) == c.
std::string serialize_config(const ScenarioConfig& config);

/// Instance builders from the closed catalog of parametric families.
ClosedLoopProblem build_problem(const nlohmann::ordered_json& instance, int quad_points = 32);
SaddleInstance build_saddle(const nlohmann::ordered_json& instance, int quad_points = 32);
RandomWalkSpace build_space(const nlohmann::ordered_json& instance);

struct ScenarioResult {
  int exit_code = 0;  // 0 ok, 2 check violation, 1 error
  nlohmann::ordered_json report;
};

/// Run one scenario; writes CSV/JSON side effects per the config (paths may
/// be overridden). The report always comes back in-memory as well.
ScenarioResult run_scenario(const ScenarioConfig& config, const std::string& csv_override = "",
                            const std::string& json_override = "");

/// Batch driver: runs configs concurrently (thread cap from CLOSEDLOOP_THREADS).
int run_batch(const std::vector<std::string>& config_paths, bool quiet);

/// Strip volatile fields (timestamp, runtime_seconds) for byte comparisons.
nlohmann::ordered_json report_comparable(nlohmann::ordered_json report);

}  // namespace closedloop

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "closedloop/numerics.hpp"
#include "closedloop/vector.hpp"

namespace closedloop {

/// Time grid plus state (and optional velocity) samples from a flow integrator.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::optional<std::vector<Vector>> velocities;

  struct Meta {
    std::string solver;
    double h = 0.0;
    std::string problem_id;
    std::size_t primal_dim = 0;  // >0 marks a primal-dual trajectory split at this index
  } meta;

  std::size_t size() const { return times.size(); }
  double t0() const { return times.front(); }
  double t_end() const { return times.back(); }

  /// Scalar diagnostic series ‖x(t) − ref‖.
  TimeSeries distance_series(const Vector& ref) const;
};

struct CsvOptions {
  bool velocities = false;
  std::vector<std::pair<std::string, std::vector<double>>> extra_columns;
};

/// CSV export: header `t,x_0,...,x_{n-1}` (plus `y_*` for primal-dual splits,
/// `v_*` and extra diagnostics when enabled), 17 significant digits.
std::string trajectory_to_csv(const Trajectory& traj, const CsvOptions& options = {});
void write_trajectory_csv(const Trajectory& traj, const std::string& path,
                          const CsvOptions& options = {});

/// Verdict of an envelope check: observed(t) must stay below envelope(t).
struct BoundReport {
  bool satisfied = false;
  double max_violation = 0.0;
  TimeSeries envelope;
  TimeSeries observed;
  double fitted_rate = 0.0;
};

}  // namespace closedloop

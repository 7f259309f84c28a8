#include "closedloop/trajectory.hpp"

#include <cstdio>
#include <fstream>

#include "closedloop/errors.hpp"

namespace closedloop {

TimeSeries Trajectory::distance_series(const Vector& ref) const {
  std::vector<double> vals;
  vals.reserve(states.size());
  for (const Vector& x : states) vals.push_back(distance(x, ref));
  return TimeSeries(times, vals);
}

namespace {

void append_full_precision(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

std::string trajectory_to_csv(const Trajectory& traj, const CsvOptions& options) {
  std::string out;
  out.reserve(64 * traj.size());
  const std::size_t dim = traj.states.empty() ? 0 : traj.states.front().size();
  const std::size_t split = traj.meta.primal_dim;

  out += "t";
  for (std::size_t i = 0; i < dim; ++i) {
    if (split > 0 && i >= split) {
      out += ",y_" + std::to_string(i - split);
    } else {
      out += ",x_" + std::to_string(i);
    }
  }
  if (options.velocities && traj.velocities) {
    for (std::size_t i = 0; i < dim; ++i) out += ",v_" + std::to_string(i);
  }
  for (const auto& [name, col] : options.extra_columns) {
    if (col.size() != traj.size()) fail(ErrorCode::DimensionMismatch, "extra CSV column length");
    out += "," + name;
  }
  out += "\n";

  for (std::size_t k = 0; k < traj.size(); ++k) {
    append_full_precision(out, traj.times[k]);
    for (std::size_t i = 0; i < dim; ++i) {
      out += ',';
      append_full_precision(out, traj.states[k][i]);
    }
    if (options.velocities && traj.velocities) {
      for (std::size_t i = 0; i < dim; ++i) {
        out += ',';
        append_full_precision(out, (*traj.velocities)[k][i]);
      }
    }
    for (const auto& [name, col] : options.extra_columns) {
      out += ',';
      append_full_precision(out, col[k]);
    }
    out += '\n';
  }
  return out;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path,
                          const CsvOptions& options) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot open CSV output " + path);
  f << trajectory_to_csv(traj, options);
}

}  // namespace closedloop

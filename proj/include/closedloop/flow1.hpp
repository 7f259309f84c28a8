#pragma once

#include "closedloop/equilibrium.hpp"
#include "closedloop/trajectory.hpp"

namespace closedloop {

enum class Flow1Method {
  kAuto,          // RK4 on the single-valued field when available, else semi-implicit
  kSemiImplicit,  // backward on A, forward on B_{m_x}
  kRk4,
};

struct Flow1Options {
  Flow1Method method = Flow1Method::kAuto;
  bool frozen_measure = false;  // integrate the p-SMI split F_{m_x̄} + e_x̄ (needs x_bar)
  Vector x_bar;                 // only read when frozen_measure = true
  bool cross_check = false;     // also run the other scheme and verify O(h) agreement
};

/// Integrate the first-order closed-loop flow ẋ + A(x) + B_{m_x}(x) ∋ 0 on a
/// uniform grid over [t0, T].
Trajectory integrate_smi(const ClosedLoopProblem& problem, const Vector& x0, double t0, double T,
                         double h, const Flow1Options& options = {});

/// Convergence envelope of the trajectory toward x̄. rate_multiplier
/// parameterizes the exponent (the paper states 2, the verified envelope is 1).
BoundReport check_speed_bounds(const Trajectory& traj, const Vector& x_bar,
                               const ClosedLoopProblem& problem, double rate_multiplier,
                               double tolerance = 1e-6);

/// Series W1(m_{x(t)}, m_x̄); bounded by τ·‖x(t)−x̄‖ pointwise.
TimeSeries w1_decay_report(const Trajectory& traj, const ClosedLoopProblem& problem,
                           const Vector& x_bar);

}  // namespace closedloop

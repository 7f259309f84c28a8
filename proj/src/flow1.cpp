#include "closedloop/flow1.hpp"

#include <algorithm>
#include <cmath>

#include "closedloop/errors.hpp"

namespace closedloop {

namespace {

std::vector<double> uniform_grid(double t0, double T, double h, std::size_t* steps_out) {
  const double span = T - t0;
  const std::size_t steps = static_cast<std::size_t>(std::ceil(span / h - 1e-12));
  std::vector<double> times(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) times[k] = t0 + h * static_cast<double>(k);
  times.back() = std::min(times.back(), T);
  *steps_out = steps;
  return times;
}

Vector flow1_rhs(const ClosedLoopProblem& problem, const Flow1Options& options, const Vector& x) {
  // ẋ = −(A(x) + B_{m_x}(x)); the frozen split F_{m_x̄} + e_x̄ is algebraically
  // identical but evaluates the two pieces separately (gap-term experiments).
  if (options.frozen_measure) {
    Vector f = add(problem.a.forward(x), b_m(problem, problem.map.kernel(options.x_bar), x));
    return scale(-1.0, add(f, gap_e(problem, options.x_bar, x)));
  }
  return scale(-1.0, closed_loop_field(problem, x));
}

Trajectory run_semi_implicit(const ClosedLoopProblem& problem, const Flow1Options& options,
                             const Vector& x0, const std::vector<double>& times, double h) {
  Trajectory traj;
  traj.times = times;
  traj.states.reserve(times.size());
  traj.states.push_back(x0);
  Vector x = x0;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const Distribution m = options.frozen_measure ? problem.map.kernel(options.x_bar)
                                                  : problem.map.kernel(x);
    Vector drift = b_m(problem, m, x);
    if (options.frozen_measure) drift = add(drift, gap_e(problem, options.x_bar, x));
    x = problem.a.resolvent(h, axpy(x, -h, drift));
    require_finite(x, ErrorCode::NonFiniteField, "semi-implicit iterate non-finite");
    traj.states.push_back(x);
  }
  traj.meta.solver = "semi_implicit";
  traj.meta.h = h;
  traj.meta.problem_id = problem.id;
  return traj;
}

Trajectory run_rk4(const ClosedLoopProblem& problem, const Flow1Options& options, const Vector& x0,
                   const std::vector<double>& times, double h) {
  Trajectory traj;
  traj.times = times;
  traj.states.reserve(times.size());
  traj.states.push_back(x0);
  auto field = [&](const Vector& v) { return flow1_rhs(problem, options, v); };
  Vector x = x0;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    x = rk4_step(x, field, times[k + 1] - times[k]);
    traj.states.push_back(x);
  }
  traj.meta.solver = "rk4";
  traj.meta.h = h;
  traj.meta.problem_id = problem.id;
  return traj;
}

}  // namespace

Trajectory integrate_smi(const ClosedLoopProblem& problem, const Vector& x0, double t0, double T,
                         double h, const Flow1Options& options) {
  if (!(t0 > 0.0)) fail(ErrorCode::ConstraintError, "integrate_smi requires t0 > 0");
  if (!(T > t0)) fail(ErrorCode::ConstraintError, "integrate_smi requires T > t0");
  const double h_max = 1.0 / (2.0 * (problem.b.lipschitz_l + problem.beta_tau()));
  if (!(h > 0.0) || h > h_max) {
    fail(ErrorCode::StepTooLarge, "step must satisfy 0 < h <= 1/(2(L + beta*tau))");
  }
  if (!problem.a.in_domain(x0)) fail(ErrorCode::DomainViolation, "x0 outside closure of dom(A)");
  if (options.frozen_measure && options.x_bar.empty()) {
    fail(ErrorCode::ConstraintError, "frozen-measure integration needs x_bar");
  }

  std::size_t steps = 0;
  const std::vector<double> times = uniform_grid(t0, T, h, &steps);

  Flow1Method method = options.method;
  if (method == Flow1Method::kAuto) {
    method = problem.a.has_forward() ? Flow1Method::kRk4 : Flow1Method::kSemiImplicit;
  }
  if (method == Flow1Method::kRk4 && !problem.a.has_forward()) {
    fail(ErrorCode::ForwardUnavailable, "RK4 path needs a single-valued field");
  }

  Trajectory traj = (method == Flow1Method::kRk4)
                        ? run_rk4(problem, options, x0, times, h)
                        : run_semi_implicit(problem, options, x0, times, h);

  if (options.cross_check && problem.a.has_forward()) {
    const Trajectory other = (method == Flow1Method::kRk4)
                                 ? run_semi_implicit(problem, options, x0, times, h)
                                 : run_rk4(problem, options, x0, times, h);
    double sup = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      sup = std::max(sup, distance(traj.states[k], other.states[k]));
    }
    // First-order scheme vs RK4: agreement O(h) over the horizon.
    const double budget = 10.0 * h * (1.0 + norm(x0)) * (T - t0) *
                          (problem.b.lipschitz_l + problem.beta_tau());
    if (sup > budget) {
      fail(ErrorCode::EquilibriumMismatch, "semi-implicit and RK4 paths disagree beyond O(h)");
    }
  }
  return traj;
}

BoundReport check_speed_bounds(const Trajectory& traj, const Vector& x_bar,
                               const ClosedLoopProblem& problem, double rate_multiplier,
                               double tolerance) {
  const TimeSeries observed = traj.distance_series(x_bar);
  const double t0 = traj.t0();
  const double dist0 = observed.values.front();

  std::vector<double> env(observed.size());
  if (problem.mu > 0.0) {
    const double rate = rate_multiplier * (problem.mu - problem.beta_tau());
    for (std::size_t k = 0; k < observed.size(); ++k) {
      env[k] = dist0 * std::exp(-rate * (observed.times[k] - t0));
    }
  } else if (problem.modulus) {
    // Uniform case: envelope θ⁻¹(rm·t − t̂) with t̂ = rm·t0 − θ(‖x0−x̄‖).
    if (dist0 > problem.modulus->a_ref) {
      fail(ErrorCode::ConstraintError, "initial distance exceeds the modulus range a_ref");
    }
    const double theta0 = dist0 > 0.0 ? theta(*problem.modulus, problem.beta_tau(), dist0) : 0.0;
    const double t_hat = rate_multiplier * t0 - theta0;
    for (std::size_t k = 0; k < observed.size(); ++k) {
      if (dist0 == 0.0) {
        env[k] = 0.0;
        continue;
      }
      env[k] = theta_inv(*problem.modulus, problem.beta_tau(),
                         rate_multiplier * observed.times[k] - t_hat);
    }
  } else {
    fail(ErrorCode::ConstraintError, "check_speed_bounds needs mu or a uniform modulus");
  }

  BoundReport report;
  report.observed = observed;
  report.envelope = TimeSeries(observed.times, env);

  double max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < observed.size(); ++k) {
    max_violation = std::max(max_violation, observed.values[k] - env[k]);
  }
  report.max_violation = max_violation;
  report.satisfied = max_violation <= tolerance;

  const double floor = 1e-13 * (1.0 + norm(x_bar));
  double peak = 0.0;
  for (double v : observed.values) peak = std::max(peak, v);
  if (peak < floor) {
    report.fitted_rate = 0.0;  // started at the equilibrium; nothing to fit
    return report;
  }

  // Divergence guard: the observed distance must not grow over the final
  // quarter of the horizon.
  const double t_q = traj.t_end() - 0.25 * (traj.t_end() - t0);
  double first_q = -1.0, last_q = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    if (observed.times[k] >= t_q) {
      if (first_q < 0.0) first_q = observed.values[k];
      last_q = observed.values[k];
    }
  }
  if (first_q >= 0.0 && last_q > first_q + 1e-9 * (1.0 + first_q)) {
    fail(ErrorCode::EquilibriumMismatch, "distance to x_bar grows over the final quarter");
  }

  // Tail fit (default window: last 50%) skips the transient.
  const double t_a = t0 + 0.5 * (traj.t_end() - t0);
  TimeSeries tail({}, {});
  for (std::size_t k = 0; k < observed.size(); ++k) {
    if (observed.times[k] >= t_a && observed.values[k] > floor) {
      tail.times.push_back(observed.times[k]);
      tail.values.push_back(observed.values[k]);
    }
  }
  if (tail.size() >= 3) {
    report.fitted_rate = fit_exponential_rate(tail, tail.times.front(), tail.times.back()).rate;
  }
  return report;
}

TimeSeries w1_decay_report(const Trajectory& traj, const ClosedLoopProblem& problem,
                           const Vector& x_bar) {
  const Distribution m_bar = problem.map.kernel(x_bar);
  std::vector<double> vals;
  vals.reserve(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double v = w1(problem.map.kernel(traj.states[k]), m_bar);
    const double bound = problem.map.tau * distance(traj.states[k], x_bar);
    if (v > bound + 1e-9) {
      fail(ErrorCode::ConstraintError, "W1(m_x(t), m_xbar) exceeds tau*||x - xbar||");
    }
    vals.push_back(v);
  }
  return TimeSeries(traj.times, vals);
}

}  // namespace closedloop

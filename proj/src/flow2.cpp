#include "closedloop/flow2.hpp"

#include <algorithm>
#include <cmath>

#include "closedloop/errors.hpp"

namespace closedloop {

DampingMargins check_damping_condition(double mu, double L, double beta, double tau, double omega) {
  if (!(mu > 0.0) || !(L > 0.0) || !(beta > 0.0) || !(tau > 0.0) || omega < 0.0) {
    fail(ErrorCode::ConstraintError, "damping condition needs positive constants and omega >= 0");
  }
  DampingMargins m;
  const double sqrt_mu = std::sqrt(mu);
  const double beta_tau = beta * tau;
  m.rho = beta_tau / mu;
  m.omega_bound = std::min(1.0 / (2.0 * sqrt_mu),
                           sqrt_mu / (2.0 * std::sqrt(2.0) * (2.0 * L + beta_tau)));
  m.omega_slack = m.omega_bound - omega;
  m.condition_value = 16.0 * m.rho * m.rho + omega;
  m.condition_slack = 1.0 - m.condition_value;
  m.ok = (m.omega_slack >= 0.0) && (m.condition_slack > 0.0);
  return m;
}

namespace {

Vector instantaneous_field(const ClosedLoopProblem& problem, const Vector& x) {
  // ∇G_{m_x̄}(x) + e_x̄(x) collapses to the instantaneous closed-loop field:
  // the frozen-measure terms cancel against the gap.
  return closed_loop_field(problem, x);
}

std::vector<double> grid(double t0, double T, double h) {
  const std::size_t steps = static_cast<std::size_t>(std::ceil((T - t0) / h - 1e-12));
  std::vector<double> times(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) times[k] = t0 + h * static_cast<double>(k);
  times.back() = std::min(times.back(), T);
  return times;
}

Trajectory integrate_xy(const ClosedLoopProblem& problem, const Vector& x0, const Vector& v0,
                        const ISEHDConfig& config) {
  const double omega = config.omega;
  const double gamma = config.gamma_const();
  const double h = config.step();
  const std::size_t n = x0.size();

  // y(t0) = −ω(v0 + ω∇G(x0)) + (1 − ωγ)x0 − ω² e(x0); the two ω² terms merge
  // into the instantaneous field.
  const Vector f0 = instantaneous_field(problem, x0);
  Vector y0(n);
  for (std::size_t i = 0; i < n; ++i) {
    y0[i] = -omega * (v0[i] + omega * f0[i]) + (1.0 - omega * gamma) * x0[i];
  }

  auto rhs = [&](const Vector& state) {
    Vector x(state.begin(), state.begin() + n);
    Vector out(2 * n);
    const Vector f = instantaneous_field(problem, x);
    for (std::size_t i = 0; i < n; ++i) {
      const double y_i = state[n + i];
      out[i] = -(omega * f[i] - (1.0 / omega - gamma) * x[i] + y_i / omega);
      out[n + i] = (1.0 / omega - gamma) * x[i] - y_i / omega;
    }
    return out;
  };

  const std::vector<double> times = grid(config.t0, config.T, h);
  Trajectory traj;
  traj.times = times;
  traj.states.reserve(times.size());
  traj.velocities.emplace();
  traj.velocities->reserve(times.size());

  Vector state(2 * n);
  std::copy(x0.begin(), x0.end(), state.begin());
  std::copy(y0.begin(), y0.end(), state.begin() + n);

  auto record = [&](const Vector& s) {
    Vector x(s.begin(), s.begin() + n);
    const Vector f = instantaneous_field(problem, x);
    Vector xdot(n);
    for (std::size_t i = 0; i < n; ++i) {
      xdot[i] = (1.0 / omega - gamma) * x[i] - omega * f[i] - s[n + i] / omega;
    }
    traj.states.push_back(std::move(x));
    traj.velocities->push_back(std::move(xdot));
  };

  record(state);
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    state = rk4_step(state, rhs, times[k + 1] - times[k]);
    record(state);
  }
  traj.meta.solver = "isehd_xy_rk4";
  traj.meta.h = h;
  traj.meta.problem_id = problem.id;
  return traj;
}

Trajectory integrate_direct(const ClosedLoopProblem& problem, const Vector& x0, const Vector& v0,
                            const ISEHDConfig& config) {
  const double omega = config.omega;
  const double gamma = config.gamma_const();
  const double h = config.step();
  const std::size_t n = x0.size();
  if (omega > 0.0 && !problem.field_jacobian) {
    fail(ErrorCode::ConstraintError,
         "direct second-order integration with omega > 0 needs the field Jacobian oracle");
  }

  auto rhs = [&](const Vector& state) {
    Vector x(state.begin(), state.begin() + n);
    Vector u(state.begin() + n, state.end());
    const Vector f = instantaneous_field(problem, x);
    Vector acc(n);
    if (omega > 0.0) {
      const Vector hess_term = matvec(problem.field_jacobian(x), u);
      for (std::size_t i = 0; i < n; ++i) acc[i] = -gamma * u[i] - f[i] - omega * hess_term[i];
    } else {
      for (std::size_t i = 0; i < n; ++i) acc[i] = -gamma * u[i] - f[i];
    }
    Vector out(2 * n);
    std::copy(u.begin(), u.end(), out.begin());
    std::copy(acc.begin(), acc.end(), out.begin() + n);
    return out;
  };

  const std::vector<double> times = grid(config.t0, config.T, h);
  Trajectory traj;
  traj.times = times;
  traj.states.reserve(times.size());
  traj.velocities.emplace();
  traj.velocities->reserve(times.size());

  Vector state(2 * n);
  std::copy(x0.begin(), x0.end(), state.begin());
  std::copy(v0.begin(), v0.end(), state.begin() + n);
  auto record = [&](const Vector& s) {
    traj.states.emplace_back(s.begin(), s.begin() + n);
    traj.velocities->emplace_back(s.begin() + n, s.end());
  };
  record(state);
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    state = rk4_step(state, rhs, times[k + 1] - times[k]);
    record(state);
  }
  traj.meta.solver = "isehd_direct_rk4";
  traj.meta.h = h;
  traj.meta.problem_id = problem.id;
  return traj;
}

}  // namespace

Trajectory integrate_isehd(const ClosedLoopProblem& problem, const Vector& x0, const Vector& v0,
                           const ISEHDConfig& config, ISEHDMethod method) {
  if (!problem.a.has_forward()) {
    fail(ErrorCode::NonSmoothA, "ISEHD needs smooth A (forward field)");
  }
  if (!(config.mu > 0.0)) fail(ErrorCode::ConstraintError, "ISEHD needs mu > 0");
  if (!(config.t0 > 0.0) || !(config.T > config.t0)) {
    fail(ErrorCode::ConstraintError, "ISEHD needs T > t0 > 0");
  }
  if (x0.size() != v0.size()) fail(ErrorCode::DimensionMismatch, "x0/v0 dimension mismatch");
  const double stiffness = config.gamma_const() + problem.b.lipschitz_l + problem.beta_tau() +
                           (config.omega > 0.0 ? 2.0 / config.omega : 0.0);
  if (config.step() * stiffness > 1.0) {
    fail(ErrorCode::StepTooLarge, "h too large for the ISEHD stiffness estimate");
  }

  if (method == ISEHDMethod::kAuto) {
    method = config.omega > 0.0 ? ISEHDMethod::kXySystem : ISEHDMethod::kDirectSecondOrder;
  }
  if (method == ISEHDMethod::kXySystem) {
    if (!(config.omega > 0.0)) {
      fail(ErrorCode::ConstraintError, "the (x,y) reformulation needs omega > 0");
    }
    return integrate_xy(problem, x0, v0, config);
  }
  return integrate_direct(problem, x0, v0, config);
}

LyapunovTrace lyapunov_trace(const Trajectory& traj, const ClosedLoopProblem& problem,
                             const Vector& x_bar, const ISEHDConfig& config) {
  if (!problem.potential) fail(ErrorCode::PotentialUnavailable, "scenario supplies no potential");
  if (!traj.velocities) fail(ErrorCode::ConstraintError, "trajectory has no velocities");
  const Distribution m_bar = problem.map.kernel(x_bar);
  const double sqrt_mu = std::sqrt(config.mu);

  LyapunovTrace trace;
  trace.times = traj.times;
  trace.g_star = problem.potential(x_bar, m_bar);
  const std::size_t n = traj.size();
  trace.v_energy.resize(n);
  trace.gap.resize(n);
  trace.vnorm.resize(n);
  trace.dist_eq.resize(n);
  trace.gradnorm.resize(n);

  for (std::size_t k = 0; k < n; ++k) {
    const Vector& x = traj.states[k];
    const Vector& xdot = (*traj.velocities)[k];
    const Vector grad = add(problem.a.forward(x), b_m(problem, m_bar, x));
    Vector v(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      v[i] = sqrt_mu * (x[i] - x_bar[i]) + xdot[i] + config.omega * grad[i];
    }
    trace.gap[k] = problem.potential(x, m_bar) - trace.g_star;
    trace.vnorm[k] = norm(v);
    trace.dist_eq[k] = distance(x, x_bar);
    trace.gradnorm[k] = norm(grad);
    trace.v_energy[k] = trace.gap[k] + 0.5 * trace.vnorm[k] * trace.vnorm[k];
  }
  trace.v0 = trace.v_energy.front();
  return trace;
}

BoundReport check_lyapunov_decay(const LyapunovTrace& trace, double mu, double tolerance) {
  if (trace.times.empty()) fail(ErrorCode::ConstraintError, "empty Lyapunov trace");
  const double rate = std::sqrt(mu) / 4.0;
  const double t0 = trace.times.front();
  BoundReport report;
  std::vector<double> env(trace.times.size());
  double max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    env[k] = trace.v0 * std::exp(-rate * (trace.times[k] - t0));
    max_violation = std::max(max_violation, trace.v_energy[k] - env[k]);
    max_violation = std::max(max_violation, trace.gap[k] - env[k]);
    // Sandwich μ/2‖x−x̄‖² ≤ gap.
    max_violation =
        std::max(max_violation, 0.5 * mu * trace.dist_eq[k] * trace.dist_eq[k] - trace.gap[k] - 1e-9);
  }
  report.envelope = TimeSeries(trace.times, env);
  report.observed = TimeSeries(trace.times, trace.v_energy);
  report.max_violation = max_violation;
  report.satisfied = max_violation <= tolerance;

  double peak = 0.0;
  for (double v : trace.v_energy) peak = std::max(peak, v);
  if (peak > 1e-13) {
    const double t_a = t0 + 0.5 * (trace.times.back() - t0);
    TimeSeries tail({}, {});
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
      if (trace.times[k] >= t_a && trace.v_energy[k] > 1e-280) {
        tail.times.push_back(trace.times[k]);
        tail.values.push_back(trace.v_energy[k]);
      }
    }
    if (tail.size() >= 3) {
      report.fitted_rate = fit_exponential_rate(tail, tail.times.front(), tail.times.back()).rate;
    }
  }
  return report;
}

GradientIntegralReport gradient_integral_estimate(const Trajectory& traj,
                                                  const ClosedLoopProblem& problem,
                                                  const Vector& x_bar, double mu) {
  if (traj.size() < 2) fail(ErrorCode::ConstraintError, "trajectory too short");
  const Distribution m_bar = problem.map.kernel(x_bar);
  const double sqrt_mu = std::sqrt(mu);

  std::vector<double> g2(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Vector grad = add(problem.a.forward(traj.states[k]), b_m(problem, m_bar, traj.states[k]));
    g2[k] = dot(grad, grad);
  }

  // I(t_{k+1}) = e^{−√μ h} I(t_k) + trapezoid of e^{√μ(s − t_{k+1})} g²(s);
  // the scaled recursion avoids overflowing e^{√μ s}.
  std::vector<double> integral(traj.size(), 0.0);
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const double h = traj.times[k + 1] - traj.times[k];
    const double decay = std::exp(-sqrt_mu * h);
    integral[k + 1] = decay * integral[k] + 0.5 * h * (decay * g2[k] + g2[k + 1]);
  }

  GradientIntegralReport report;
  report.series = TimeSeries(traj.times, integral);
  double max_ratio = 0.0, head_max = 0.0, tail_max = 0.0;
  const double t_mid = 0.5 * (traj.times.front() + traj.times.back());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double ratio = integral[k] * std::exp(0.25 * sqrt_mu * traj.times[k]);
    max_ratio = std::max(max_ratio, ratio);
    if (traj.times[k] <= t_mid) {
      head_max = std::max(head_max, ratio);
    } else {
      tail_max = std::max(tail_max, ratio);
    }
  }
  report.empirical_c = max_ratio;
  // Bounded ratio: the tail must not exceed the transient's level.
  report.ratio_bounded = tail_max <= head_max * 1.05 + 1e-12;
  return report;
}

BoundReport w1_decay_report_2nd(const Trajectory& traj, const ClosedLoopProblem& problem,
                                const Vector& x_bar, double v_t0, double mu, double tolerance) {
  const Distribution m_bar = problem.map.kernel(x_bar);
  const double t0 = traj.t0();
  const double rate = std::sqrt(mu) / 8.0;
  const double amplitude = problem.map.tau * std::sqrt(2.0 * std::max(v_t0, 0.0) / mu);

  std::vector<double> vals(traj.size()), env(traj.size());
  double max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    vals[k] = w1(problem.map.kernel(traj.states[k]), m_bar);
    env[k] = amplitude * std::exp(-rate * (traj.times[k] - t0));
    max_violation = std::max(max_violation, vals[k] - env[k]);
  }
  BoundReport report;
  report.observed = TimeSeries(traj.times, vals);
  report.envelope = TimeSeries(traj.times, env);
  report.max_violation = max_violation;
  report.satisfied = max_violation <= tolerance;
  return report;
}

}  // namespace closedloop

#include "closedloop/primaldual.hpp"

#include <algorithm>
#include <cmath>

#include "closedloop/errors.hpp"

namespace closedloop {

PDState pd_add(const PDState& a, const PDState& b) { return {add(a.x, b.x), add(a.y, b.y)}; }
PDState pd_sub(const PDState& a, const PDState& b) { return {sub(a.x, b.x), sub(a.y, b.y)}; }
PDState pd_scale(double s, const PDState& a) { return {scale(s, a.x), scale(s, a.y)}; }
double pd_norm(const PDState& a) { return std::sqrt(dot(a.x, a.x) + dot(a.y, a.y)); }
double pd_distance(const PDState& a, const PDState& b) { return pd_norm(pd_sub(a, b)); }

PDState pd_from_flat(const Vector& flat, std::size_t nx) {
  return {Vector(flat.begin(), flat.begin() + nx), Vector(flat.begin() + nx, flat.end())};
}

Vector pd_to_flat(const PDState& z) {
  Vector flat;
  flat.reserve(z.x.size() + z.y.size());
  flat.insert(flat.end(), z.x.begin(), z.x.end());
  flat.insert(flat.end(), z.y.begin(), z.y.end());
  return flat;
}

Vector pd_grad_f(const SaddleInstance& inst, const Distribution& m_p, const Vector& x) {
  return expect_vector(m_p, [&](const Vector& xi) { return inst.f_field.eval(x, xi); },
                       inst.quad_points);
}

Vector pd_grad_r(const SaddleInstance& inst, const Distribution& m_d, const Vector& y) {
  return expect_vector(m_d, [&](const Vector& zeta) { return inst.r_field.eval(y, zeta); },
                       inst.quad_points);
}

PDState pd_operator_t(const SaddleInstance& inst, const Distribution& m_p, const Distribution& m_d,
                      const PDState& z) {
  if (!inst.g.has_forward() || !inst.h.has_forward()) {
    fail(ErrorCode::ForwardUnavailable, "pd_operator_t needs smooth g and h");
  }
  Vector tx = add(inst.g.forward(z.x), pd_grad_f(inst, m_p, z.x));
  tx = add(tx, matvec_transpose(inst.k, z.y));
  Vector ty = add(inst.h.forward(z.y), pd_grad_r(inst, m_d, z.y));
  ty = sub(ty, matvec(inst.k, z.x));
  return {std::move(tx), std::move(ty)};
}

namespace {

/// Forward part of T at frozen measures: L z + B_{m}(z). The A block stays
/// behind the resolvents.
PDState pd_forward_part(const SaddleInstance& inst, const Distribution& m_p,
                        const Distribution& m_d, const PDState& z) {
  Vector fx = add(pd_grad_f(inst, m_p, z.x), matvec_transpose(inst.k, z.y));
  Vector fy = sub(pd_grad_r(inst, m_d, z.y), matvec(inst.k, z.x));
  return {std::move(fx), std::move(fy)};
}

PDState pd_resolvent(const SaddleInstance& inst, double lambda, const PDState& v) {
  return {inst.g.resolvent(lambda, v.x), inst.h.resolvent(lambda, v.y)};
}

PDState pd_solve_inner(const SaddleInstance& inst, const Distribution& m_p, const Distribution& m_d,
                       const PDState& z_init, double tol, int max_iter = 200000) {
  const double l_total = inst.tilde_l() + inst.k_norm();
  const double lambda = 1.0 / (l_total + inst.tilde_mu());
  PDState u = z_init;
  for (int iter = 0; iter < max_iter; ++iter) {
    const PDState fwd = pd_forward_part(inst, m_p, m_d, u);
    const PDState next = pd_resolvent(inst, lambda, pd_add(u, pd_scale(-lambda, fwd)));
    const double residual = pd_distance(u, next) / lambda;
    if (residual <= tol || (next.x == u.x && next.y == u.y)) return next;
    u = next;
  }
  fail(ErrorCode::MaxIterExceeded, "inner primal-dual solve did not reach tolerance");
}

/// Instantaneous field T_{m_z̄}(Z) + E_{z̄}(Z) = A + L + B at the measures
/// induced by Z itself (the frozen terms cancel against the gap).
PDState spds_field(const SaddleInstance& inst, const PDState& z) {
  return pd_operator_t(inst, inst.map_p.kernel(z.x), inst.map_d.kernel(z.y), z);
}

}  // namespace

PDEquilibriumReport pd_equilibrium(const SaddleInstance& inst, const PDState& z0, double tol,
                                   int max_outer) {
  if (!(tol > 0.0)) fail(ErrorCode::ConstraintError, "pd_equilibrium requires tol > 0");
  const double rho = inst.tilde_rho();
  if (!(rho < 1.0)) fail(ErrorCode::ConstraintError, "pd_equilibrium requires tilde_rho < 1");

  PDEquilibriumReport report;
  report.rho_declared = rho;
  report.iterates.push_back(z0);

  const double step_tol = tol * (1.0 - rho) / std::max(1.0, rho);
  PDState z = z0;
  double inner_tol = tol * 0.1;
  double prev_step = -1.0;
  int expansion_streak = 0;
  for (int k = 0; k < max_outer; ++k) {
    const Distribution m_p = inst.map_p.kernel(z.x);
    const Distribution m_d = inst.map_d.kernel(z.y);
    const PDState next = pd_solve_inner(inst, m_p, m_d, z, inner_tol);
    report.iterates.push_back(next);
    report.outer_iterations = k + 1;
    const double step = pd_distance(next, z);
    if (prev_step >= 0.0 && step > prev_step) {
      if (++expansion_streak >= 10) {
        fail(ErrorCode::NoContraction, "outer primal-dual steps expanded 10 times in a row");
      }
    } else {
      expansion_streak = 0;
    }
    prev_step = step;
    z = next;
    if (step <= step_tol) break;
    if (k + 1 == max_outer) fail(ErrorCode::MaxIterExceeded, "pd_equilibrium did not converge");
    inner_tol *= rho < 1.0 ? std::max(rho, 0.05) : 0.5;
  }
  report.z_bar = z;
  for (std::size_t k = 0; k + 1 < report.iterates.size(); ++k) {
    const double denom = pd_distance(report.iterates[k], z);
    if (denom < 1e-14) continue;
    report.ratios.push_back(pd_distance(report.iterates[k + 1], z) / denom);
  }
  if (inst.g.has_forward() && inst.h.has_forward()) {
    report.residual = pd_norm(spds_field(inst, z));
  } else {
    report.residual = inner_tol;
  }
  return report;
}

Trajectory integrate_spds(const SaddleInstance& inst, const PDState& z0, double t0, double T,
                          double h) {
  if (!(t0 > 0.0) || !(T > t0)) fail(ErrorCode::ConstraintError, "integrate_spds needs T > t0 > 0");
  const double h_max = 1.0 / (2.0 * (inst.tilde_l() + inst.k_norm() + inst.tau * inst.tilde_beta()));
  if (!(h > 0.0) || h > h_max) fail(ErrorCode::StepTooLarge, "SPDS step exceeds the stability bound");

  const std::size_t steps = static_cast<std::size_t>(std::ceil((T - t0) / h - 1e-12));
  std::vector<double> times(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) times[k] = t0 + h * static_cast<double>(k);
  times.back() = std::min(times.back(), T);

  Trajectory traj;
  traj.times = times;
  traj.meta.primal_dim = z0.x.size();
  traj.meta.h = h;
  traj.meta.problem_id = inst.id;

  const bool smooth = inst.g.has_forward() && inst.h.has_forward();
  PDState z = z0;
  traj.states.push_back(pd_to_flat(z));
  if (smooth) {
    traj.meta.solver = "spds_rk4";
    const std::size_t nx = z0.x.size();
    auto rhs = [&](const Vector& flat) {
      const PDState f = spds_field(inst, pd_from_flat(flat, nx));
      return scale(-1.0, pd_to_flat(f));
    };
    Vector flat = pd_to_flat(z0);
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
      flat = rk4_step(flat, rhs, times[k + 1] - times[k]);
      traj.states.push_back(flat);
    }
  } else {
    traj.meta.solver = "spds_semi_implicit";
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
      const PDState fwd = pd_forward_part(inst, inst.map_p.kernel(z.x), inst.map_d.kernel(z.y), z);
      z = pd_resolvent(inst, h, pd_add(z, pd_scale(-h, fwd)));
      traj.states.push_back(pd_to_flat(z));
    }
  }
  return traj;
}

Trajectory integrate_ispds(const SaddleInstance& inst, const PDState& z0, const PDState& zdot0,
                           double t0, double T, double h) {
  if (!inst.g.has_forward() || !inst.h.has_forward()) {
    fail(ErrorCode::NonSmoothA, "ISPDS needs smooth g and h");
  }
  if (!(t0 > 0.0) || !(T > t0)) fail(ErrorCode::ConstraintError, "integrate_ispds needs T > t0 > 0");
  const double sqrt_mu = std::sqrt(inst.tilde_mu());
  const double stiffness =
      2.0 * sqrt_mu + inst.tilde_l() + inst.k_norm() * (1.0 + 1.0 / sqrt_mu) + inst.tau * inst.tilde_beta();
  if (!(h > 0.0) || h * stiffness > 1.0) {
    fail(ErrorCode::StepTooLarge, "ISPDS step exceeds the stiffness estimate");
  }

  const std::size_t nx = z0.x.size();
  const std::size_t ny = z0.y.size();
  const std::size_t dim = nx + ny;

  // Z̈ = −2√μ̃ Ż − [∇f_{m^p_x}(x) + ∇g(x) + Kᵀ(y + ẏ/√μ̃);
  //                ∇r_{m^d_y}(y) + ∇h(y) − K(x + ẋ/√μ̃)]
  // (frozen terms and the gap E merge into instantaneous measures).
  auto rhs = [&](const Vector& s) {
    const PDState z = pd_from_flat(Vector(s.begin(), s.begin() + dim), nx);
    const PDState zd = pd_from_flat(Vector(s.begin() + dim, s.end()), nx);
    Vector gx = add(pd_grad_f(inst, inst.map_p.kernel(z.x), z.x), inst.g.forward(z.x));
    gx = add(gx, matvec_transpose(inst.k, axpy(z.y, 1.0 / sqrt_mu, zd.y)));
    Vector gy = add(pd_grad_r(inst, inst.map_d.kernel(z.y), z.y), inst.h.forward(z.y));
    gy = sub(gy, matvec(inst.k, axpy(z.x, 1.0 / sqrt_mu, zd.x)));

    Vector out(2 * dim);
    for (std::size_t i = 0; i < nx; ++i) {
      out[i] = zd.x[i];
      out[dim + i] = -2.0 * sqrt_mu * zd.x[i] - gx[i];
    }
    for (std::size_t i = 0; i < ny; ++i) {
      out[nx + i] = zd.y[i];
      out[dim + nx + i] = -2.0 * sqrt_mu * zd.y[i] - gy[i];
    }
    return out;
  };

  const std::size_t steps = static_cast<std::size_t>(std::ceil((T - t0) / h - 1e-12));
  std::vector<double> times(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) times[k] = t0 + h * static_cast<double>(k);
  times.back() = std::min(times.back(), T);

  Trajectory traj;
  traj.times = times;
  traj.meta.primal_dim = nx;
  traj.meta.solver = "ispds_rk4";
  traj.meta.h = h;
  traj.meta.problem_id = inst.id;
  traj.velocities.emplace();

  Vector state(2 * dim);
  {
    const Vector zf = pd_to_flat(z0);
    const Vector vf = pd_to_flat(zdot0);
    std::copy(zf.begin(), zf.end(), state.begin());
    std::copy(vf.begin(), vf.end(), state.begin() + dim);
  }
  auto record = [&](const Vector& s) {
    traj.states.emplace_back(s.begin(), s.begin() + dim);
    traj.velocities->emplace_back(s.begin() + dim, s.end());
  };
  record(state);
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    state = rk4_step(state, rhs, times[k + 1] - times[k]);
    record(state);
  }
  return traj;
}

double lagrangian_value(const SaddleInstance& inst, const PDState& z_bar, const Vector& x,
                        const Vector& y) {
  if (!inst.f_value || !inst.r_value || !inst.g_value || !inst.h_value) {
    fail(ErrorCode::PotentialUnavailable, "Lagrangian needs closed-form value functions");
  }
  const Distribution m_p = inst.map_p.kernel(z_bar.x);
  const Distribution m_d = inst.map_d.kernel(z_bar.y);
  return inst.f_value(x, m_p) + inst.g_value(x) + dot(y, matvec(inst.k, x)) - inst.h_value(y) -
         inst.r_value(y, m_d);
}

double lagrangian_gap(const SaddleInstance& inst, const PDState& z, const PDState& z_bar) {
  return lagrangian_value(inst, z_bar, z.x, z_bar.y) - lagrangian_value(inst, z_bar, z_bar.x, z.y);
}

PDDecayReport check_pd_decay(const Trajectory& traj, const SaddleInstance& inst,
                             const PDState& z_bar, double tilde_mu, double tolerance) {
  PDDecayReport report;
  report.rho_tilde = inst.tilde_rho();
  report.condition_ok = report.rho_tilde < std::sqrt(2.0) / 4.0;
  if (!report.condition_ok) return report;  // check skipped, report flagged
  if (!traj.velocities) fail(ErrorCode::ConstraintError, "check_pd_decay needs velocities");

  const std::size_t nx = z_bar.x.size();
  const double sqrt_mu = std::sqrt(tilde_mu);
  const double t0 = traj.t0();

  // V(t0) = gap(Z0) + ½‖√μ̃(Z0 − z̄) + Ż0‖².
  const PDState zz0 = pd_from_flat(traj.states.front(), nx);
  const PDState zd0 = pd_from_flat((*traj.velocities).front(), nx);
  const PDState v0 = pd_add(pd_scale(sqrt_mu, pd_sub(zz0, z_bar)), zd0);
  report.v_t0 = lagrangian_gap(inst, zz0, z_bar) + 0.5 * pd_norm(v0) * pd_norm(v0);

  std::vector<double> gaps(traj.size()), env(traj.size());
  double max_env_violation = -std::numeric_limits<double>::infinity();
  double max_sandwich = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const PDState z = pd_from_flat(traj.states[k], nx);
    gaps[k] = lagrangian_gap(inst, z, z_bar);
    env[k] = report.v_t0 * std::exp(-0.25 * sqrt_mu * (traj.times[k] - t0));
    max_env_violation = std::max(max_env_violation, gaps[k] - env[k]);
    const double d = pd_distance(z, z_bar);
    max_sandwich = std::max(max_sandwich, 0.5 * tilde_mu * d * d - gaps[k]);
  }
  report.envelope.observed = TimeSeries(traj.times, gaps);
  report.envelope.envelope = TimeSeries(traj.times, env);
  report.envelope.max_violation = max_env_violation;
  report.envelope.satisfied = max_env_violation <= tolerance;
  report.sandwich_violation = max_sandwich;
  report.satisfied = report.envelope.satisfied && max_sandwich <= 1e-9;

  double peak = 0.0;
  for (double g : gaps) peak = std::max(peak, g);
  if (peak > 1e-13) {
    const double t_a = t0 + 0.5 * (traj.times.back() - t0);
    TimeSeries tail({}, {});
    for (std::size_t k = 0; k < traj.size(); ++k) {
      if (traj.times[k] >= t_a && gaps[k] > 1e-280) {
        tail.times.push_back(traj.times[k]);
        tail.values.push_back(gaps[k]);
      }
    }
    if (tail.size() >= 3) {
      report.envelope.fitted_rate =
          fit_exponential_rate(tail, tail.times.front(), tail.times.back()).rate;
    }
  }
  return report;
}

}  // namespace closedloop

#include "closedloop/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "closedloop/errors.hpp"
#include "closedloop/numerics.hpp"

namespace closedloop {

MonotoneOracle MonotoneOracle::zero() {
  MonotoneOracle a;
  a.forward = [](const Vector& x) { return Vector(x.size(), 0.0); };
  a.resolvent = [](double, const Vector& v) { return v; };
  return a;
}

MonotoneOracle MonotoneOracle::identity() {
  MonotoneOracle a;
  a.forward = [](const Vector& x) { return x; };
  a.resolvent = [](double lambda, const Vector& v) { return scale(1.0 / (1.0 + lambda), v); };
  a.mu_a = 1.0;
  return a;
}

MonotoneOracle MonotoneOracle::linear(Matrix m, double mu_a) {
  MonotoneOracle a;
  a.mu_a = mu_a;
  a.forward = [m](const Vector& x) { return matvec(m, x); };
  a.resolvent = [m](double lambda, const Vector& v) {
    Matrix sys = Matrix::identity(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
      for (std::size_t j = 0; j < m.cols; ++j) sys(i, j) += lambda * m(i, j);
    }
    return solve_dense(sys, v);
  };
  return a;
}

MonotoneOracle MonotoneOracle::nonneg_cone() {
  MonotoneOracle a;
  a.resolvent = [](double, const Vector& v) {
    Vector r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r[i] = std::max(0.0, v[i]);
    return r;
  };
  a.domain_check = [](const Vector& x) {
    return std::all_of(x.begin(), x.end(), [](double xi) { return xi >= 0.0; });
  };
  return a;
}

Vector b_m(const ClosedLoopProblem& problem, const Distribution& m, const Vector& x) {
  require_finite(x, ErrorCode::ConstraintError, "b_m requires finite x");
  return expect_vector(m, [&](const Vector& xi) { return problem.b.eval(x, xi); },
                       problem.quad_points);
}

Vector closed_loop_field(const ClosedLoopProblem& problem, const Vector& x) {
  if (!problem.a.has_forward()) {
    fail(ErrorCode::ForwardUnavailable, "A has no single-valued forward evaluation");
  }
  return add(problem.a.forward(x), b_m(problem, problem.map.kernel(x), x));
}

Vector gap_e(const ClosedLoopProblem& problem, const Vector& x_bar, const Vector& x) {
  return sub(b_m(problem, problem.map.kernel(x), x), b_m(problem, problem.map.kernel(x_bar), x));
}

double verify_gap_lipschitz(const ClosedLoopProblem& problem, const Vector& x_bar,
                            const std::vector<std::pair<Vector, Vector>>& probes) {
  if (probes.empty()) fail(ErrorCode::NoProbes, "verify_gap_lipschitz needs probes");
  double worst = 0.0;
  for (const auto& [x, z] : probes) {
    const double dxz = distance(x, z);
    if (dxz < 1e-14) fail(ErrorCode::ConstraintError, "probe pair must be distinct");
    const double de = distance(gap_e(problem, x_bar, x), gap_e(problem, x_bar, z));
    worst = std::max(worst, de / dxz);
  }
  return worst;
}

double theta(const UniformModulus& modulus, double beta_tau, double z, double quad_tol) {
  if (!(z > 0.0)) fail(ErrorCode::ConstraintError, "theta requires z > 0 (theta diverges at 0+)");
  if (z > modulus.a_ref * (1.0 + 1e-12)) {
    fail(ErrorCode::ConstraintError, "theta requires z <= a_ref");
  }
  if (z >= modulus.a_ref) return 0.0;
  auto gap = [&](double s) { return modulus.phi(s) - beta_tau * s; };
  // Pole scan: the modulus gap must stay positive on [z, a].
  const int scan = 64;
  for (int k = 0; k <= scan; ++k) {
    const double s = z + (modulus.a_ref - z) * static_cast<double>(k) / scan;
    if (s <= 0.0) continue;
    if (!(gap(s) > 0.0)) {
      fail(ErrorCode::ModulusGapViolated, "phi(s) - beta*tau*s has a nonpositive value in [z, a]");
    }
  }
  return adaptive_quad([&](double s) { return 1.0 / gap(s); }, z, modulus.a_ref, quad_tol);
}

double theta_inv(const UniformModulus& modulus, double beta_tau, double s, double tol) {
  if (s < 0.0) fail(ErrorCode::ConstraintError, "theta_inv requires s >= 0");
  if (s == 0.0) return modulus.a_ref;
  double z_lo = 0.5 * modulus.a_ref;
  while (theta(modulus, beta_tau, z_lo) <= s) {
    z_lo *= 0.5;
    if (z_lo < 1e-300) fail(ErrorCode::TargetUnreachable, "theta target exceeds divergence budget");
  }
  return invert_monotone([&](double z) { return theta(modulus, beta_tau, z); }, s, z_lo,
                         modulus.a_ref, tol);
}

}  // namespace closedloop

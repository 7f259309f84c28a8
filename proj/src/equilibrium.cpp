#include "closedloop/equilibrium.hpp"

#include <algorithm>
#include <cmath>

#include "closedloop/errors.hpp"

namespace closedloop {

Vector solve_inner(const ClosedLoopProblem& problem, const Distribution& m, const Vector& x_init,
                   double tol, const InnerSolveOptions& options) {
  if (!(tol >= 0.0)) fail(ErrorCode::ConstraintError, "solve_inner requires tol >= 0");
  const double mu_eff = problem.mu > 0.0 ? problem.mu : problem.a.mu_a;
  double lambda = options.lambda;
  if (lambda <= 0.0) lambda = 1.0 / (problem.b.lipschitz_l + std::max(mu_eff, 0.0));
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    fail(ErrorCode::ConstraintError, "inner step size must be positive");
  }

  Vector u = x_init;
  for (int iter = 0; iter < options.max_iter; ++iter) {
    const Vector step = axpy(u, -lambda, b_m(problem, m, u));
    const Vector next = problem.a.resolvent(lambda, step);
    require_finite(next, ErrorCode::NonFiniteField, "inner iterate non-finite");
    const double residual = distance(u, next) / lambda;
    if (residual <= tol || next == u) return next;
    u = next;
  }
  // One last residual check before giving up; attach the best iterate.
  const Vector next = problem.a.resolvent(lambda, axpy(u, -lambda, b_m(problem, m, u)));
  if (distance(u, next) / lambda <= tol) return next;
  fail(ErrorCode::MaxIterExceeded, "inner forward-backward solve did not reach tolerance");
}

std::vector<double> contraction_diagnostics(const std::vector<Vector>& iterates,
                                            const Vector& x_bar) {
  if (iterates.size() < 2) fail(ErrorCode::TooFewIterates, "need at least 2 iterates");
  std::vector<double> ratios;
  ratios.reserve(iterates.size() - 1);
  for (std::size_t k = 0; k + 1 < iterates.size(); ++k) {
    const double denom = distance(iterates[k], x_bar);
    if (denom < 1e-14) continue;
    ratios.push_back(distance(iterates[k + 1], x_bar) / denom);
  }
  return ratios;
}

EquilibriumReport repeated_minimization(const ClosedLoopProblem& problem, const Vector& x0,
                                        double tol, int max_outer,
                                        const InnerSolveOptions& inner) {
  if (!(tol > 0.0)) fail(ErrorCode::ConstraintError, "repeated_minimization requires tol > 0");
  const bool strongly_monotone = problem.mu > 0.0;
  const double rho = strongly_monotone ? problem.rho() : 1.0;
  if (strongly_monotone && !(rho < 1.0) && !problem.modulus) {
    fail(ErrorCode::ConstraintError,
         "rho >= 1 declared without a uniform modulus; contraction not guaranteed");
  }
  // Banach a-posteriori stop on the step size; plain step tolerance when only
  // a modulus is available (contraction factor is then instance-dependent).
  const bool banach = strongly_monotone && rho < 1.0;
  const double step_tol = banach ? tol * (1.0 - rho) / std::max(1.0, rho) : tol;
  const double tighten = banach ? rho : 0.5;

  EquilibriumReport report;
  report.rho_declared = banach ? rho : std::numeric_limits<double>::quiet_NaN();
  report.iterates.push_back(x0);

  Vector x = x0;
  double prev_step = -1.0;
  int expansion_streak = 0;
  double inner_tol_k = tol * 0.1;
  double last_inner_tol = inner_tol_k;
  for (int k = 0; k < max_outer; ++k) {
    const Distribution m = problem.map.kernel(x);
    last_inner_tol = inner_tol_k;
    const Vector next = solve_inner(problem, m, x, inner_tol_k, inner);
    report.iterates.push_back(next);
    report.outer_iterations = k + 1;
    const double step = distance(next, x);
    if (prev_step >= 0.0 && step > prev_step) {
      if (++expansion_streak >= 10) {
        fail(ErrorCode::NoContraction, "outer steps expanded for 10 consecutive iterations");
      }
    } else {
      expansion_streak = 0;
    }
    prev_step = step;
    x = next;
    if (step <= step_tol) break;
    if (k + 1 == max_outer) {
      fail(ErrorCode::MaxIterExceeded, "repeated minimization did not converge");
    }
    inner_tol_k *= tighten;
  }

  report.x_bar = x;
  if (report.iterates.size() >= 2) {
    report.ratios = contraction_diagnostics(report.iterates, report.x_bar);
  }
  if (problem.a.has_forward()) {
    report.residual = norm(closed_loop_field(problem, x));
  } else {
    report.residual = last_inner_tol;
  }
  return report;
}

}  // namespace closedloop

#pragma once

#include <optional>
#include <vector>

#include "closedloop/operators.hpp"

namespace closedloop {

struct EquilibriumReport {
  Vector x_bar;
  std::vector<Vector> iterates;
  std::vector<double> ratios;  // ‖x_{k+1}−x̄‖ / ‖x_k−x̄‖
  double rho_declared = 0.0;
  double residual = 0.0;
  int outer_iterations = 0;
};

struct InnerSolveOptions {
  double lambda = 0.0;  // 0 -> default 1/(L + mu)
  int max_iter = 200000;
};

/// Evaluate S(x) = zer(F_m) for a frozen measure by forward-backward
/// iteration u ← J_{λA}(u − λ B_m(u)).
Vector solve_inner(const ClosedLoopProblem& problem, const Distribution& m, const Vector& x_init,
                   double tol, const InnerSolveOptions& options = {});

/// Repeated minimization x_{k+1} = S(x_k) with Banach a-posteriori stopping.
EquilibriumReport repeated_minimization(const ClosedLoopProblem& problem, const Vector& x0,
                                        double tol, int max_outer = 500,
                                        const InnerSolveOptions& inner = {});

/// Observed contraction ratios toward x̄; denominators below 1e−14 skipped.
std::vector<double> contraction_diagnostics(const std::vector<Vector>& iterates,
                                            const Vector& x_bar);

}  // namespace closedloop

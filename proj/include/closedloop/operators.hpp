#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "closedloop/distribution.hpp"
#include "closedloop/vector.hpp"

namespace closedloop {

/// Maximal monotone operator A, represented primarily by its resolvent
/// J_{λA} = (Id + λA)⁻¹; forward evaluation is optional (single-valued A).
struct MonotoneOracle {
  std::function<Vector(const Vector&)> forward;                 // may be empty
  std::function<Vector(double, const Vector&)> resolvent;       // (lambda, v) -> J_{λA}(v)
  double mu_a = 0.0;                                            // strong monotonicity of A alone
  std::function<bool(const Vector&)> domain_check;              // may be empty (whole space)

  bool has_forward() const { return static_cast<bool>(forward); }
  bool in_domain(const Vector& x) const { return !domain_check || domain_check(x); }

  /// A ≡ 0 (resolvent = identity).
  static MonotoneOracle zero();
  /// A = Id.
  static MonotoneOracle identity();
  /// A(x) = Mx for positive semidefinite M; resolvent solves (I + λM)u = v.
  static MonotoneOracle linear(Matrix m, double mu_a = 0.0);
  /// Normal cone of the nonnegative orthant; resolvent is the projection.
  static MonotoneOracle nonneg_cone();
};

/// Random field B(x, ξ) with its declared constants.
struct RandomField {
  std::function<Vector(const Vector&, const Vector&)> eval;
  double beta = 0.0;         // Lipschitz constant in ξ
  double lipschitz_l = 0.0;  // Lipschitz constant of x ↦ B_m(x), any fixed m
};

/// Modulus of uniform monotonicity φ together with the integral upper limit a.
struct UniformModulus {
  std::function<double(double)> phi;
  double a_ref = 1.0;
};

/// Operator pair (A, B) with the decision map and its declared constants.
struct ClosedLoopProblem {
  MonotoneOracle a;
  RandomField b;
  DecisionMap map;
  double mu = 0.0;  // strong monotonicity of F_m (Assumption 3); 0 if only a modulus is given
  std::optional<UniformModulus> modulus;
  int quad_points = 32;

  /// Optional potential m, x ↦ G_m(x) = g(x) + E_{ξ∼m} f(x,ξ) (closed form,
  /// supplied by scenarios; needed for Lyapunov traces).
  std::function<double(const Vector&, const Distribution&)> potential;
  /// Optional Jacobian of the instantaneous field x ↦ A(x) + B_{m_x}(x)
  /// (used by the direct second-order integrator with Hessian damping).
  std::function<Matrix(const Vector&)> field_jacobian;

  std::string id;

  double beta_tau() const { return b.beta * map.tau; }
  double rho() const { return mu > 0.0 ? beta_tau() / mu : std::numeric_limits<double>::infinity(); }
};

/// B_m(x) = E_{ξ∼m} B(x, ξ).
Vector b_m(const ClosedLoopProblem& problem, const Distribution& m, const Vector& x);

/// Single-valued closed-loop field A(x) + B_{m_x}(x); requires A.forward.
Vector closed_loop_field(const ClosedLoopProblem& problem, const Vector& x);

/// Gap operator e_x̄(x) = B_{m_x}(x) − B_{m_x̄}(x).
Vector gap_e(const ClosedLoopProblem& problem, const Vector& x_bar, const Vector& x);

/// Max ratio ‖e(x)−e(z)‖/‖x−z‖ over probe pairs (bounded by 2L + βτ).
double verify_gap_lipschitz(const ClosedLoopProblem& problem, const Vector& x_bar,
                            const std::vector<std::pair<Vector, Vector>>& probes);

/// θ(z) = ∫_z^a ds / (φ(s) − βτ·s), nonincreasing with θ(a) = 0.
double theta(const UniformModulus& modulus, double beta_tau, double z, double quad_tol = 1e-11);

/// Inverse of θ: the unique z in (0, a] with θ(z) = s.
double theta_inv(const UniformModulus& modulus, double beta_tau, double s, double tol = 1e-10);

}  // namespace closedloop

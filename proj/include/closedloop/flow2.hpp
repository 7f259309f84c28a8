#pragma once

#include "closedloop/equilibrium.hpp"
#include "closedloop/trajectory.hpp"

namespace closedloop {

/// Tuning of the inertial system with viscous damping 2√μ and explicit
/// Hessian-driven damping ω.
struct ISEHDConfig {
  double omega = 0.0;
  double mu = 0.0;
  double t0 = 0.0;
  double T = 0.0;
  double h = 0.0;  // 0 -> default 1e-3 / sqrt(mu)

  double gamma_const() const { return 2.0 * std::sqrt(mu); }
  double step() const { return h > 0.0 ? h : 1e-3 / std::sqrt(mu); }
};

struct DampingMargins {
  bool ok = false;
  double omega_bound = 0.0;     // min(1/(2√μ), √μ/(2√2(2L+βτ)))
  double omega_slack = 0.0;     // omega_bound − ω
  double condition_value = 0.0; // 16ρ² + ω
  double condition_slack = 0.0; // 1 − (16ρ² + ω)
  double rho = 0.0;
};

/// Condition of the Lyapunov theorem: ω ≤ min(1/(2√μ), √μ/(2√2(2L+βτ)))
/// and 16ρ² + ω < 1 with ρ = βτ/μ.
DampingMargins check_damping_condition(double mu, double L, double beta, double tau, double omega);

enum class ISEHDMethod {
  kAuto,              // (x,y) system when ω > 0, direct second order when ω = 0
  kXySystem,          // first-order reformulation (requires ω > 0)
  kDirectSecondOrder, // (x, ẋ) state; ω > 0 needs the field Jacobian oracle
};

/// Integrate ISEHD_{2√μ,ω} by RK4. The trajectory carries x(t) and ẋ(t)
/// (reconstructed from the first equation of the reformulated system).
Trajectory integrate_isehd(const ClosedLoopProblem& problem, const Vector& x0, const Vector& v0,
                           const ISEHDConfig& config, ISEHDMethod method = ISEHDMethod::kAuto);

/// Energy V = G_{m_x̄}(x) − G* + ½‖v‖², v = √μ(x−x̄) + ẋ + ω∇G_{m_x̄}(x).
struct LyapunovTrace {
  std::vector<double> times;
  std::vector<double> v_energy;
  std::vector<double> gap;      // G_{m_x̄}(x(t)) − G*
  std::vector<double> vnorm;    // ‖v(t)‖
  std::vector<double> dist_eq;  // ‖x(t) − x̄‖
  std::vector<double> gradnorm; // ‖∇G_{m_x̄}(x(t))‖
  double v0 = 0.0;              // V(t0)
  double g_star = 0.0;
};

LyapunovTrace lyapunov_trace(const Trajectory& traj, const ClosedLoopProblem& problem,
                             const Vector& x_bar, const ISEHDConfig& config);

/// V(t) ≤ V(t0)e^{−√μ/4 (t−t0)}, the same envelope for the gap, and the
/// sandwich μ/2‖x−x̄‖² ≤ gap.
BoundReport check_lyapunov_decay(const LyapunovTrace& trace, double mu, double tolerance = 1e-6);

/// Weighted gradient integral e^{−√μ t}∫ e^{√μ s}‖∇G_{m_x̄}(x(s))‖² ds and the
/// empirical constant of its e^{−√μ/4 t} bound.
struct GradientIntegralReport {
  TimeSeries series;
  double empirical_c = 0.0;  // max over the grid of series(t)·e^{√μ/4·t}
  bool ratio_bounded = false;
};

GradientIntegralReport gradient_integral_estimate(const Trajectory& traj,
                                                  const ClosedLoopProblem& problem,
                                                  const Vector& x_bar, double mu);

/// W1(m_{x(t)}, m_x̄) with the envelope τ√(2V(t0)/μ)e^{−√μ/8 (t−t0)}.
BoundReport w1_decay_report_2nd(const Trajectory& traj, const ClosedLoopProblem& problem,
                                const Vector& x_bar, double v_t0, double mu,
                                double tolerance = 1e-9);

}  // namespace closedloop

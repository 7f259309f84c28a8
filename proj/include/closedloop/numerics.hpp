#pragma once

#include <functional>
#include <vector>

#include "closedloop/vector.hpp"

namespace closedloop {

/// Sampled scalar series on a strictly increasing time grid.
struct TimeSeries {
  std::vector<double> times;
  std::vector<double> values;

  TimeSeries() = default;
  TimeSeries(std::vector<double> t, std::vector<double> v);

  std::size_t size() const { return times.size(); }
};

/// One classical 4th-order Runge–Kutta step for an autonomous field.
Vector rk4_step(const Vector& state, const std::function<Vector(const Vector&)>& field, double h);

struct ExpFit {
  double rate = 0.0;       // decay exponent: log(value) = intercept - rate * t
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least-squares fit of log(value) = intercept − rate·t over a time window.
/// Positive rate means decay.
ExpFit fit_exponential_rate(const TimeSeries& series, double t_a, double t_b);

struct QuadOptions {
  int max_depth = 60;
  long max_evals = 4'000'000;
};

/// Adaptive Gauss–Kronrod (G7,K15) quadrature of a continuous integrand on
/// [a,b] to absolute tolerance tol.
double adaptive_quad(const std::function<double(double)>& integrand, double a, double b,
                     double tol, const QuadOptions& options = {});

/// Solve f(z) = target for strictly monotone f on [lo, hi] by bisection.
/// Returns z with |f(z) − target| ≤ tol.
double invert_monotone(const std::function<double(double)>& f, double target, double lo, double hi,
                       double tol);

// -- small shared numerics ---------------------------------------------------

/// Standard normal quantile Φ⁻¹(p), accurate to ~1e−15 (Acklam + refinement).
double norm_quantile(double p);

/// Standard normal pdf and cdf.
double norm_pdf(double z);
double norm_cdf(double z);

/// Gauss–Hermite nodes/weights (physicists' convention, sum of weights = √π).
void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace closedloop

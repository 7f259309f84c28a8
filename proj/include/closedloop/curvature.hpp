#pragma once

#include <string>
#include <vector>

#include "closedloop/vector.hpp"

namespace closedloop {

/// Finite metric random walk space [X, d, m]: N labeled points, a metric
/// matrix, and one kernel row m_x per point.
struct RandomWalkSpace {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> metric;  // N×N
  std::vector<std::vector<double>> kernel;  // N rows, each a distribution over points

  std::size_t size() const { return metric.size(); }

  /// Validates shape, metric axioms (triangle inequality exhaustively for
  /// N ≤ 50) and kernel row normalization.
  void validate() const;

  static RandomWalkSpace from_json(const std::string& text);
  std::string to_json() const;
};

/// Probability weights over the point set.
using Measure = std::vector<double>;

/// Exact W1 between two measures on the space (transportation problem under
/// the space metric).
double w1_on_space(const RandomWalkSpace& space, const Measure& nu1, const Measure& nu2);

/// Ollivier-Ricci curvature along (x,y): κ = 1 − W1(m_x, m_y)/d(x,y).
double ricci_kappa(const RandomWalkSpace& space, std::size_t x, std::size_t y);

/// Global curvature: infimum of κ over distinct pairs.
double ricci_global(const RandomWalkSpace& space);

/// Convolution (ν⋆m)_j = Σ_x ν_x m_x(j).
Measure convolve(const Measure& nu, const RandomWalkSpace& space);

/// n-step kernel from x: m_x^{*0} = δ_x, m_x^{*n} = m_x^{*(n−1)} ⋆ m.
Measure nstep(const RandomWalkSpace& space, std::size_t x, std::size_t n);

struct InvariantMeasureResult {
  Measure upsilon;
  int iterations = 0;
  bool geometric_rate_ok = true;  // only meaningful when κ > 0
};

/// Power iteration of convolve from the uniform measure until
/// W1(ν⋆m, ν) ≤ tol. When κ > 0 the geometric contraction toward υ is
/// verified along the run.
InvariantMeasureResult invariant_measure(const RandomWalkSpace& space, double tol,
                                         int max_iter = 100000);

struct ContractionCheck {
  double lhs = 0.0;  // W1(ν1⋆m, ν2⋆m)
  double rhs = 0.0;  // (1 − κ)·W1(ν1, ν2)
  bool ok = false;
};

ContractionCheck verify_contraction(const RandomWalkSpace& space, const Measure& nu1,
                                    const Measure& nu2);

struct TauKappaRecord {
  double tau_hat = 0.0;  // max over pairs of W1(m_x, m_y)/d(x,y)
  double kappa = 0.0;    // ricci_global
  bool identity_ok = false;  // κ + τ̂ = 1
  bool bounds_ok = false;    // 1 − τ̂ ≤ κ ≤ 1
};

TauKappaRecord tau_kappa_table(const RandomWalkSpace& space);

}  // namespace closedloop

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "closedloop/vector.hpp"

namespace closedloop {

using MetricFn = std::function<double(const Vector&, const Vector&)>;

/// Euclidean ground metric (|·| in one dimension).
double euclidean_metric(const Vector& a, const Vector& b);

struct Atom {
  Vector point;
  double weight;
};

struct FiniteSupport {
  std::vector<Atom> atoms;
};

struct Gaussian1D {
  double mean;
  double std;
};

struct Dirac {
  Vector point;
};

/// Probability measure on Ξ ⊂ R^m. Weights are validated on construction:
/// deviations from unit mass within 1e−9 are renormalized, larger ones are
/// rejected (serialization round-off vs malformed input).
class Distribution {
 public:
  static Distribution finite(std::vector<Atom> atoms);
  static Distribution gauss1d(double mean, double std);
  static Distribution dirac(Vector point);

  bool is_finite_support() const { return std::holds_alternative<FiniteSupport>(rep_); }
  bool is_gauss1d() const { return std::holds_alternative<Gaussian1D>(rep_); }
  bool is_dirac() const { return std::holds_alternative<Dirac>(rep_); }

  const FiniteSupport& finite_support() const { return std::get<FiniteSupport>(rep_); }
  const Gaussian1D& gauss1d_params() const { return std::get<Gaussian1D>(rep_); }
  const Dirac& dirac_point() const { return std::get<Dirac>(rep_); }

  /// Dimension of the sample space (atom/point dimension; 1 for Gaussian1D).
  std::size_t dim() const;

  /// True when the measure lives on R (every support point one-dimensional).
  bool is_one_dimensional() const;

  std::string to_json() const;
  static Distribution from_json(const std::string& text);

 private:
  std::variant<FiniteSupport, Gaussian1D, Dirac> rep_;
};

/// Decision-dependent distribution family x ↦ m_x with declared W1 sensitivity.
struct DecisionMap {
  std::function<Distribution(const Vector&)> kernel;
  double tau = 0.0;
};

/// Exact W1-Wasserstein distance. Finite-support pairs solve the
/// transportation problem under the ground metric; 1D continuous cases use the
/// quantile-integral representation; equal-variance Gaussians reduce to the
/// mean shift.
double w1(const Distribution& p, const Distribution& q, const MetricFn& metric);
double w1(const Distribution& p, const Distribution& q);

/// Empirical sensitivity: max over probe pairs of W1(m_x, m_y)/‖x−y‖.
double estimate_tau(const DecisionMap& map, const std::vector<std::pair<Vector, Vector>>& probes,
                    const MetricFn& metric = euclidean_metric);

/// E_{ξ∼p} h(ξ). Exact sums for finite support; Gauss–Hermite quadrature for
/// Gaussian1D (exact for polynomial h of degree ≤ 2·quad_points − 1).
Vector expect_vector(const Distribution& p, const std::function<Vector(const Vector&)>& h,
                     int quad_points = 32);

/// Seeded Monte Carlo fallback for expectations (deterministic given a seed).
Vector expect_vector_mc(const Distribution& p, const std::function<Vector(const Vector&)>& h,
                        std::size_t samples, std::uint64_t seed);

}  // namespace closedloop

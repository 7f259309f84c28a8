#include "closedloop/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "closedloop/errors.hpp"
#include "closedloop/numerics.hpp"
#include "closedloop/transport.hpp"

namespace closedloop {

using json = nlohmann::json;

double euclidean_metric(const Vector& a, const Vector& b) { return distance(a, b); }

Distribution Distribution::finite(std::vector<Atom> atoms) {
  if (atoms.empty()) fail(ErrorCode::ConstraintError, "finite-support distribution needs atoms");
  double total = 0.0;
  std::size_t d = atoms.front().point.size();
  for (const Atom& a : atoms) {
    if (a.weight < -1e-12) fail(ErrorCode::ConstraintError, "atom weight must be nonnegative");
    if (a.point.size() != d) fail(ErrorCode::DimensionMismatch, "atoms live in different dimensions");
    require_finite(a.point, ErrorCode::ConstraintError, "atom point is non-finite");
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) fail(ErrorCode::ConstraintError, "atom weights do not sum to 1");
  if (std::abs(total - 1.0) > 1e-12) {
    for (Atom& a : atoms) a.weight /= total;
  }
  Distribution p;
  p.rep_ = FiniteSupport{std::move(atoms)};
  return p;
}

Distribution Distribution::gauss1d(double mean, double std) {
  if (!(std > 0.0)) fail(ErrorCode::ConstraintError, "gauss1d requires std > 0");
  if (!is_finite(mean) || !is_finite(std)) fail(ErrorCode::ConstraintError, "gauss1d parameters non-finite");
  Distribution p;
  p.rep_ = Gaussian1D{mean, std};
  return p;
}

Distribution Distribution::dirac(Vector point) {
  require_finite(point, ErrorCode::ConstraintError, "dirac point is non-finite");
  if (point.empty()) fail(ErrorCode::ConstraintError, "dirac point must have dimension >= 1");
  Distribution p;
  p.rep_ = Dirac{std::move(point)};
  return p;
}

std::size_t Distribution::dim() const {
  if (is_gauss1d()) return 1;
  if (is_dirac()) return dirac_point().point.size();
  return finite_support().atoms.front().point.size();
}

bool Distribution::is_one_dimensional() const { return dim() == 1; }

std::string Distribution::to_json() const {
  json j;
  if (is_finite_support()) {
    j["type"] = "finite";
    json atoms = json::array();
    for (const Atom& a : finite_support().atoms) {
      atoms.push_back(json::array({json(a.point), a.weight}));
    }
    j["atoms"] = atoms;
  } else if (is_gauss1d()) {
    j["type"] = "gauss1d";
    j["mean"] = gauss1d_params().mean;
    j["std"] = gauss1d_params().std;
  } else {
    j["type"] = "dirac";
    j["point"] = dirac_point().point;
  }
  return j.dump();
}

Distribution Distribution::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaError, std::string("distribution JSON: ") + e.what());
  }
  if (!j.contains("type")) fail(ErrorCode::SchemaError, "distribution JSON missing \"type\"");
  const std::string type = j.at("type").get<std::string>();
  if (type == "finite") {
    std::vector<Atom> atoms;
    for (const auto& entry : j.at("atoms")) {
      if (!entry.is_array() || entry.size() != 2) {
        fail(ErrorCode::SchemaError, "finite atom must be [[point...], weight]");
      }
      atoms.push_back({entry[0].get<Vector>(), entry[1].get<double>()});
    }
    return finite(std::move(atoms));
  }
  if (type == "gauss1d") {
    return gauss1d(j.at("mean").get<double>(), j.at("std").get<double>());
  }
  if (type == "dirac") {
    return dirac(j.at("point").get<Vector>());
  }
  fail(ErrorCode::SchemaError, "unknown distribution type \"" + type + "\"");
}

namespace {

FiniteSupport as_finite(const Distribution& p) {
  if (p.is_finite_support()) return p.finite_support();
  if (p.is_dirac()) return FiniteSupport{{Atom{p.dirac_point().point, 1.0}}};
  fail(ErrorCode::IncompatibleVariants, "expected an atomic distribution");
}

double w1_finite_pair(const FiniteSupport& p, const FiniteSupport& q, const MetricFn& metric) {
  const Vector& probe = p.atoms.front().point;
  if (std::abs(metric(probe, probe)) > 1e-12) {
    fail(ErrorCode::DegenerateMetric, "metric(x,x) must be 0");
  }
  std::vector<double> supply, demand;
  supply.reserve(p.atoms.size());
  demand.reserve(q.atoms.size());
  for (const Atom& a : p.atoms) supply.push_back(a.weight);
  for (const Atom& a : q.atoms) demand.push_back(a.weight);
  return transport_cost(supply, demand, [&](std::size_t i, std::size_t j) {
    return metric(p.atoms[i].point, q.atoms[j].point);
  });
}

/// Exact 1D optimal transport between atomic measures under |·|:
/// ∫ |F_p(x) − F_q(x)| dx over the sorted union of support points.
double w1_finite_1d(const FiniteSupport& p, const FiniteSupport& q) {
  struct Entry {
    double x;
    double wp;
    double wq;
  };
  std::vector<Entry> entries;
  entries.reserve(p.atoms.size() + q.atoms.size());
  for (const Atom& a : p.atoms) entries.push_back({a.point[0], a.weight, 0.0});
  for (const Atom& a : q.atoms) entries.push_back({a.point[0], 0.0, a.weight});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.x < b.x; });
  double fp = 0.0, fq = 0.0, acc = 0.0;
  for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
    fp += entries[i].wp;
    fq += entries[i].wq;
    acc += std::abs(fp - fq) * (entries[i + 1].x - entries[i].x);
  }
  return acc;
}

/// ∫_{ua}^{ub} |A + B·Φ⁻¹(u)| du by the antiderivative ∫Φ⁻¹ = −φ∘Φ⁻¹,
/// splitting at the sign crossing. φ(Φ⁻¹(u)) → 0 at u ∈ {0,1}.
double abs_affine_quantile_integral(double A, double B, double ua, double ub) {
  auto pdf_at = [](double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return norm_pdf(norm_quantile(u));
  };
  auto piece = [&](double a, double b) {
    // ∫_a^b (A + B z(u)) du, signed
    return A * (b - a) + B * (pdf_at(a) - pdf_at(b));
  };
  if (ub <= ua) return 0.0;
  if (B == 0.0) return std::abs(A) * (ub - ua);
  const double ustar = norm_cdf(-A / B);
  if (ustar <= ua || ustar >= ub) return std::abs(piece(ua, ub));
  return std::abs(piece(ua, ustar)) + std::abs(piece(ustar, ub));
}

/// W1 between a 1D Gaussian and an atomic 1D measure via the quantile
/// representation; exact piecewise integration between CDF breakpoints.
double w1_gauss_vs_finite(const Gaussian1D& g, const FiniteSupport& q) {
  std::vector<Atom> atoms = q.atoms;
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.point[0] < b.point[0]; });
  double acc = 0.0;
  double u_lo = 0.0;
  for (const Atom& a : atoms) {
    const double u_hi = std::min(1.0, u_lo + a.weight);
    // On [u_lo, u_hi] the atomic quantile is the constant a.point[0].
    acc += abs_affine_quantile_integral(g.mean - a.point[0], g.std, u_lo, u_hi);
    u_lo = u_hi;
  }
  return acc;
}

double w1_gauss_pair(const Gaussian1D& p, const Gaussian1D& q) {
  if (p.std == q.std) return std::abs(p.mean - q.mean);
  return abs_affine_quantile_integral(p.mean - q.mean, p.std - q.std, 0.0, 1.0);
}

}  // namespace

double w1(const Distribution& p, const Distribution& q, const MetricFn& metric) {
  if (!p.is_gauss1d() && !q.is_gauss1d()) {
    return w1_finite_pair(as_finite(p), as_finite(q), metric);
  }
  fail(ErrorCode::IncompatibleVariants,
       "custom ground metrics apply to atomic distributions only; Gaussian1D comparisons use |.|");
}

double w1(const Distribution& p, const Distribution& q) {
  if (p.is_gauss1d() || q.is_gauss1d()) {
    if (!(p.is_one_dimensional() && q.is_one_dimensional())) {
      fail(ErrorCode::IncompatibleVariants, "Gaussian1D is only comparable with 1D distributions");
    }
    if (p.is_gauss1d() && q.is_gauss1d()) return w1_gauss_pair(p.gauss1d_params(), q.gauss1d_params());
    if (p.is_gauss1d()) return w1_gauss_vs_finite(p.gauss1d_params(), as_finite(q));
    return w1_gauss_vs_finite(q.gauss1d_params(), as_finite(p));
  }
  const FiniteSupport fp = as_finite(p);
  const FiniteSupport fq = as_finite(q);
  if (fp.atoms.front().point.size() != fq.atoms.front().point.size()) {
    fail(ErrorCode::IncompatibleVariants, "distributions live in different dimensions");
  }
  if (p.is_one_dimensional() && q.is_one_dimensional()) return w1_finite_1d(fp, fq);
  return w1_finite_pair(fp, fq, euclidean_metric);
}

double estimate_tau(const DecisionMap& map, const std::vector<std::pair<Vector, Vector>>& probes,
                    const MetricFn& metric) {
  if (probes.empty()) fail(ErrorCode::NoProbes, "estimate_tau needs at least one probe pair");
  double worst = 0.0;
  for (const auto& [x, y] : probes) {
    const double dxy = distance(x, y);
    if (dxy < 1e-14) fail(ErrorCode::ConstraintError, "probe pair must be distinct");
    const Distribution mx = map.kernel(x);
    const Distribution my = map.kernel(y);
    const double d_w1 = (mx.is_gauss1d() || my.is_gauss1d()) ? w1(mx, my) : w1(mx, my, metric);
    worst = std::max(worst, d_w1 / dxy);
  }
  return worst;
}

Vector expect_vector(const Distribution& p, const std::function<Vector(const Vector&)>& h,
                     int quad_points) {
  if (quad_points < 1) fail(ErrorCode::ConstraintError, "quad_points must be >= 1");
  auto eval = [&](const Vector& xi) {
    Vector v = h(xi);
    require_finite(v, ErrorCode::NonFiniteIntegrand, "integrand non-finite on support");
    return v;
  };
  if (p.is_dirac()) return eval(p.dirac_point().point);
  if (p.is_finite_support()) {
    const auto& atoms = p.finite_support().atoms;
    Vector acc;
    for (const Atom& a : atoms) {
      Vector v = eval(a.point);
      if (acc.empty()) acc.assign(v.size(), 0.0);
      if (v.size() != acc.size()) fail(ErrorCode::DimensionMismatch, "integrand changes dimension");
      for (std::size_t i = 0; i < v.size(); ++i) acc[i] += a.weight * v[i];
    }
    return acc;
  }
  const Gaussian1D g = p.gauss1d_params();
  std::vector<double> nodes, weights;
  gauss_hermite(quad_points, nodes, weights);
  const double inv_sqrt_pi = 0.564189583547756286948079;
  const double scale = std::sqrt(2.0) * g.std;
  Vector acc;
  for (int k = 0; k < quad_points; ++k) {
    Vector v = eval({g.mean + scale * nodes[k]});
    if (acc.empty()) acc.assign(v.size(), 0.0);
    if (v.size() != acc.size()) fail(ErrorCode::DimensionMismatch, "integrand changes dimension");
    const double w = weights[k] * inv_sqrt_pi;
    for (std::size_t i = 0; i < v.size(); ++i) acc[i] += w * v[i];
  }
  return acc;
}

Vector expect_vector_mc(const Distribution& p, const std::function<Vector(const Vector&)>& h,
                        std::size_t samples, std::uint64_t seed) {
  if (samples == 0) fail(ErrorCode::ConstraintError, "expect_vector_mc needs samples > 0");
  std::mt19937_64 rng(seed);
  auto next_uniform = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  };
  auto draw = [&]() -> Vector {
    if (p.is_dirac()) return p.dirac_point().point;
    if (p.is_gauss1d()) {
      const Gaussian1D g = p.gauss1d_params();
      return {g.mean + g.std * norm_quantile(next_uniform())};
    }
    const auto& atoms = p.finite_support().atoms;
    double u = next_uniform();
    for (const Atom& a : atoms) {
      if (u <= a.weight) return a.point;
      u -= a.weight;
    }
    return atoms.back().point;
  };
  Vector acc;
  for (std::size_t s = 0; s < samples; ++s) {
    Vector v = h(draw());
    require_finite(v, ErrorCode::NonFiniteIntegrand, "integrand non-finite at sample");
    if (acc.empty()) acc.assign(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) acc[i] += v[i];
  }
  for (double& x : acc) x /= static_cast<double>(samples);
  return acc;
}

}  // namespace closedloop

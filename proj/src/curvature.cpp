#include "closedloop/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "closedloop/errors.hpp"
#include "closedloop/transport.hpp"

namespace closedloop {

using json = nlohmann::json;

namespace {

void normalize_row(std::vector<double>& row, const char* what) {
  double total = 0.0;
  for (double w : row) {
    if (w < -1e-12) fail(ErrorCode::ConstraintError, std::string(what) + ": negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    fail(ErrorCode::ConstraintError, std::string(what) + ": weights do not sum to 1");
  }
  if (std::abs(total - 1.0) > 1e-12) {
    for (double& w : row) w /= total;
  }
}

}  // namespace

void RandomWalkSpace::validate() const {
  const std::size_t n = size();
  if (n < 2) fail(ErrorCode::ConstraintError, "random walk space needs N >= 2");
  if (kernel.size() != n) fail(ErrorCode::DimensionMismatch, "kernel row count != N");
  if (!labels.empty() && labels.size() != n) fail(ErrorCode::DimensionMismatch, "label count != N");
  for (std::size_t i = 0; i < n; ++i) {
    if (metric[i].size() != n) fail(ErrorCode::DimensionMismatch, "metric row length != N");
    if (kernel[i].size() != n) fail(ErrorCode::DimensionMismatch, "kernel row length != N");
    if (std::abs(metric[i][i]) > 1e-12) fail(ErrorCode::ConstraintError, "metric diagonal must be 0");
    for (std::size_t j = 0; j < n; ++j) {
      if (metric[i][j] < 0.0) fail(ErrorCode::ConstraintError, "metric must be nonnegative");
      if (std::abs(metric[i][j] - metric[j][i]) > 1e-12) {
        fail(ErrorCode::ConstraintError, "metric must be symmetric");
      }
    }
    double sum = 0.0;
    for (double w : kernel[i]) {
      if (w < -1e-12) fail(ErrorCode::ConstraintError, "kernel weights must be nonnegative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail(ErrorCode::ConstraintError, "kernel row must sum to 1");
  }
  if (n <= 50) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
          if (metric[i][j] > metric[i][k] + metric[k][j] + 1e-9) {
            fail(ErrorCode::ConstraintError, "metric violates the triangle inequality");
          }
        }
      }
    }
  }
}

RandomWalkSpace RandomWalkSpace::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaError, std::string("space JSON: ") + e.what());
  }
  RandomWalkSpace space;
  if (j.contains("edges")) {
    // Graph shorthand: shortest-path metric, lazy walk over neighbors.
    std::size_t n = 0;
    struct Edge {
      std::size_t i, jx;
      double w;
    };
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 3) fail(ErrorCode::SchemaError, "edge must be [i, j, w]");
      const auto i = e[0].get<std::size_t>();
      const auto jx = e[1].get<std::size_t>();
      const auto w = e[2].get<double>();
      if (!(w > 0.0)) fail(ErrorCode::SchemaError, "edge weight must be > 0");
      edges.push_back({i, jx, w});
      n = std::max(n, std::max(i, jx) + 1);
    }
    if (j.contains("n")) n = std::max(n, j.at("n").get<std::size_t>());
    if (n < 2) fail(ErrorCode::SchemaError, "graph needs at least 2 nodes");
    const double inf = std::numeric_limits<double>::infinity();
    space.metric.assign(n, std::vector<double>(n, inf));
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i) space.metric[i][i] = 0.0;
    for (const Edge& e : edges) {
      space.metric[e.i][e.jx] = std::min(space.metric[e.i][e.jx], e.w);
      space.metric[e.jx][e.i] = space.metric[e.i][e.jx];
      nbrs[e.i].push_back(e.jx);
      nbrs[e.jx].push_back(e.i);
    }
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t jx = 0; jx < n; ++jx) {
          space.metric[i][jx] = std::min(space.metric[i][jx], space.metric[i][k] + space.metric[k][jx]);
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t jx = 0; jx < n; ++jx) {
        if (!std::isfinite(space.metric[i][jx])) fail(ErrorCode::SchemaError, "graph is disconnected");
      }
    }
    const std::string walk = j.value("walk", std::string("lazy"));
    if (walk != "lazy") fail(ErrorCode::SchemaError, "unknown walk type \"" + walk + "\"");
    const double alpha = j.value("alpha", 0.5);
    if (alpha < 0.0 || alpha > 1.0) fail(ErrorCode::SchemaError, "alpha must be in [0,1]");
    space.kernel.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      // Dedup neighbor lists from parallel edges.
      std::sort(nbrs[i].begin(), nbrs[i].end());
      nbrs[i].erase(std::unique(nbrs[i].begin(), nbrs[i].end()), nbrs[i].end());
      if (nbrs[i].empty()) fail(ErrorCode::SchemaError, "isolated node in graph");
      space.kernel[i][i] = alpha;
      for (std::size_t v : nbrs[i]) space.kernel[i][v] += (1.0 - alpha) / nbrs[i].size();
    }
  } else {
    if (!j.contains("metric") || !j.contains("kernel")) {
      fail(ErrorCode::SchemaError, "space JSON needs either edges or metric+kernel");
    }
    space.metric = j.at("metric").get<std::vector<std::vector<double>>>();
    space.kernel = j.at("kernel").get<std::vector<std::vector<double>>>();
    if (j.contains("points")) {
      for (const auto& p : j.at("points")) {
        space.labels.push_back(p.is_string() ? p.get<std::string>() : p.dump());
      }
    }
  }
  for (auto& row : space.kernel) normalize_row(row, "kernel row");
  space.validate();
  return space;
}

std::string RandomWalkSpace::to_json() const {
  json j;
  if (!labels.empty()) j["points"] = labels;
  j["metric"] = metric;
  j["kernel"] = kernel;
  return j.dump();
}

double w1_on_space(const RandomWalkSpace& space, const Measure& nu1, const Measure& nu2) {
  if (nu1.size() != space.size() || nu2.size() != space.size()) {
    fail(ErrorCode::DimensionMismatch, "measure size != space size");
  }
  return transport_cost(nu1, nu2,
                        [&](std::size_t i, std::size_t j) { return space.metric[i][j]; });
}

double ricci_kappa(const RandomWalkSpace& space, std::size_t x, std::size_t y) {
  if (x == y) fail(ErrorCode::SamePoint, "ORC needs two distinct points");
  if (x >= space.size() || y >= space.size()) fail(ErrorCode::DimensionMismatch, "point index out of range");
  const double d = space.metric[x][y];
  if (!(d > 0.0)) fail(ErrorCode::ConstraintError, "distinct points at distance 0");
  return 1.0 - w1_on_space(space, space.kernel[x], space.kernel[y]) / d;
}

double ricci_global(const RandomWalkSpace& space) {
  double kappa = std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < space.size(); ++x) {
    for (std::size_t y = x + 1; y < space.size(); ++y) {
      kappa = std::min(kappa, ricci_kappa(space, x, y));
    }
  }
  return kappa;
}

Measure convolve(const Measure& nu, const RandomWalkSpace& space) {
  if (nu.size() != space.size()) fail(ErrorCode::DimensionMismatch, "measure size != space size");
  Measure out(space.size(), 0.0);
  for (std::size_t x = 0; x < space.size(); ++x) {
    if (nu[x] == 0.0) continue;
    for (std::size_t j = 0; j < space.size(); ++j) out[j] += nu[x] * space.kernel[x][j];
  }
  return out;
}

Measure nstep(const RandomWalkSpace& space, std::size_t x, std::size_t n) {
  if (x >= space.size()) fail(ErrorCode::DimensionMismatch, "point index out of range");
  Measure m(space.size(), 0.0);
  m[x] = 1.0;
  for (std::size_t k = 0; k < n; ++k) m = convolve(m, space);
  return m;
}

InvariantMeasureResult invariant_measure(const RandomWalkSpace& space, double tol, int max_iter) {
  if (!(tol > 0.0)) fail(ErrorCode::ConstraintError, "invariant_measure requires tol > 0");
  InvariantMeasureResult result;
  Measure nu(space.size(), 1.0 / static_cast<double>(space.size()));
  std::vector<Measure> history;
  history.push_back(nu);
  for (int iter = 1; iter <= max_iter; ++iter) {
    Measure next = convolve(nu, space);
    const double residual = w1_on_space(space, next, nu);
    nu = std::move(next);
    if (history.size() < 200) history.push_back(nu);
    if (residual <= tol) {
      result.upsilon = nu;
      result.iterations = iter;
      const double kappa = ricci_global(space);
      if (kappa > 0.0) {
        // cor. of positive curvature: W1(ν⋆m^{*n}, υ) ≤ (1−κ)^n W1(ν, υ).
        const double w0 = w1_on_space(space, history.front(), nu);
        double bound = w0;
        for (std::size_t n_step = 1; n_step < history.size(); ++n_step) {
          bound *= (1.0 - kappa);
          if (w1_on_space(space, history[n_step], nu) > bound + 1e-9) {
            result.geometric_rate_ok = false;
            break;
          }
        }
      }
      return result;
    }
  }
  fail(ErrorCode::NoConvergence, "power iteration exhausted its budget (kappa <= 0?)");
}

ContractionCheck verify_contraction(const RandomWalkSpace& space, const Measure& nu1,
                                    const Measure& nu2) {
  if (nu1.size() != nu2.size()) fail(ErrorCode::DimensionMismatch, "measure sizes differ");
  bool equal = true;
  for (std::size_t i = 0; i < nu1.size(); ++i) {
    if (std::abs(nu1[i] - nu2[i]) > 1e-15) {
      equal = false;
      break;
    }
  }
  if (equal) fail(ErrorCode::EqualMeasures, "contraction check needs distinct measures");
  ContractionCheck check;
  check.lhs = w1_on_space(space, convolve(nu1, space), convolve(nu2, space));
  check.rhs = (1.0 - ricci_global(space)) * w1_on_space(space, nu1, nu2);
  check.ok = check.lhs <= check.rhs + 1e-9;
  return check;
}

TauKappaRecord tau_kappa_table(const RandomWalkSpace& space) {
  TauKappaRecord record;
  double tau_hat = 0.0;
  for (std::size_t x = 0; x < space.size(); ++x) {
    for (std::size_t y = x + 1; y < space.size(); ++y) {
      const double d = space.metric[x][y];
      if (!(d > 0.0)) fail(ErrorCode::ConstraintError, "distinct points at distance 0");
      tau_hat = std::max(tau_hat, w1_on_space(space, space.kernel[x], space.kernel[y]) / d);
    }
  }
  record.tau_hat = tau_hat;
  record.kappa = ricci_global(space);
  record.identity_ok = std::abs(record.kappa + record.tau_hat - 1.0) <= 1e-12;
  record.bounds_ok = (1.0 - record.tau_hat <= record.kappa + 1e-12) && (record.kappa <= 1.0 + 1e-12);
  return record;
}

}  // namespace closedloop

#include <cmath>

#include <doctest.h>

#include "closedloop/distribution.hpp"
#include "closedloop/errors.hpp"
#include "closedloop/numerics.hpp"
#include "support/reference.hpp"

using namespace closedloop;

namespace {

Distribution finite1d(std::vector<std::pair<double, double>> atoms) {
  std::vector<Atom> out;
  for (auto [x, w] : atoms) out.push_back({{x}, w});
  return Distribution::finite(std::move(out));
}

}  // namespace

TEST_CASE("w1 between diracs is the ground distance") {
  CHECK(w1(Distribution::dirac({0.0}), Distribution::dirac({1.0})) == doctest::Approx(1.0));
  CHECK(w1(Distribution::dirac({0.0, 0.0}), Distribution::dirac({3.0, 4.0})) ==
        doctest::Approx(5.0));
}

TEST_CASE("w1 of a distribution with itself is zero") {
  const Distribution p = finite1d({{0.0, 0.25}, {1.0, 0.5}, {2.5, 0.25}});
  CHECK(w1(p, p) == doctest::Approx(0.0).epsilon(0.0));
  CHECK(w1(Distribution::gauss1d(1.0, 2.0), Distribution::gauss1d(1.0, 2.0)) == doctest::Approx(0.0));
}

TEST_CASE("w1 between same-variance gaussians is the mean shift") {
  CHECK(w1(Distribution::gauss1d(0.0, 1.0), Distribution::gauss1d(3.0, 1.0)) == doctest::Approx(3.0));
}

TEST_CASE("w1 between different-variance gaussians matches the folded normal formula") {
  const double m1 = 0.3, s1 = 1.0, m2 = -0.4, s2 = 2.5;
  const double a = m1 - m2, b = std::abs(s1 - s2);
  // E|a + bZ| for Z ~ N(0,1)
  const double expected =
      b * std::sqrt(2.0 / M_PI) * std::exp(-a * a / (2.0 * b * b)) + a * std::erf(a / (b * std::sqrt(2.0)));
  CHECK(w1(Distribution::gauss1d(m1, s1), Distribution::gauss1d(m2, s2)) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("half-half measure to its midpoint dirac costs half") {
  const Distribution p = finite1d({{0.0, 0.5}, {1.0, 0.5}});
  CHECK(w1(p, Distribution::dirac({0.5})) == doctest::Approx(0.5));
}

TEST_CASE("w1 matches brute-force enumeration of transportation vertices") {
  testsupport::Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    // Ground set of up to 4 points in the plane.
    std::vector<Vector> points;
    const std::size_t n_points = 2 + rng.index(3);
    for (std::size_t i = 0; i < n_points; ++i) {
      points.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2)});
    }
    auto random_measure = [&]() {
      const std::size_t n_atoms = 1 + rng.index(std::min<std::size_t>(3, n_points));
      std::vector<Atom> atoms;
      double total = 0.0;
      for (std::size_t a = 0; a < n_atoms; ++a) {
        const double w = rng.uniform(0.05, 1.0);
        atoms.push_back({points[rng.index(n_points)], w});
        total += w;
      }
      for (Atom& a : atoms) a.weight /= total;
      return Distribution::finite(atoms);
    };
    const Distribution p = random_measure();
    const Distribution q = random_measure();

    const auto& pa = p.finite_support().atoms;
    const auto& qa = q.finite_support().atoms;
    std::vector<double> supply, demand;
    for (const Atom& a : pa) supply.push_back(a.weight);
    for (const Atom& a : qa) demand.push_back(a.weight);
    const double oracle = testsupport::brute_force_transport(
        supply, demand,
        [&](std::size_t i, std::size_t j) { return distance(pa[i].point, qa[j].point); });

    CHECK(std::abs(w1(p, q) - oracle) <= 1e-9);
  }
}

TEST_CASE("w1 satisfies the metric axioms on random finite triples") {
  testsupport::Rng rng(5);
  std::vector<Vector> points = {{0.0, 0.0}, {1.0, 0.3}, {-0.5, 0.8}, {0.2, -1.1}};
  auto random_measure = [&]() {
    const std::size_t n_atoms = 1 + rng.index(4);
    std::vector<Atom> atoms;
    double total = 0.0;
    for (std::size_t a = 0; a < n_atoms; ++a) {
      const double w = rng.uniform(0.1, 1.0);
      atoms.push_back({points[rng.index(points.size())], w});
      total += w;
    }
    for (Atom& a : atoms) a.weight /= total;
    return Distribution::finite(atoms);
  };
  for (int trial = 0; trial < 100; ++trial) {
    const Distribution p = random_measure();
    const Distribution q = random_measure();
    const Distribution r = random_measure();
    const double dpq = w1(p, q);
    const double dqp = w1(q, p);
    const double dpr = w1(p, r);
    const double dqr = w1(q, r);
    CHECK(dpq >= 0.0);
    CHECK(std::abs(dpq - dqp) <= 1e-9);            // symmetry
    CHECK(dpr <= dpq + dqr + 1e-9);                // triangle inequality
    CHECK(w1(p, p) <= 1e-12);                      // identity
  }
}

TEST_CASE("1d consistency: quantile-discretized gaussians approximate the continuous value") {
  const Gaussian1D g1{0.0, 1.0};
  const Gaussian1D g2{2.0, 1.7};
  const int n = 10000;
  auto discretize = [&](const Gaussian1D& g) {
    std::vector<Atom> atoms;
    atoms.reserve(n);
    for (int k = 0; k < n; ++k) {
      const double u = (k + 0.5) / n;
      atoms.push_back({{g.mean + g.std * norm_quantile(u)}, 1.0 / n});
    }
    return Distribution::finite(std::move(atoms));
  };
  const double discrete = w1(discretize(g1), discretize(g2));
  const double continuous =
      w1(Distribution::gauss1d(g1.mean, g1.std), Distribution::gauss1d(g2.mean, g2.std));
  CHECK(std::abs(discrete - continuous) < 1e-2);
}

TEST_CASE("gaussian vs finite measure via the quantile integral") {
  // Against a 1-atom measure the value is E|X - c| for X ~ N(m, s^2).
  const double m = 0.7, s = 1.3, c = -0.2;
  const double d = (c - m) / s;
  const double expected = s * (2.0 * norm_pdf(d) + d * (2.0 * norm_cdf(d) - 1.0));
  CHECK(w1(Distribution::gauss1d(m, s), Distribution::dirac({c})) ==
        doctest::Approx(expected).epsilon(1e-12));

  // Sanity: against a fine-grained discretization of the same finite target.
  const Distribution target = finite1d({{-1.0, 0.3}, {0.5, 0.45}, {2.0, 0.25}});
  const int n = 20000;
  std::vector<Atom> atoms;
  for (int k = 0; k < n; ++k) {
    const double u = (k + 0.5) / n;
    atoms.push_back({{m + s * norm_quantile(u)}, 1.0 / n});
  }
  const double sampled = w1(Distribution::finite(atoms), target);
  CHECK(w1(Distribution::gauss1d(m, s), target) == doctest::Approx(sampled).epsilon(1e-3));
}

TEST_CASE("degenerate metrics are rejected") {
  const Distribution p = finite1d({{0.0, 1.0}});
  const Distribution q = finite1d({{1.0, 1.0}});
  CHECK_THROWS_AS(w1(p, q, [](const Vector&, const Vector&) { return 1.0; }), Error);
}

TEST_CASE("gaussians cannot be compared under custom metrics") {
  CHECK_THROWS_AS(
      w1(Distribution::gauss1d(0, 1), Distribution::dirac({0.0}), euclidean_metric), Error);
}

TEST_CASE("estimate_tau on catalog kernels") {
  std::vector<std::pair<Vector, Vector>> probes = {{{0.0}, {1.0}}, {{-2.0}, {3.5}}, {{0.3}, {0.9}}};

  DecisionMap constant{[](const Vector&) { return Distribution::dirac({1.0}); }, 0.0};
  CHECK(estimate_tau(constant, probes) == doctest::Approx(0.0));

  DecisionMap halfscale{[](const Vector& x) { return Distribution::dirac({0.5 * x[0]}); }, 0.5};
  CHECK(estimate_tau(halfscale, probes) == doctest::Approx(0.5).epsilon(1e-12));

  DecisionMap gauss{[](const Vector& x) { return Distribution::gauss1d(0.2 * x[0], 1.0); }, 0.2};
  CHECK(estimate_tau(gauss, probes) == doctest::Approx(0.2).epsilon(1e-12));

  CHECK_THROWS_AS(estimate_tau(constant, {}), Error);
}

TEST_CASE("expectations: exact sums and gauss-hermite") {
  auto identity = [](const Vector& xi) { return xi; };
  CHECK(expect_vector(Distribution::dirac({2.0}), identity)[0] == doctest::Approx(2.0));
  CHECK(expect_vector(finite1d({{0.0, 0.5}, {4.0, 0.5}}), identity)[0] == doctest::Approx(2.0));

  auto square = [](const Vector& xi) { return Vector{xi[0] * xi[0]}; };
  CHECK(expect_vector(Distribution::gauss1d(1.0, 2.0), square, 2)[0] ==
        doctest::Approx(5.0).epsilon(1e-12));
  CHECK(expect_vector(Distribution::gauss1d(1.0, 2.0), square, 32)[0] ==
        doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("monte carlo fallback is deterministic and consistent") {
  const Distribution p = Distribution::gauss1d(0.5, 1.0);
  auto identity = [](const Vector& xi) { return xi; };
  const Vector a = expect_vector_mc(p, identity, 40000, 123);
  const Vector b = expect_vector_mc(p, identity, 40000, 123);
  CHECK(a[0] == b[0]);
  CHECK(a[0] == doctest::Approx(0.5).epsilon(2e-2));
}

TEST_CASE("distribution json round-trip") {
  const Distribution p = finite1d({{0.0, 0.5}, {1.0, 0.5}});
  const Distribution p2 = Distribution::from_json(p.to_json());
  CHECK(w1(p, p2) == doctest::Approx(0.0));

  const Distribution g = Distribution::gauss1d(1.5, 0.25);
  const Distribution g2 = Distribution::from_json(g.to_json());
  CHECK(g2.gauss1d_params().mean == doctest::Approx(1.5));
  CHECK(g2.gauss1d_params().std == doctest::Approx(0.25));

  const Distribution d = Distribution::dirac({1.0, 2.0});
  CHECK(Distribution::from_json(d.to_json()).dirac_point().point[1] == doctest::Approx(2.0));

  CHECK_THROWS_AS(Distribution::from_json("{\"type\":\"unknown\"}"), Error);
  CHECK_THROWS_AS(Distribution::from_json("not json"), Error);
}

TEST_CASE("weight validation: renormalize small drift, reject large") {
  std::vector<Atom> drift = {{{0.0}, 0.5 + 2e-10}, {{1.0}, 0.5}};
  const Distribution p = Distribution::finite(drift);  // renormalized
  double total = 0.0;
  for (const Atom& a : p.finite_support().atoms) total += a.weight;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));

  std::vector<Atom> bad = {{{0.0}, 0.6}, {{1.0}, 0.5}};
  CHECK_THROWS_AS(Distribution::finite(bad), Error);
}

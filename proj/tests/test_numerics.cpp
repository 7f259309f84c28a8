#include <cmath>

#include <doctest.h>

#include "closedloop/errors.hpp"
#include "closedloop/numerics.hpp"
#include "support/reference.hpp"

using namespace closedloop;

TEST_CASE("rk4 fixes states of a zero field") {
  const Vector out = rk4_step({1.0}, [](const Vector& v) { return Vector(v.size(), 0.0); }, 0.1);
  CHECK(out[0] == doctest::Approx(1.0).epsilon(0.0));
}

TEST_CASE("rk4 on v -> -v reproduces the quartic Taylor polynomial") {
  const Vector out = rk4_step({1.0}, [](const Vector& v) { return Vector{-v[0]}; }, 0.1);
  // 1 - h + h^2/2 - h^3/6 + h^4/24 at h = 0.1
  CHECK(out[0] == doctest::Approx(0.9048375).epsilon(1e-12));
}

TEST_CASE("rk4 preserves rotation norm to O(h^5) per step") {
  Vector state{0.0, 1.0};
  auto rotation = [](const Vector& v) { return Vector{v[1], -v[0]}; };
  const double h = 1e-2;
  for (int k = 0; k < 100; ++k) state = rk4_step(state, rotation, h);
  // exact solution stays on the unit circle; per-step defect ~ h^5
  CHECK(std::abs(norm(state) - 1.0) < 100 * std::pow(h, 5.0));
  // compare against the exact rotation
  const double t = 100 * h;
  CHECK(state[0] == doctest::Approx(std::sin(t)).epsilon(1e-9));
  CHECK(state[1] == doctest::Approx(std::cos(t)).epsilon(1e-9));
}

TEST_CASE("rk4 on a linear field matches the degree-4 Taylor of exp(hM)") {
  testsupport::Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix m(3, 3);
    for (std::size_t i = 0; i < 9; ++i) m.data[i] = rng.uniform(-1.0, 1.0);
    const double h = 0.4 / std::max(1.0, testsupport::mat_inf_norm(m));
    Vector x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};

    const Vector got = rk4_step(x, [&](const Vector& v) { return matvec(m, v); }, h);

    // I + hM + (hM)^2/2 + (hM)^3/6 + (hM)^4/24 applied to x
    Vector expect = x;
    Vector term = x;
    for (int k = 1; k <= 4; ++k) {
      term = scale(h / k, matvec(m, term));
      expect = add(expect, term);
    }
    for (std::size_t i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
}

TEST_CASE("rk4 rejects non-finite fields") {
  CHECK_THROWS_AS(rk4_step({1.0}, [](const Vector&) { return Vector{std::nan("")}; }, 0.1), Error);
}

TEST_CASE("exponential fit recovers synthetic rates exactly") {
  std::vector<double> times, values;
  for (int k = 0; k <= 40; ++k) {
    const double t = 0.1 * k;
    times.push_back(t);
    values.push_back(std::exp(-1.5 * t));
  }
  const ExpFit fit = fit_exponential_rate(TimeSeries(times, values), 0.0, 4.0);
  CHECK(fit.rate == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exponential fit: amplitude lands in the intercept") {
  std::vector<double> times, values;
  for (int k = 0; k <= 30; ++k) {
    const double t = 0.05 * k;
    times.push_back(t);
    values.push_back(2.0 * std::exp(-3.0 * t));
  }
  const ExpFit fit = fit_exponential_rate(TimeSeries(times, values), 0.0, 1.5);
  CHECK(fit.rate == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(fit.intercept == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("exponential fit: constant series has rate 0") {
  const TimeSeries series({0.0, 1.0, 2.0, 3.0}, {0.7, 0.7, 0.7, 0.7});
  const ExpFit fit = fit_exponential_rate(series, 0.0, 3.0);
  CHECK(fit.rate == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(fit.r2 == doctest::Approx(1.0));
}

TEST_CASE("exponential fit error paths") {
  const TimeSeries tiny({0.0, 1.0}, {1.0, 2.0});
  CHECK_THROWS_AS(fit_exponential_rate(tiny, 0.0, 1.0), Error);
  const TimeSeries bad({0.0, 1.0, 2.0}, {1.0, -2.0, 1.0});
  CHECK_THROWS_AS(fit_exponential_rate(bad, 0.0, 2.0), Error);
}

TEST_CASE("adaptive quadrature on elementary integrals") {
  CHECK(adaptive_quad([](double) { return 1.0; }, 0.0, 1.0, 1e-12) == doctest::Approx(1.0));
  CHECK(adaptive_quad([](double s) { return 1.0 / (1.5 * s); }, 0.5, 1.0, 1e-12) ==
        doctest::Approx(std::log(2.0) / 1.5).epsilon(1e-11));
  CHECK(adaptive_quad([](double s) { return std::sin(s); }, 0.0, M_PI, 1e-12) ==
        doctest::Approx(2.0).epsilon(1e-11));
}

TEST_CASE("adaptive quadrature meets the tolerance on degree-6 polynomials") {
  testsupport::Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    double c[7];
    for (double& ci : c) ci = rng.uniform(-2.0, 2.0);
    auto poly = [&](double s) {
      double acc = 0.0;
      for (int k = 6; k >= 0; --k) acc = acc * s + c[k];
      return acc;
    };
    double exact = 0.0;
    for (int k = 0; k <= 6; ++k) exact += c[k] / (k + 1.0);  // over [0,1]
    const double got = adaptive_quad(poly, 0.0, 1.0, 1e-10);
    CHECK(std::abs(got - exact) <= 1e-10);
  }
}

TEST_CASE("invert_monotone solves elementary targets") {
  CHECK(invert_monotone([](double z) { return z; }, 0.3, 0.0, 1.0, 1e-12) ==
        doctest::Approx(0.3).epsilon(1e-10));
  CHECK(invert_monotone([](double z) { return std::log(1.0 / z) / 1.5; }, 0.462098, 1e-6, 1.0,
                        1e-10) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(invert_monotone([](double z) { return z * z * z; }, 8.0, 0.0, 3.0, 1e-12) ==
        doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("invert_monotone rejects brackets without a sign change") {
  CHECK_THROWS_AS(invert_monotone([](double z) { return z; }, 5.0, 0.0, 1.0, 1e-12), Error);
}

TEST_CASE("normal quantile inverts the normal cdf") {
  for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-9}) {
    CHECK(norm_cdf(norm_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("gauss-hermite integrates gaussian moments exactly") {
  std::vector<double> nodes, weights;
  gauss_hermite(16, nodes, weights);
  double total = 0.0, second = 0.0, fourth = 0.0;
  for (int k = 0; k < 16; ++k) {
    total += weights[k];
    const double x = std::sqrt(2.0) * nodes[k];  // standard normal variable
    second += weights[k] * x * x;
    fourth += weights[k] * x * x * x * x;
  }
  const double sqrt_pi = std::sqrt(M_PI);
  CHECK(total == doctest::Approx(sqrt_pi).epsilon(1e-13));
  CHECK(second / sqrt_pi == doctest::Approx(1.0).epsilon(1e-12));   // E Z^2
  CHECK(fourth / sqrt_pi == doctest::Approx(3.0).epsilon(1e-12));   // E Z^4
}

TEST_CASE("dense solve and spectral norm") {
  Matrix m(2, 2);
  m(0, 0) = 3.0; m(0, 1) = 1.0;
  m(1, 0) = 1.0; m(1, 1) = 2.0;
  const Vector x = solve_dense(m, {5.0, 5.0});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));

  Matrix diag(2, 2);
  diag(0, 0) = 2.0; diag(1, 1) = -7.0;
  CHECK(spectral_norm(diag) == doctest::Approx(7.0).epsilon(1e-10));
}

TEST_CASE("time series validates monotone grids") {
  CHECK_THROWS_AS(TimeSeries({0.0, 0.0}, {1.0, 1.0}), Error);
  CHECK_THROWS_AS(TimeSeries({0.0, 1.0}, {1.0}), Error);
}

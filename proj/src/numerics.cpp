#include "closedloop/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "closedloop/errors.hpp"

namespace closedloop {

TimeSeries::TimeSeries(std::vector<double> t, std::vector<double> v)
    : times(std::move(t)), values(std::move(v)) {
  if (times.size() != values.size()) fail(ErrorCode::DimensionMismatch, "times/values length mismatch");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) fail(ErrorCode::ConstraintError, "times must be strictly increasing");
  }
}

Vector rk4_step(const Vector& state, const std::function<Vector(const Vector&)>& field, double h) {
  if (!(h > 0.0)) fail(ErrorCode::ConstraintError, "rk4_step requires h > 0");
  const Vector k1 = field(state);
  require_finite(k1, ErrorCode::NonFiniteField, "field produced non-finite values (k1)");
  const Vector k2 = field(axpy(state, 0.5 * h, k1));
  require_finite(k2, ErrorCode::NonFiniteField, "field produced non-finite values (k2)");
  const Vector k3 = field(axpy(state, 0.5 * h, k2));
  require_finite(k3, ErrorCode::NonFiniteField, "field produced non-finite values (k3)");
  const Vector k4 = field(axpy(state, h, k3));
  require_finite(k4, ErrorCode::NonFiniteField, "field produced non-finite values (k4)");

  Vector out(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    out[i] = state[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  require_finite(out, ErrorCode::NonFiniteField, "rk4 update is non-finite");
  return out;
}

ExpFit fit_exponential_rate(const TimeSeries& series, double t_a, double t_b) {
  std::vector<double> ts;
  std::vector<double> ys;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double t = series.times[i];
    if (t < t_a || t > t_b) continue;
    const double v = series.values[i];
    if (!(v > 0.0)) fail(ErrorCode::NonPositiveValue, "fit_exponential_rate needs positive values");
    ts.push_back(t);
    ys.push_back(std::log(v));
  }
  if (ts.size() < 3) fail(ErrorCode::EmptyWindow, "fewer than 3 samples in fit window");

  const double n = static_cast<double>(ts.size());
  double st = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sy += ys[i];
  }
  const double tbar = st / n, ybar = sy / n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double dt = ts[i] - tbar, dy = ys[i] - ybar;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  ExpFit fit;
  const double slope = (stt > 0.0) ? sty / stt : 0.0;
  fit.rate = -slope;
  fit.intercept = ybar - slope * tbar;
  if (syy <= 1e-300) {
    fit.r2 = 1.0;  // flat log-series is fit exactly by a constant
  } else {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double pred = fit.intercept + slope * ts[i];
      ss_res += (ys[i] - pred) * (ys[i] - pred);
    }
    fit.r2 = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return fit;
}

namespace {

// Gauss-Kronrod 7-15 abscissae/weights (QUADPACK constants).
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct GkResult {
  double integral;
  double error;
};

GkResult gk15(const std::function<double(double)>& f, double a, double b, long& evals) {
  const double c = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double fv[15];
  for (int i = 0; i < 7; ++i) {
    fv[i] = f(c - half * kXgk[i]);
    fv[14 - i] = f(c + half * kXgk[i]);
  }
  fv[7] = f(c);
  evals += 15;
  for (int i = 0; i < 15; ++i) {
    if (!std::isfinite(fv[i])) fail(ErrorCode::NonFiniteIntegrand, "integrand is non-finite");
  }
  double resk = kWgk[7] * fv[7];
  double resg = kWg[3] * fv[7];
  for (int i = 0; i < 7; ++i) {
    resk += kWgk[i] * (fv[i] + fv[14 - i]);
  }
  for (int i = 0; i < 3; ++i) {
    // Gauss nodes sit at the odd Kronrod abscissae.
    resg += kWg[i] * (fv[2 * i + 1] + fv[13 - 2 * i]);
  }
  return {resk * half, std::abs(resk - resg) * half};
}

double quad_recurse(const std::function<double(double)>& f, double a, double b, double tol,
                    int depth, const QuadOptions& opt, long& evals) {
  const GkResult r = gk15(f, a, b, evals);
  if (r.error <= tol || r.error <= 1e-300) return r.integral;
  if (depth >= opt.max_depth || evals > opt.max_evals) {
    fail(ErrorCode::ToleranceNotReached, "adaptive_quad subdivision budget exhausted");
  }
  const double c = 0.5 * (a + b);
  return quad_recurse(f, a, c, 0.5 * tol, depth + 1, opt, evals) +
         quad_recurse(f, c, b, 0.5 * tol, depth + 1, opt, evals);
}

}  // namespace

double adaptive_quad(const std::function<double(double)>& integrand, double a, double b, double tol,
                     const QuadOptions& options) {
  if (!(a < b)) fail(ErrorCode::ConstraintError, "adaptive_quad requires a < b");
  if (!(tol > 0.0)) fail(ErrorCode::ConstraintError, "adaptive_quad requires tol > 0");
  long evals = 0;
  return quad_recurse(integrand, a, b, tol, 0, options, evals);
}

double invert_monotone(const std::function<double(double)>& f, double target, double lo, double hi,
                       double tol) {
  if (!(lo < hi)) fail(ErrorCode::BracketInvalid, "invert_monotone requires lo < hi");
  if (!(tol > 0.0)) fail(ErrorCode::ConstraintError, "invert_monotone requires tol > 0");
  double flo = f(lo) - target;
  double fhi = f(hi) - target;
  if (std::abs(flo) <= tol) return lo;
  if (std::abs(fhi) <= tol) return hi;
  if (flo * fhi > 0.0) fail(ErrorCode::BracketInvalid, "bracket does not straddle the target");

  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    const double fm = f(mid) - target;
    if (std::abs(fm) <= tol) return mid;
    if (fm * flo <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
    if (hi - lo <= std::numeric_limits<double>::epsilon() * (std::abs(lo) + std::abs(hi))) break;
  }
  if (std::abs(f(mid) - target) <= tol) return mid;
  fail(ErrorCode::ToleranceNotReached, "bisection stalled before reaching tolerance");
}

double norm_pdf(double z) {
  static const double inv_sqrt_2pi = 0.398942280401432677939946059934;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorCode::ConstraintError, "norm_quantile requires p in (0,1)");
  // Acklam's rational approximation, then one Halley refinement step.
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = norm_cdf(x) - p;
  const double u = e / norm_pdf(x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) fail(ErrorCode::ConstraintError, "gauss_hermite requires n >= 1");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const double pim4 = 0.751125544464942482244873;  // pi^{-1/4}
  const int m = (n + 1) / 2;
  double z = 0.0, z1 = 0.0, z2 = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * z1;
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * z2;
    } else {
      z = 2.0 * z - z2;
    }
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = pim4;
      double p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) <= 1e-15 * (1.0 + std::abs(z))) break;
    }
    z2 = z1;
    z1 = z;
    nodes[i] = -z;
    nodes[n - 1 - i] = z;
    weights[i] = 2.0 / (pp * pp);
    weights[n - 1 - i] = weights[i];
  }
}

Vector solve_dense(Matrix a, Vector b) {
  const std::size_t n = a.rows;
  if (a.cols != n || b.size() != n) fail(ErrorCode::DimensionMismatch, "solve_dense needs square system");
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    }
    if (std::abs(a(piv, k)) < 1e-300) fail(ErrorCode::ConstraintError, "singular matrix in solve_dense");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      std::swap(b[k], b[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      a(i, k) = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  Vector x(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= a(ii, j) * x[j];
    x[ii] = s / a(ii, ii);
  }
  return x;
}

double spectral_norm(const Matrix& m) {
  if (m.rows == 0 || m.cols == 0) return 0.0;
  Vector v(m.cols, 1.0 / std::sqrt(static_cast<double>(m.cols)));
  double sigma = 0.0;
  for (int iter = 0; iter < 300; ++iter) {
    Vector w = matvec_transpose(m, matvec(m, v));
    const double nw = norm(w);
    if (nw < 1e-300) return 0.0;
    v = scale(1.0 / nw, w);
    const double next = std::sqrt(nw);
    if (std::abs(next - sigma) <= 1e-14 * (1.0 + next)) return next;
    sigma = next;
  }
  return sigma;
}

}  // namespace closedloop

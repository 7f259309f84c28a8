#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "closedloop/errors.hpp"

namespace closedloop {

/// State vector in R^n. The paper's Hilbert space instantiated at desk scale.
using Vector = std::vector<double>;

/// Dense row-major matrix, used for linear operators in test fixtures and the
/// primal-dual coupling K.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline bool is_finite(double x) { return std::isfinite(x); }

inline bool is_finite(const Vector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline void require_finite(const Vector& v, ErrorCode code, const char* what) {
  if (!is_finite(v)) fail(code, what);
}

inline Vector add(const Vector& a, const Vector& b) {
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vector sub(const Vector& a, const Vector& b) {
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vector scale(double s, const Vector& a) {
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
  return r;
}

/// r = a + s*b
inline Vector axpy(const Vector& a, double s, const Vector& b) {
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + s * b[i];
  return r;
}

inline double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

inline double distance(const Vector& a, const Vector& b) { return norm(sub(a, b)); }

inline Vector matvec(const Matrix& m, const Vector& v) {
  Vector r(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
    r[i] = s;
  }
  return r;
}

/// v ↦ Mᵀv, the adjoint of the real matrix M.
inline Vector matvec_transpose(const Matrix& m, const Vector& v) {
  Vector r(m.cols, 0.0);
  for (std::size_t j = 0; j < m.cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) s += m(i, j) * v[i];
    r[j] = s;
  }
  return r;
}

/// Solve A x = b by Gaussian elimination with partial pivoting. Intended for
/// the small dense systems of resolvents and test references.
Vector solve_dense(Matrix a, Vector b);

/// Spectral norm via power iteration on MᵀM.
double spectral_norm(const Matrix& m);

}  // namespace closedloop

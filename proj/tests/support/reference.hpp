#pragma once

// Test-only oracles, independent of the library's solver paths:
//  - dense matrix exponential (scaling and squaring + Taylor)
//  - closed-form reference for linear constant-coefficient ODEs ż = Mz + b
//  - brute-force optimal transport by enumerating basis trees of the
//    transportation polytope
//  - a tiny deterministic RNG helper

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "closedloop/vector.hpp"

namespace testsupport {

using closedloop::Matrix;
using closedloop::Vector;

inline Matrix mat_mul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

inline Matrix mat_scale(double s, Matrix a) {
  for (double& x : a.data) x *= s;
  return a;
}

inline Matrix mat_add(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
  return c;
}

inline double mat_inf_norm(const Matrix& a) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) row += std::abs(a(i, j));
    worst = std::max(worst, row);
  }
  return worst;
}

/// e^A by scaling-and-squaring with a 24-term Taylor series.
inline Matrix mat_exp(Matrix a) {
  int squarings = 0;
  double nrm = mat_inf_norm(a);
  while (nrm > 0.5) {
    a = mat_scale(0.5, a);
    nrm *= 0.5;
    ++squarings;
  }
  Matrix result = Matrix::identity(a.rows);
  Matrix term = Matrix::identity(a.rows);
  for (int k = 1; k <= 24; ++k) {
    term = mat_scale(1.0 / k, mat_mul(term, a));
    result = mat_add(result, term);
  }
  for (int s = 0; s < squarings; ++s) result = mat_mul(result, result);
  return result;
}

/// Reference solution of ż = Mz + b at time t−t0: z* + e^{MΔt}(z0 − z*),
/// where Mz* = −b (M must be invertible).
struct LinearOdeReference {
  Matrix m;
  Vector b;
  Vector z_star;

  LinearOdeReference(Matrix m_in, Vector b_in) : m(std::move(m_in)), b(std::move(b_in)) {
    z_star = closedloop::solve_dense(m, closedloop::scale(-1.0, b));
  }

  Vector at(const Vector& z0, double dt) const {
    const Matrix e = mat_exp(mat_scale(dt, m));
    return closedloop::add(z_star, closedloop::matvec(e, closedloop::sub(z0, z_star)));
  }

  /// Propagator for repeated equal steps.
  Matrix step_matrix(double dt) const { return mat_exp(mat_scale(dt, m)); }
};

/// Enumerate all basis trees of the m×n transportation polytope and return
/// the optimal cost. Exponential; intended for m, n ≤ 4.
inline double brute_force_transport(const std::vector<double>& supply,
                                    const std::vector<double>& demand,
                                    const std::function<double(std::size_t, std::size_t)>& cost) {
  const std::size_t m = supply.size();
  const std::size_t n = demand.size();
  const std::size_t cells = m * n;
  const std::size_t basis_size = m + n - 1;
  double best = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> pick(basis_size);
  std::function<void(std::size_t, std::size_t)> recurse = [&](std::size_t start, std::size_t chosen) {
    if (chosen == basis_size) {
      // Solve for flows on the candidate basis by leaf elimination.
      std::vector<double> flow(basis_size, 0.0);
      std::vector<double> rem_supply = supply;
      std::vector<double> rem_demand = demand;
      std::vector<bool> used(basis_size, false);
      std::size_t solved = 0;
      bool progress = true;
      while (progress && solved < basis_size) {
        progress = false;
        for (std::size_t idx = 0; idx < basis_size; ++idx) {
          if (used[idx]) continue;
          const std::size_t i = pick[idx] / n;
          const std::size_t j = pick[idx] % n;
          int row_count = 0, col_count = 0;
          for (std::size_t other = 0; other < basis_size; ++other) {
            if (used[other]) continue;
            if (pick[other] / n == i) ++row_count;
            if (pick[other] % n == j) ++col_count;
          }
          if (row_count == 1) {
            flow[idx] = rem_supply[i];
            rem_supply[i] = 0.0;
            rem_demand[j] -= flow[idx];
            used[idx] = true;
            ++solved;
            progress = true;
          } else if (col_count == 1) {
            flow[idx] = rem_demand[j];
            rem_demand[j] = 0.0;
            rem_supply[i] -= flow[idx];
            used[idx] = true;
            ++solved;
            progress = true;
          }
        }
      }
      if (solved < basis_size) return;  // contains a cycle
      for (double f : flow) {
        if (f < -1e-12) return;  // infeasible vertex
      }
      for (double r : rem_supply) {
        if (std::abs(r) > 1e-9) return;
      }
      double total = 0.0;
      for (std::size_t idx = 0; idx < basis_size; ++idx) {
        total += flow[idx] * cost(pick[idx] / n, pick[idx] % n);
      }
      best = std::min(best, total);
      return;
    }
    for (std::size_t c = start; c < cells; ++c) {
      pick[chosen] = c;
      recurse(c + 1, chosen + 1);
    }
  };
  recurse(0, 0);
  return best;
}

/// Deterministic uniform generator (same across platforms).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed == 0 ? 0x9e3779b97f4a7c15ULL : seed) {}

  double uniform() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }

 private:
  std::uint64_t next() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::uint64_t state_;
};

}  // namespace testsupport

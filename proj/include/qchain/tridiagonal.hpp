#ifndef QCHAIN_TRIDIAGONAL_HPP_
#define QCHAIN_TRIDIAGONAL_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "qchain/orthopoly.hpp"

namespace qchain {

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
struct TridiagonalEigensystem {
  /// Ascending.
  Vector<Scalar> values;
  /// Column j is the normalized eigenvector for values[j].
  Matrix<Scalar> vectors;
};

struct QlSettings {
  double relative_tolerance = 1e-14;
  int max_iterations_per_value = 50;
};

/*
 * Implicit-shift QL iteration for a real symmetric tridiagonal matrix with
 * the given diagonal and off-diagonal (off_diagonal[i] couples i and i+1).
 * An off-diagonal entry is treated as zero once
 * |e_m| <= tol * (|d_m| + |d_{m+1}|).
 */
template <typename Scalar>
TridiagonalEigensystem<Scalar> symmetric_tridiagonal_eigen(const Vector<Scalar> &diagonal,
                                                           const Vector<Scalar> &off_diagonal,
                                                           const QlSettings &settings = {}) {
  using std::abs;
  using std::hypot;
  const Eigen::Index n = diagonal.size();
  if (n < 1) throw std::invalid_argument("tridiagonal eigen: empty matrix");
  if (off_diagonal.size() != n - 1) {
    throw std::invalid_argument("tridiagonal eigen: off-diagonal length must be n-1");
  }

  const Scalar tol =
      std::max(Scalar(settings.relative_tolerance), std::numeric_limits<Scalar>::epsilon());
  Vector<Scalar> d = diagonal;
  Vector<Scalar> e = Vector<Scalar>::Zero(n);
  e.head(n - 1) = off_diagonal;
  Matrix<Scalar> z = Matrix<Scalar>::Identity(n, n);

  for (Eigen::Index l = 0; l < n; ++l) {
    int iterations = 0;
    Eigen::Index m;
    do {
      for (m = l; m < n - 1; ++m) {
        const Scalar scale = abs(d[m]) + abs(d[m + 1]);
        if (abs(e[m]) <= tol * scale) break;
      }
      if (m == l) break;
      if (iterations++ == settings.max_iterations_per_value) {
        throw ConvergenceError("tridiagonal eigen: no convergence for eigenvalue " +
                               std::to_string(l) + " after " +
                               std::to_string(settings.max_iterations_per_value) + " iterations");
      }
      Scalar g = (d[l + 1] - d[l]) / (2 * e[l]);
      Scalar r = hypot(g, Scalar(1));
      g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
      Scalar s(1), c(1), p(0);
      Eigen::Index i;
      bool underflow = false;
      for (i = m - 1; i >= l; --i) {
        Scalar f = s * e[i];
        const Scalar b = c * e[i];
        r = hypot(f, g);
        e[i + 1] = r;
        if (r == Scalar(0)) {
          d[i + 1] -= p;
          e[m] = Scalar(0);
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        for (Eigen::Index k = 0; k < n; ++k) {
          f = z(k, i + 1);
          z(k, i + 1) = s * z(k, i) + c * f;
          z(k, i) = c * z(k, i) - s * f;
        }
      }
      if (underflow) continue;
      d[l] -= p;
      e[l] = g;
      e[m] = Scalar(0);
    } while (m != l);
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return d[a] < d[b]; });
  TridiagonalEigensystem<Scalar> out{Vector<Scalar>(n), Matrix<Scalar>(n, n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    out.values[j] = d[order[static_cast<std::size_t>(j)]];
    out.vectors.col(j) = z.col(order[static_cast<std::size_t>(j)]);
  }
  return out;
}

}  // namespace qchain

#endif  // QCHAIN_TRIDIAGONAL_HPP_

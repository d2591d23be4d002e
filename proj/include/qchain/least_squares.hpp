#ifndef QCHAIN_LEAST_SQUARES_HPP_
#define QCHAIN_LEAST_SQUARES_HPP_

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "qchain/orthopoly.hpp"

namespace qchain {

template <typename Scalar>
struct LeastSquaresSolution {
  /// Minimum-norm minimizer.
  Vector<Scalar> coefficients;
  /// Columns span the null space of the weighted design (empty when full rank).
  Matrix<Scalar> null_space;
  /// sqrt(sum w (design * c - rhs)^2 / sum w)
  Scalar residual;
  int rank;
};

/*
 * Weighted least squares with rank detection: singular values at or below
 * relative_cutoff * sigma_max are treated as zero.  Rows with zero weight drop
 * out of the problem entirely.
 */
template <typename Scalar>
LeastSquaresSolution<Scalar> weighted_least_squares(const Matrix<Scalar> &design,
                                                    const Vector<Scalar> &rhs,
                                                    const Vector<Scalar> &weights,
                                                    Scalar relative_cutoff = Scalar(1e-10)) {
  if (design.rows() != rhs.size() || design.rows() != weights.size()) {
    throw std::invalid_argument("weighted_least_squares: size mismatch");
  }
  if ((weights.array() < Scalar(0)).any()) {
    throw std::invalid_argument("weighted_least_squares: negative weight");
  }
  const Vector<Scalar> root = weights.cwiseSqrt();
  const Matrix<Scalar> scaled = root.asDiagonal() * design;
  const Vector<Scalar> target = root.cwiseProduct(rhs);

  Eigen::JacobiSVD<Matrix<Scalar>> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeFullV);
  svd.setThreshold(relative_cutoff);
  const int rank = static_cast<int>(svd.rank());

  LeastSquaresSolution<Scalar> out;
  out.coefficients = svd.solve(target);
  out.rank = rank;
  out.null_space = svd.matrixV().rightCols(design.cols() - rank);
  const Scalar total = weights.sum();
  const Vector<Scalar> misfit = design * out.coefficients - rhs;
  out.residual =
      total > Scalar(0) ? std::sqrt(weights.dot(misfit.cwiseProduct(misfit)) / total) : Scalar(0);
  return out;
}

}  // namespace qchain

#endif  // QCHAIN_LEAST_SQUARES_HPP_

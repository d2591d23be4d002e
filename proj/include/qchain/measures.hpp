#ifndef QCHAIN_MEASURES_HPP_
#define QCHAIN_MEASURES_HPP_

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "qchain/orthopoly.hpp"
#include "qchain/tridiagonal.hpp"

namespace qchain {

/*
 * A finitely supported probability measure: strictly increasing nodes with
 * positive weights summing to one.
 */
template <typename Scalar = double>
class DiscreteMeasure {
 public:
  DiscreteMeasure(Vector<Scalar> nodes, Vector<Scalar> weights)
      : nodes_(std::move(nodes)), weights_(std::move(weights)) {
    if (nodes_.size() < 1 || nodes_.size() != weights_.size()) {
      throw std::invalid_argument(
          "measure: nodes and weights must be non-empty and of equal length");
    }
    for (Eigen::Index i = 0; i < size(); ++i) {
      if (!(weights_[i] > Scalar(0))) {
        throw std::invalid_argument("measure: weight " + std::to_string(i) + " is not positive");
      }
      if (i > 0 && !(nodes_[i] > nodes_[i - 1])) {
        throw std::invalid_argument("measure: nodes must be strictly increasing");
      }
    }
    const Scalar total = weights_.sum();
    if (std::abs(total - Scalar(1)) > Scalar(1e-12)) {
      throw std::invalid_argument("measure: weights do not sum to one");
    }
    weights_ /= total;
  }

  Eigen::Index size() const { return nodes_.size(); }
  const Vector<Scalar> &nodes() const { return nodes_; }
  const Vector<Scalar> &weights() const { return weights_; }

 private:
  Vector<Scalar> nodes_;
  Vector<Scalar> weights_;
};

template <typename Scalar>
Scalar moment(const DiscreteMeasure<Scalar> &m, int k) {
  if (k < 0) throw std::out_of_range("moment: negative order");
  return m.weights().dot(m.nodes().array().pow(k).matrix());
}

template <typename Scalar>
Scalar mean(const DiscreteMeasure<Scalar> &m) {
  return moment(m, 1);
}

template <typename Scalar>
Scalar variance(const DiscreteMeasure<Scalar> &m) {
  const Scalar mu = mean(m);
  return moment(m, 2) - mu * mu;
}

/// Number of Gauss nodes available from `rec` when asking for n_nodes: the
/// request is capped at the first k with beta_k == 0.
template <typename Scalar>
int effective_node_count(const RecurrenceCoefficients<Scalar> &rec, int n_nodes) {
  if (n_nodes < 1) throw std::invalid_argument("quadrature: n_nodes must be positive");
  if (n_nodes > rec.max_degree()) {
    throw std::out_of_range("quadrature: n_nodes exceeds recurrence max_degree");
  }
  return std::min(n_nodes, rec.termination_degree());
}

/*
 * Eigen-decomposition of the n x n Jacobi matrix of `rec` (n capped as in
 * effective_node_count).  Eigenvector columns are signed so that their first
 * component is positive; with that convention column j holds
 * sqrt(w_j) * (Qn_0(x_j), ..., Qn_{n-1}(x_j)) for the orthonormal family Qn.
 */
template <typename Scalar>
TridiagonalEigensystem<Scalar> jacobi_eigensystem(const RecurrenceCoefficients<Scalar> &rec,
                                                  int n_nodes, const QlSettings &settings = {}) {
  const int n = effective_node_count(rec, n_nodes);
  Vector<Scalar> off(n - 1);
  for (int k = 1; k < n; ++k) off[k - 1] = std::sqrt(rec.beta(k));
  auto eig = symmetric_tridiagonal_eigen<Scalar>(rec.alpha().head(n), off, settings);
  for (int j = 0; j < n; ++j) {
    if (eig.vectors(0, j) < Scalar(0)) eig.vectors.col(j) *= Scalar(-1);
  }
  return eig;
}

/// Gauss quadrature of the orthogonality measure of `rec` (Golub-Welsch).
template <typename Scalar>
DiscreteMeasure<Scalar> quadrature_from_recurrence(const RecurrenceCoefficients<Scalar> &rec,
                                                   int n_nodes, const QlSettings &settings = {}) {
  auto eig = jacobi_eigensystem(rec, n_nodes, settings);
  Vector<Scalar> weights = eig.vectors.row(0).transpose().array().square();
  return DiscreteMeasure<Scalar>(std::move(eig.values), std::move(weights));
}

/// Stationary law of the chain P(a,a)=1-alpha, P(a,b)=alpha, P(b,a)=beta,
/// P(b,b)=1-beta on the standardized values a = sqrt(alpha/beta),
/// b = -sqrt(beta/alpha).
template <typename Scalar>
DiscreteMeasure<Scalar> two_point_measure(Scalar alpha, Scalar beta) {
  if (!(alpha > Scalar(0) && beta > Scalar(0))) {
    throw std::domain_error("two_point_measure: alpha and beta must be positive");
  }
  if (alpha > Scalar(1) || beta > Scalar(1)) {
    throw std::domain_error("two_point_measure: alpha and beta must not exceed one");
  }
  Vector<Scalar> nodes(2), weights(2);
  nodes << -std::sqrt(beta / alpha), std::sqrt(alpha / beta);
  weights << alpha / (alpha + beta), beta / (alpha + beta);
  return DiscreteMeasure<Scalar>(std::move(nodes), std::move(weights));
}

/// Chebyshev-Gauss rule for the arcsine law on [-1, 1].
template <typename Scalar>
DiscreteMeasure<Scalar> arcsine_measure(int n_nodes) {
  if (n_nodes < 2) throw std::invalid_argument("arcsine_measure: need at least two nodes");
  Vector<Scalar> nodes(n_nodes);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  for (int i = 1; i <= n_nodes; ++i) {
    // i-th node from the right; stored ascending.
    nodes[n_nodes - i] = std::cos((2 * i - 1) * pi / (2 * n_nodes));
  }
  return DiscreteMeasure<Scalar>(std::move(nodes),
                                 Vector<Scalar>::Constant(n_nodes, Scalar(1) / n_nodes));
}

}  // namespace qchain

#endif  // QCHAIN_MEASURES_HPP_

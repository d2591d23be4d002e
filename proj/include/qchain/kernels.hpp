#ifndef QCHAIN_KERNELS_HPP_
#define QCHAIN_KERNELS_HPP_

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qchain/measures.hpp"
#include "qchain/orthopoly.hpp"

namespace qchain {

enum class KernelFamily { mehler, two_valued, chebyshev };

inline const char *to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::mehler:
      return "mehler";
    case KernelFamily::two_valued:
      return "two_valued";
    case KernelFamily::chebyshev:
      return "chebyshev";
  }
  return "unknown";
}

class KernelConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Entries in (-threshold, 0) are clipped; anything more negative is fatal
/// unless the caller asked for the signed operator.
inline constexpr double kNegativityThreshold = 1e-8;

enum class NegativityPolicy { clip_or_abort, keep_signed };

/*
 * Polynomial eigenstructure of a kernel: E(Q_j(X_1) | X_0) = eigenvalues[j] Q_j(X_0)
 * for the monic family of `recurrence`.  Used by the spectral route for mixed
 * moments, which never touches the node set.
 */
template <typename Scalar>
struct SpectralModel {
  RecurrenceCoefficients<Scalar> recurrence;
  Vector<Scalar> eigenvalues;
};

using KernelParams = std::vector<std::pair<std::string, double>>;

template <typename Scalar = double>
class TransitionKernel {
 public:
  TransitionKernel(KernelFamily family, DiscreteMeasure<Scalar> measure, Matrix<Scalar> matrix,
                   Scalar r, Scalar negativity_defect, SpectralModel<Scalar> spectral,
                   KernelParams params, int steps = 1, bool is_signed = false)
      : family_(family),
        measure_(std::move(measure)),
        matrix_(std::move(matrix)),
        r_(r),
        negativity_defect_(negativity_defect),
        spectral_(std::move(spectral)),
        params_(std::move(params)),
        steps_(steps),
        signed_(is_signed) {
    if (matrix_.rows() != measure_.size() || matrix_.cols() != measure_.size()) {
      throw std::invalid_argument("kernel: matrix shape does not match the measure");
    }
    const auto &x = measure_.nodes();
    const auto &w = measure_.weights();
    const Scalar mu = w.dot(x);
    const Scalar var = w.dot(x.cwiseProduct(x)) - mu * mu;
    correlation_ = (w.cwiseProduct(x).dot(matrix_ * x) - mu * mu) / var;
  }

  KernelFamily family() const { return family_; }
  const DiscreteMeasure<Scalar> &measure() const { return measure_; }
  const Matrix<Scalar> &matrix() const { return matrix_; }
  Eigen::Index size() const { return measure_.size(); }
  const Vector<Scalar> &nodes() const { return measure_.nodes(); }
  const Vector<Scalar> &weights() const { return measure_.weights(); }

  /// Construction parameter r.
  Scalar r() const { return r_; }
  /// corr(X_0, X_steps) computed from the matrix.
  Scalar correlation() const { return correlation_; }
  Scalar negativity_defect() const { return negativity_defect_; }
  const SpectralModel<Scalar> &spectral() const { return spectral_; }
  const KernelParams &params() const { return params_; }
  int steps() const { return steps_; }
  /// True when negative entries were kept (not a Markov kernel).
  bool is_signed() const { return signed_; }

 private:
  KernelFamily family_;
  DiscreteMeasure<Scalar> measure_;
  Matrix<Scalar> matrix_;
  Scalar r_;
  Scalar negativity_defect_;
  SpectralModel<Scalar> spectral_;
  KernelParams params_;
  int steps_;
  bool signed_;
  Scalar correlation_;
};

template <typename Scalar>
struct KernelDefects {
  Scalar row_sum;           // max |sum_j P_ij - 1|
  Scalar min_entry;         // min P_ij
  Scalar stationarity;      // max |(w^T P)_j - w_j|
  Scalar detailed_balance;  // max |w_i P_ij - w_j P_ji|
};

template <typename Scalar>
KernelDefects<Scalar> kernel_defects(const TransitionKernel<Scalar> &k) {
  const auto &P = k.matrix();
  const auto &w = k.weights();
  const Matrix<Scalar> flow = w.asDiagonal() * P;
  return {(P.rowwise().sum().array() - Scalar(1)).abs().maxCoeff(), P.minCoeff(),
          ((P.transpose() * w) - w).cwiseAbs().maxCoeff(),
          (flow - flow.transpose()).cwiseAbs().maxCoeff()};
}

namespace detail {

inline void check_correlation_parameter(double r, const char *who) {
  if (!(std::abs(r) > 0.0 && std::abs(r) < 1.0)) {
    throw std::domain_error(std::string(who) + ": r must satisfy 0 < |r| < 1");
  }
}

/// Clip tiny negatives and renormalize rows; returns the pre-clip defect.
template <typename Scalar>
Scalar clip_negatives(Matrix<Scalar> &P, NegativityPolicy policy, const char *who) {
  Eigen::Index wi = 0, wj = 0;
  const Scalar worst = P.minCoeff(&wi, &wj);
  const Scalar defect = worst < Scalar(0) ? -worst : Scalar(0);
  if (policy == NegativityPolicy::keep_signed || defect == Scalar(0)) return defect;
  if (defect >= Scalar(kNegativityThreshold)) {
    std::ostringstream msg;
    msg.precision(6);
    msg << who << ": no nonnegative discretization; worst entry P(" << wi << "," << wj
        << ") = " << static_cast<double>(worst);
    throw KernelConstructionError(msg.str());
  }
  P = P.cwiseMax(Scalar(0));
  const Vector<Scalar> sums = P.rowwise().sum();
  P = sums.cwiseInverse().asDiagonal() * P;
  return defect;
}

template <typename Scalar>
Vector<Scalar> geometric(Scalar ratio, int degree, Scalar first = Scalar(1)) {
  Vector<Scalar> out(degree + 1);
  Scalar term(1);
  for (int j = 0; j <= degree; ++j) {
    out[j] = term;
    term *= ratio;
  }
  out.tail(degree) *= first;
  return out;
}

}  // namespace detail

/// Orthonormal polynomial values on the Gauss nodes: entry (k, j) = Qn_k(x_j).
template <typename Scalar>
Matrix<Scalar> orthonormal_values(const RecurrenceCoefficients<Scalar> &rec, int n_nodes) {
  const auto eig = jacobi_eigensystem(rec, n_nodes);
  return eig.vectors * eig.vectors.row(0).cwiseInverse().asDiagonal();
}

/*
 * Discrete Mehler kernel on the Gauss rule `m` of `rec`:
 *   P_ij = w_j sum_{k<n} r^k Qn_k(x_i) Qn_k(x_j).
 * Evaluated as D^{-1} V^T diag(r^k) V D with V the Jacobi eigenvectors and
 * D = diag(V_0j), which is stable where the tail weights underflow the
 * polynomial values.
 */
template <typename Scalar>
TransitionKernel<Scalar> mehler_kernel(const RecurrenceCoefficients<Scalar> &rec,
                                       const DiscreteMeasure<Scalar> &m, Scalar r,
                                       NegativityPolicy policy = NegativityPolicy::clip_or_abort) {
  detail::check_correlation_parameter(static_cast<double>(r), "mehler_kernel");
  const auto eig = jacobi_eigensystem(rec, static_cast<int>(m.size()));
  const Eigen::Index n = eig.values.size();
  const Scalar scale = Scalar(1) + m.nodes().cwiseAbs().maxCoeff();
  if (n != m.size() || (eig.values - m.nodes()).cwiseAbs().maxCoeff() > Scalar(1e-10) * scale) {
    throw std::invalid_argument("mehler_kernel: measure is not the Gauss rule of this recurrence");
  }
  const Matrix<Scalar> &V = eig.vectors;
  const Vector<Scalar> spectrum = detail::geometric(r, static_cast<int>(n) - 1);
  const Matrix<Scalar> S = V.transpose() * spectrum.asDiagonal() * V;
  const Vector<Scalar> v0 = V.row(0).transpose();
  Matrix<Scalar> P = v0.cwiseInverse().asDiagonal() * S * v0.asDiagonal();
  const Scalar defect = detail::clip_negatives(P, policy, "mehler_kernel");

  SpectralModel<Scalar> spectral{rec, detail::geometric(r, rec.max_degree())};
  KernelParams params{{"n_nodes", static_cast<double>(n)}};
  for (int i = 0; i < rec.max_degree() && i < 3; ++i) {
    params.emplace_back("beta_" + std::to_string(i + 1), static_cast<double>(rec.beta(i + 1)));
  }
  const bool keep = policy == NegativityPolicy::keep_signed && defect > Scalar(0);
  return TransitionKernel<Scalar>(KernelFamily::mehler, m, std::move(P), r, defect,
                                  std::move(spectral), std::move(params), 1, keep);
}

/// q-family convenience: Gauss rule of the [n]_q recurrence plus its Mehler kernel.
template <typename Scalar>
TransitionKernel<Scalar> q_mehler_kernel(
    Scalar q, Scalar r, int n_nodes, NegativityPolicy policy = NegativityPolicy::clip_or_abort) {
  const auto rec = build_q_recurrence(q, std::max(n_nodes, 16));
  const auto m = quadrature_from_recurrence(rec, n_nodes);
  auto k = mehler_kernel(rec, m, r, policy);
  KernelParams params{{"q", static_cast<double>(q)}};
  params.insert(params.end(), k.params().begin(), k.params().end());
  return TransitionKernel<Scalar>(k.family(), k.measure(), k.matrix(), k.r(), k.negativity_defect(),
                                  k.spectral(), std::move(params), 1, k.is_signed());
}

/*
 * Two-state chain with P(a,a)=1-alpha, P(a,b)=alpha, P(b,a)=beta, P(b,b)=1-beta
 * over two_point_measure(alpha, beta); nodes are ordered (b, a).
 */
template <typename Scalar>
TransitionKernel<Scalar> two_valued_kernel(Scalar alpha, Scalar beta) {
  auto m = two_point_measure(alpha, beta);
  const Scalar r = Scalar(1) - alpha - beta;
  if (std::abs(r) < Scalar(1e-14) || std::abs(r) > Scalar(1) - Scalar(1e-14)) {
    throw std::domain_error("two_valued_kernel: correlation 1 - alpha - beta must avoid 0 and +-1");
  }
  Matrix<Scalar> P(2, 2);
  P << Scalar(1) - beta, beta, alpha, Scalar(1) - alpha;

  // Orthogonal family of a standardized two-point law: Q_1 = x,
  // Q_2 = x^2 - (a+b) x - 1 vanishes on the support.
  constexpr int kDegree = 64;
  Vector<Scalar> rec_alpha = Vector<Scalar>::Zero(kDegree);
  Vector<Scalar> rec_beta = Vector<Scalar>::Zero(kDegree);
  rec_alpha[1] = m.nodes()[0] + m.nodes()[1];
  rec_beta[0] = Scalar(1);
  SpectralModel<Scalar> spectral{RecurrenceCoefficients<Scalar>(rec_alpha, rec_beta),
                                 detail::geometric(r, kDegree)};
  return TransitionKernel<Scalar>(
      KernelFamily::two_valued, std::move(m), std::move(P), r, Scalar(0), std::move(spectral),
      {{"alpha", static_cast<double>(alpha)}, {"beta", static_cast<double>(beta)}});
}

namespace detail {

inline void check_unit_interval(double v, const char *who) {
  if (!(std::abs(v) <= 1.0)) {
    throw std::domain_error(std::string(who) + ": argument outside [-1, 1]");
  }
}

/// sum_{n>=0} r^n cos(n phi) given c = cos(phi).
template <typename Scalar>
Scalar poisson_sum(Scalar r, Scalar c) {
  return (Scalar(1) - r * c) / (Scalar(1) - 2 * r * c + r * r);
}

}  // namespace detail

/*
 * Transition density of the Chebyshev chain with respect to the arcsine law,
 * p(x, y) = sum_n r^n T_n(x) T_n(y), as the half-sum of two Poisson kernels at
 * theta_x + theta_y and theta_x - theta_y.
 */
template <typename Scalar>
Scalar chebyshev_density(Scalar r, Scalar x, Scalar y) {
  detail::check_correlation_parameter(static_cast<double>(r), "chebyshev_density");
  detail::check_unit_interval(static_cast<double>(x), "chebyshev_density");
  detail::check_unit_interval(static_cast<double>(y), "chebyshev_density");
  const Scalar sx = std::sqrt(Scalar(1) - x * x);
  const Scalar sy = std::sqrt(Scalar(1) - y * y);
  const Scalar cos_sum = x * y - sx * sy;
  const Scalar cos_diff = x * y + sx * sy;
  return (detail::poisson_sum(r, cos_sum) + detail::poisson_sum(r, cos_diff)) / 2;
}

/// Partial sum sum_{n<terms} r^n T_n(x) T_n(y).
template <typename Scalar>
Scalar chebyshev_density_series(Scalar r, Scalar x, Scalar y, int terms) {
  Scalar sum(0), rn(1);
  Scalar tx0(1), tx1(x), ty0(1), ty1(y);
  for (int n = 0; n < terms; ++n) {
    sum += rn * tx0 * ty0;
    rn *= r;
    const Scalar tx2 = 2 * x * tx1 - tx0;
    const Scalar ty2 = 2 * y * ty1 - ty0;
    tx0 = tx1;
    tx1 = tx2;
    ty0 = ty1;
    ty1 = ty2;
  }
  return sum;
}

/*
 * Rational closed form of the density.  With `as_printed` the numerator uses
 * (y^2 + y^2) where (x^2 + y^2) belongs; that variant exists only to measure
 * how far the misprint is from the true density.
 */
template <typename Scalar>
Scalar chebyshev_density_rational(Scalar r, Scalar x, Scalar y, bool as_printed = false) {
  const Scalar squares = as_printed ? y * y + y * y : x * x + y * y;
  const Scalar numerator = Scalar(1) - r * r + r * (2 * r * squares - (Scalar(3) + r * r) * y * x);
  const Scalar one_minus = Scalar(1) - r * r;
  const Scalar denominator =
      one_minus * one_minus + 4 * r * r * (x * x + y * y - (r + Scalar(1) / r) * x * y);
  return numerator / denominator;
}

inline constexpr double kChebyshevRowTolerance = 1e-10;

template <typename Scalar>
TransitionKernel<Scalar> chebyshev_kernel(Scalar r, int n_nodes) {
  detail::check_correlation_parameter(static_cast<double>(r), "chebyshev_kernel");
  auto m = arcsine_measure<Scalar>(n_nodes);
  const auto &x = m.nodes();
  Matrix<Scalar> P(n_nodes, n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    for (int j = 0; j < n_nodes; ++j) {
      P(i, j) = chebyshev_density(r, x[i], x[j]) * m.weights()[j];
    }
  }
  // Aliasing of T_{2N} onto the constant shifts row sums by about |r|^{2N}.
  const Scalar row_defect = (P.rowwise().sum().array() - Scalar(1)).abs().maxCoeff();
  if (row_defect > Scalar(kChebyshevRowTolerance)) {
    std::ostringstream msg;
    msg << "chebyshev_kernel: " << n_nodes << " nodes resolve r = " << static_cast<double>(r)
        << " only to row-sum defect " << static_cast<double>(row_defect) << "; use more nodes";
    throw KernelConstructionError(msg.str());
  }
  // E(T_n(X_1) | X_0) = r^n / 2 T_n(X_0) for n >= 1.
  const int degree = std::max(64, 2 * n_nodes);
  SpectralModel<Scalar> spectral{chebyshev_recurrence<Scalar>(degree),
                                 detail::geometric(r, degree, Scalar(1) / 2)};
  return TransitionKernel<Scalar>(KernelFamily::chebyshev, std::move(m), std::move(P), r, Scalar(0),
                                  std::move(spectral), {{"n_nodes", static_cast<double>(n_nodes)}});
}

/// P^steps with the spectral model raised accordingly.
template <typename Scalar>
TransitionKernel<Scalar> kernel_power(const TransitionKernel<Scalar> &k, int steps) {
  if (steps < 1) throw std::invalid_argument("kernel_power: steps must be positive");
  Matrix<Scalar> result = k.matrix();
  for (int s = 1; s < steps; ++s) result = result * k.matrix();
  SpectralModel<Scalar> spectral = k.spectral();
  spectral.eigenvalues = spectral.eigenvalues.array().pow(steps).matrix();
  return TransitionKernel<Scalar>(k.family(), k.measure(), std::move(result), k.r(),
                                  k.negativity_defect(), std::move(spectral), k.params(),
                                  k.steps() * steps, k.is_signed());
}

}  // namespace qchain

#endif  // QCHAIN_KERNELS_HPP_

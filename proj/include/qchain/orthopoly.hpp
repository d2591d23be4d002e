#ifndef QCHAIN_ORTHOPOLY_HPP_
#define QCHAIN_ORTHOPOLY_HPP_

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qchain {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/*
 * Three-term recurrence data for a monic orthogonal polynomial family
 *
 *   Q_0 = 1,  Q_1 = x - alpha_0,
 *   Q_{n+1} = (x - alpha_n) Q_n - beta_n Q_{n-1}.
 *
 * alpha holds alpha_0 .. alpha_{d-1}; beta holds beta_1 .. beta_d, where d is
 * max_degree.  beta_n == 0 marks termination of the family: the orthogonality
 * measure is then supported on n points.
 */
template <typename Scalar = double>
class RecurrenceCoefficients {
 public:
  RecurrenceCoefficients(Vector<Scalar> alpha, Vector<Scalar> beta)
      : alpha_(std::move(alpha)), beta_(std::move(beta)) {
    if (alpha_.size() != beta_.size()) {
      throw std::invalid_argument("recurrence: alpha and beta lengths differ");
    }
    if (alpha_.size() < 1) {
      throw std::invalid_argument("recurrence: max_degree must be positive");
    }
    for (Eigen::Index i = 0; i < beta_.size(); ++i) {
      if (!(beta_[i] >= Scalar(0))) {
        throw std::invalid_argument("recurrence: beta_" + std::to_string(i + 1) + " is negative");
      }
    }
  }

  int max_degree() const { return static_cast<int>(alpha_.size()); }

  const Vector<Scalar> &alpha() const { return alpha_; }
  const Vector<Scalar> &beta() const { return beta_; }

  /// alpha_n, 0 <= n < max_degree
  Scalar alpha(int n) const { return alpha_[n]; }
  /// beta_n, 1 <= n <= max_degree
  Scalar beta(int n) const { return beta_[n - 1]; }

  bool is_symmetric() const { return alpha_.isZero(Scalar(0)); }

  /// Smallest n >= 1 with beta_n == 0, or max_degree + 1 if the family
  /// never terminates within the stored range.
  int termination_degree() const {
    for (int n = 1; n <= max_degree(); ++n) {
      if (beta(n) == Scalar(0)) return n;
    }
    return max_degree() + 1;
  }

  RecurrenceCoefficients truncated(int degree) const {
    return RecurrenceCoefficients(alpha_.head(degree), beta_.head(degree));
  }

 private:
  Vector<Scalar> alpha_;
  Vector<Scalar> beta_;
};

/// 1 + q + ... + q^{n-1}, summed term by term so that q = 1 is exact.
template <typename Scalar>
Scalar q_bracket(int n, Scalar q) {
  Scalar sum(0);
  Scalar term(1);
  for (int j = 0; j < n; ++j) {
    sum += term;
    term *= q;
  }
  return sum;
}

/// Recurrence of the q-deformed Hermite family: alpha = 0, beta_n = [n]_q.
template <typename Scalar>
RecurrenceCoefficients<Scalar> build_q_recurrence(Scalar q, int max_degree) {
  if (!(q >= Scalar(-1) && q <= Scalar(1))) {
    throw std::domain_error("build_q_recurrence: q must lie in [-1, 1]");
  }
  if (max_degree < 1) {
    throw std::invalid_argument("build_q_recurrence: max_degree must be positive");
  }
  Vector<Scalar> beta(max_degree);
  for (int n = 1; n <= max_degree; ++n) beta[n - 1] = q_bracket(n, q);
  return RecurrenceCoefficients<Scalar>(Vector<Scalar>::Zero(max_degree), std::move(beta));
}

/// Monic Chebyshev polynomials of the first kind, 2^{1-n} T_n:
/// beta_1 = 1/2 and beta_n = 1/4 afterwards.  The arcsine law has variance 1/2.
template <typename Scalar>
RecurrenceCoefficients<Scalar> chebyshev_recurrence(int max_degree) {
  if (max_degree < 1) {
    throw std::invalid_argument("chebyshev_recurrence: max_degree must be positive");
  }
  Vector<Scalar> beta = Vector<Scalar>::Constant(max_degree, Scalar(1) / 4);
  beta[0] = Scalar(1) / 2;
  return RecurrenceCoefficients<Scalar>(Vector<Scalar>::Zero(max_degree), std::move(beta));
}

namespace detail {

template <typename Scalar>
void check_degree(const RecurrenceCoefficients<Scalar> &rec, int n, const char *what) {
  if (n < 0 || n > rec.max_degree()) {
    throw std::out_of_range(std::string(what) + ": degree " + std::to_string(n) + " outside [0, " +
                            std::to_string(rec.max_degree()) + "]");
  }
}

}  // namespace detail

/// Q_0(x) .. Q_n(x) by forward recurrence.
template <typename Scalar>
Vector<Scalar> eval_monic_all(const RecurrenceCoefficients<Scalar> &rec, int n, Scalar x) {
  detail::check_degree(rec, n, "eval_monic");
  Vector<Scalar> values(n + 1);
  values[0] = Scalar(1);
  if (n >= 1) values[1] = x - rec.alpha(0);
  for (int k = 1; k < n; ++k) {
    values[k + 1] = (x - rec.alpha(k)) * values[k] - rec.beta(k) * values[k - 1];
  }
  return values;
}

template <typename Scalar>
Scalar eval_monic(const RecurrenceCoefficients<Scalar> &rec, int n, Scalar x) {
  return eval_monic_all(rec, n, x)[n];
}

/// ||Q_n||^2 = beta_1 * ... * beta_n against the (probability) orthogonality
/// measure.
template <typename Scalar>
Scalar norm_squared(const RecurrenceCoefficients<Scalar> &rec, int n) {
  detail::check_degree(rec, n, "norm_squared");
  Scalar product(1);
  for (int k = 1; k <= n; ++k) product *= rec.beta(k);
  return product;
}

/*
 * Applies multiplication by x to a polynomial given by its coefficients in
 * the Q basis:  x Q_j = Q_{j+1} + alpha_j Q_j + beta_j Q_{j-1}.
 * The result has one more coefficient than the input.
 */
template <typename Scalar>
Vector<Scalar> multiply_by_x(const RecurrenceCoefficients<Scalar> &rec,
                             const Vector<Scalar> &coefficients) {
  const int degree = static_cast<int>(coefficients.size()) - 1;
  if (degree + 1 > rec.max_degree()) {
    throw std::out_of_range("multiply_by_x: result degree exceeds max_degree");
  }
  Vector<Scalar> out = Vector<Scalar>::Zero(degree + 2);
  for (int j = 0; j <= degree; ++j) {
    const Scalar c = coefficients[j];
    out[j + 1] += c;
    out[j] += rec.alpha(j) * c;
    if (j >= 1) out[j - 1] += rec.beta(j) * c;
  }
  return out;
}

/// Coefficients a_0..a_k with x^k = sum_j a_j Q_j(x).
template <typename Scalar>
Vector<Scalar> expand_monomial(const RecurrenceCoefficients<Scalar> &rec, int k) {
  detail::check_degree(rec, k, "expand_monomial");
  Vector<Scalar> coefficients = Vector<Scalar>::Ones(1);
  for (int step = 0; step < k; ++step) {
    coefficients = multiply_by_x(rec, coefficients);
  }
  return coefficients;
}

/// T_n(x) via T_{n+1} = 2x T_n - T_{n-1}.
template <typename Scalar>
Scalar chebyshev_t(int n, Scalar x) {
  if (n < 0) throw std::out_of_range("chebyshev_t: negative degree");
  if (n == 0) return Scalar(1);
  Scalar previous(1);
  Scalar current = x;
  for (int k = 1; k < n; ++k) {
    const Scalar next = 2 * x * current - previous;
    previous = current;
    current = next;
  }
  return current;
}

}  // namespace qchain

#endif  // QCHAIN_ORTHOPOLY_HPP_

#ifndef QCHAIN_MOMENTS_HPP_
#define QCHAIN_MOMENTS_HPP_

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qchain/kernels.hpp"
#include "qchain/least_squares.hpp"

namespace qchain {

/// Tolerance ladder.
struct Tolerances {
  static constexpr double exact = 1e-12;        // 2x2 arithmetic
  static constexpr double quadrature = 1e-10;   // identities exact on the node set
  static constexpr double fitted = 1e-8;        // least-squares quantities
  static constexpr double gating = 1e-7;        // linear-bridge applicability
  static constexpr double rank_cutoff = 1e-10;  // relative singular value cutoff
};

namespace detail {

template <typename Scalar>
Vector<Scalar> node_power(const TransitionKernel<Scalar> &k, int power) {
  return k.nodes().array().pow(power).matrix();
}

template <typename Scalar>
Matrix<Scalar> matrix_power(const Matrix<Scalar> &P, int steps) {
  Matrix<Scalar> out = Matrix<Scalar>::Identity(P.rows(), P.cols());
  for (int s = 0; s < steps; ++s) out = out * P;
  return out;
}

}  // namespace detail

/// Component i: E(X_1^power | X_0 = x_i).
template <typename Scalar>
Vector<Scalar> conditional_moment(const TransitionKernel<Scalar> &k, int power) {
  if (power < 0) throw std::out_of_range("conditional_moment: negative power");
  return k.matrix() * detail::node_power(k, power);
}

/*
 * E(X_position^power | X_0 = x_i, X_span = x_j) on every node pair, together
 * with the joint law pi_ij = P(X_0 = x_i, X_span = x_j).  Pairs with pi_ij == 0
 * are undefined: their value is NaN and their weight zero.
 */
template <typename Scalar>
struct BridgeMoments {
  Matrix<Scalar> values;
  Matrix<Scalar> pair_weights;
};

template <typename Scalar>
BridgeMoments<Scalar> bridge_moment(const TransitionKernel<Scalar> &k, int power, int position = 1,
                                    int span = 2) {
  if (span < 1 || position < 0 || position > span) {
    throw std::out_of_range("bridge_moment: need 0 <= position <= span, span >= 1");
  }
  const Matrix<Scalar> left = detail::matrix_power(k.matrix(), position);
  const Matrix<Scalar> right = detail::matrix_power(k.matrix(), span - position);
  const Matrix<Scalar> through = left * right;
  const Matrix<Scalar> numerator = left * detail::node_power(k, power).asDiagonal() * right;
  BridgeMoments<Scalar> out{Matrix<Scalar>(k.size(), k.size()), k.weights().asDiagonal() * through};
  const Scalar nan = std::numeric_limits<Scalar>::quiet_NaN();
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    for (Eigen::Index j = 0; j < k.size(); ++j) {
      if (through(i, j) > Scalar(0)) {
        out.values(i, j) = numerator(i, j) / through(i, j);
      } else {
        out.values(i, j) = nan;
        out.pair_weights(i, j) = Scalar(0);
      }
    }
  }
  return out;
}

template <typename Scalar = double>
struct LinearFit {
  Scalar a;  // coefficient of x + y
  Scalar b;  // constant
  Scalar residual;
  int null_space_dim;
};

/// a x + b y + c, for bridges whose endpoints play asymmetric roles.
template <typename Scalar = double>
struct AffineFit {
  Scalar a;
  Scalar b;
  Scalar c;
  Scalar residual;
  int null_space_dim;
};

/*
 * Q(x, y) = A (x^2 + y^2) + B x y + C + D (x + y).  When the design is rank
 * deficient (two-valued chains, where x^2 == 1) the coefficients are the
 * minimum-norm representative and null_space spans the other solutions, in
 * (A, B, C, D) coordinates.
 */
template <typename Scalar = double>
struct QuadraticFit {
  Scalar A;
  Scalar B;
  Scalar C;
  Scalar D;
  Scalar residual;
  int null_space_dim;
  Matrix<Scalar> null_space;

  bool unique() const { return null_space_dim == 0; }
  Vector<Scalar> coefficients() const {
    Vector<Scalar> c(4);
    c << A, B, C, D;
    return c;
  }
};

namespace detail {

template <typename Scalar>
struct PairDesign {
  Matrix<Scalar> design;
  Vector<Scalar> rhs;
  Vector<Scalar> weights;
};

/// One row per defined node pair; `basis(x, y)` yields the design row.
template <typename Scalar, typename Basis>
PairDesign<Scalar> pair_design(const Matrix<Scalar> &values, const DiscreteMeasure<Scalar> &m,
                               const Matrix<Scalar> &pair_weights, int columns, Basis basis) {
  const Eigen::Index n = m.size();
  if (values.rows() != n || values.cols() != n || pair_weights.rows() != n ||
      pair_weights.cols() != n) {
    throw std::invalid_argument("fit: bridge and measure sizes disagree");
  }
  Eigen::Index rows = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (pair_weights(i, j) > Scalar(0)) ++rows;
  PairDesign<Scalar> out{Matrix<Scalar>(rows, columns), Vector<Scalar>(rows), Vector<Scalar>(rows)};
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!(pair_weights(i, j) > Scalar(0))) continue;
      out.design.row(row) = basis(m.nodes()[i], m.nodes()[j]);
      out.rhs[row] = values(i, j);
      out.weights[row] = pair_weights(i, j);
      ++row;
    }
  }
  return out;
}

}  // namespace detail

template <typename Scalar>
LinearFit<Scalar> fit_linear(const Matrix<Scalar> &bridge, const DiscreteMeasure<Scalar> &m,
                             const Matrix<Scalar> &pair_weights) {
  auto pd = detail::pair_design(bridge, m, pair_weights, 2, [](Scalar x, Scalar y) {
    Eigen::Matrix<Scalar, 1, 2> row;
    row << x + y, Scalar(1);
    return row;
  });
  if (pd.rhs.size() < 4) throw std::invalid_argument("fit_linear: fewer than 4 node pairs");
  const auto ls =
      weighted_least_squares(pd.design, pd.rhs, pd.weights, Scalar(Tolerances::rank_cutoff));
  return {ls.coefficients[0], ls.coefficients[1], ls.residual, 2 - ls.rank};
}

template <typename Scalar>
AffineFit<Scalar> fit_affine(const Matrix<Scalar> &bridge, const DiscreteMeasure<Scalar> &m,
                             const Matrix<Scalar> &pair_weights) {
  auto pd = detail::pair_design(bridge, m, pair_weights, 3, [](Scalar x, Scalar y) {
    Eigen::Matrix<Scalar, 1, 3> row;
    row << x, y, Scalar(1);
    return row;
  });
  if (pd.rhs.size() < 4) throw std::invalid_argument("fit_affine: fewer than 4 node pairs");
  const auto ls =
      weighted_least_squares(pd.design, pd.rhs, pd.weights, Scalar(Tolerances::rank_cutoff));
  return {ls.coefficients[0], ls.coefficients[1], ls.coefficients[2], ls.residual, 3 - ls.rank};
}

template <typename Scalar>
QuadraticFit<Scalar> fit_quadratic(const Matrix<Scalar> &bridge, const DiscreteMeasure<Scalar> &m,
                                   const Matrix<Scalar> &pair_weights) {
  auto pd = detail::pair_design(bridge, m, pair_weights, 4, [](Scalar x, Scalar y) {
    Eigen::Matrix<Scalar, 1, 4> row;
    row << x * x + y * y, x * y, Scalar(1), x + y;
    return row;
  });
  if (pd.rhs.size() < 4) throw std::invalid_argument("fit_quadratic: fewer than 4 node pairs");
  const auto ls =
      weighted_least_squares(pd.design, pd.rhs, pd.weights, Scalar(Tolerances::rank_cutoff));
  return {ls.coefficients[0], ls.coefficients[1], ls.coefficients[2], ls.coefficients[3],
          ls.residual,        4 - ls.rank,        ls.null_space};
}

/// Weighted RMS residual of the best linear regression E(X_1 | X_0, X_2).
template <typename Scalar>
Scalar linear_bridge_residual(const TransitionKernel<Scalar> &k) {
  const auto bridge = bridge_moment(k, 1);
  return fit_linear(bridge.values, k.measure(), bridge.pair_weights).residual;
}

template <typename Scalar>
QuadraticFit<Scalar> quadratic_bridge_fit(const TransitionKernel<Scalar> &k) {
  const auto bridge = bridge_moment(k, 2);
  return fit_quadratic(bridge.values, k.measure(), bridge.pair_weights);
}

enum class ABoundCase { upper_branch, lower_branch, violation };

inline const char *to_string(ABoundCase c) {
  switch (c) {
    case ABoundCase::upper_branch:
      return "upper_branch";
    case ABoundCase::lower_branch:
      return "lower_branch";
    case ABoundCase::violation:
      return "violation";
  }
  return "unknown";
}

/// Which member of a non-unique solution family the report was evaluated on.
enum class Representative { least_squares, main_assumption, degenerate };

inline const char *to_string(Representative r) {
  switch (r) {
    case Representative::least_squares:
      return "least_squares";
    case Representative::main_assumption:
      return "main_assumption";
    case Representative::degenerate:
      return "degenerate";
  }
  return "unknown";
}

template <typename Scalar = double>
struct ConstraintReport {
  Scalar r;
  Scalar r2;
  Scalar A, B, C, D;
  Scalar C_identity_gap;       // |C - (1 - 2A - B r2)|
  Scalar main_assumption_gap;  // |A (r^2 + 1/r^2) + B - 1|
  Scalar degenerate_gap;       // |2A + B r^2 - 1|
  Scalar D_magnitude;
  ABoundCase A_bound_case;
  std::optional<Scalar> q_value;
  Representative representative;
  int null_space_dim;

  Scalar upper_threshold() const { return Scalar(1) / (Scalar(1) + r * r); }
  Scalar lower_threshold() const { return r * r / (Scalar(1) + r * r * r * r); }
};

/*
 * Evaluates the constraints on the fitted Q.  For a non-unique fit the
 * representative is moved (by the smallest null-space step) onto
 * A (r^2 + 1/r^2) + B = 1 when that is reachable, else onto 2A + B r^2 = 1.
 */
template <typename Scalar>
ConstraintReport<Scalar> constraint_report(const QuadraticFit<Scalar> &fit, Scalar r, Scalar r2,
                                           Scalar boundary_tolerance = Scalar(1e-9)) {
  using std::abs;
  if (!(r != Scalar(0) && 2 * abs(r) < Scalar(1) + r2)) {
    throw std::domain_error("constraint_report: need r != 0 and 2|r| < 1 + r2");
  }
  const Scalar rr = r * r;
  Vector<Scalar> coef = fit.coefficients();
  Representative rep = Representative::least_squares;
  if (!fit.unique()) {
    Vector<Scalar> main(4), degen(4);
    main << rr + Scalar(1) / rr, Scalar(1), Scalar(0), Scalar(0);
    degen << Scalar(2), rr, Scalar(0), Scalar(0);
    auto project = [&](const Vector<Scalar> &functional) -> bool {
      const Vector<Scalar> direction = fit.null_space.transpose() * functional;
      const Scalar norm2 = direction.squaredNorm();
      if (norm2 <= Scalar(1e-20)) return false;
      const Scalar shortfall = Scalar(1) - functional.dot(coef);
      coef += fit.null_space * (direction * (shortfall / norm2));
      return true;
    };
    if (project(main)) {
      rep = Representative::main_assumption;
    } else if (project(degen)) {
      rep = Representative::degenerate;
    }
  }

  ConstraintReport<Scalar> out;
  out.r = r;
  out.r2 = r2;
  out.A = coef[0];
  out.B = coef[1];
  out.C = coef[2];
  out.D = coef[3];
  out.C_identity_gap = abs(out.C - (Scalar(1) - 2 * out.A - out.B * r2));
  out.main_assumption_gap = abs(out.A * (rr + Scalar(1) / rr) + out.B - Scalar(1));
  out.degenerate_gap = abs(2 * out.A + out.B * rr - Scalar(1));
  out.D_magnitude = abs(out.D);
  out.representative = rep;
  out.null_space_dim = fit.null_space_dim;
  if (out.A >= out.upper_threshold() - boundary_tolerance) {
    out.A_bound_case = ABoundCase::upper_branch;
  } else if (out.A <= out.lower_threshold() + boundary_tolerance) {
    out.A_bound_case = ABoundCase::lower_branch;
  } else {
    out.A_bound_case = ABoundCase::violation;
  }
  const Scalar tilde = out.A * (Scalar(1) + rr);
  if (abs(out.A - out.upper_threshold()) > Scalar(1e-12)) {
    out.q_value = (rr - tilde) / (rr * rr * (Scalar(1) - tilde));
  }
  return out;
}

enum class VarianceKind { constant, proportional_to_square, other };

inline const char *to_string(VarianceKind k) {
  switch (k) {
    case VarianceKind::constant:
      return "constant";
    case VarianceKind::proportional_to_square:
      return "proportional_to_square";
    case VarianceKind::other:
      return "other";
  }
  return "unknown";
}

/// Var(X_1 | X_0 = x) ~ c2 x^2 + c1 x + c0.
template <typename Scalar = double>
struct VarianceClass {
  VarianceKind kind;
  Scalar c2, c1, c0;
  Scalar residual;
};

template <typename Scalar>
Vector<Scalar> conditional_variance(const TransitionKernel<Scalar> &k) {
  const Vector<Scalar> m1 = conditional_moment(k, 1);
  return conditional_moment(k, 2) - m1.cwiseProduct(m1);
}

/*
 * The two hypotheses of the dichotomy are tested node-wise first (a
 * two-point state space cannot tell x^2 from 1, and then "constant" is the
 * reading that matters); only if both fail is a full quadratic fitted.
 */
template <typename Scalar>
VarianceClass<Scalar> classify_conditional_variance(const TransitionKernel<Scalar> &k,
                                                    Scalar tol = Scalar(Tolerances::fitted)) {
  const Vector<Scalar> var = conditional_variance(k);
  const Vector<Scalar> &x = k.nodes();
  const Vector<Scalar> &w = k.weights();
  const Scalar r = k.correlation();

  const Scalar level = w.dot(var);
  const Scalar flat = (var.array() - level).abs().maxCoeff();
  if (flat < tol) return {VarianceKind::constant, Scalar(0), Scalar(0), level, flat};

  const Scalar slope = Scalar(1) - r * r;
  const Scalar square = (var - slope * x.cwiseProduct(x)).cwiseAbs().maxCoeff();
  if (square < tol) {
    return {VarianceKind::proportional_to_square, slope, Scalar(0), Scalar(0), square};
  }

  Matrix<Scalar> design(x.size(), 3);
  design.col(0) = x.cwiseProduct(x);
  design.col(1) = x;
  design.col(2).setOnes();
  const auto ls = weighted_least_squares(design, var, w, Scalar(Tolerances::rank_cutoff));
  const Scalar c2 = ls.coefficients[0], c1 = ls.coefficients[1], c0 = ls.coefficients[2];
  VarianceKind kind = VarianceKind::other;
  if (std::abs(c2) < tol && std::abs(c1) < tol) {
    kind = VarianceKind::constant;
  } else if (std::abs(c2 - slope) < tol && std::abs(c1) < tol && std::abs(c0) < tol) {
    kind = VarianceKind::proportional_to_square;
  }
  return {kind, c2, c1, c0, ls.residual};
}

/// Result of a node-wise identity battery.  `parts` names each identity and
/// its own gap; `gap` is the maximum.
template <typename Scalar = double>
struct IdentityCheck {
  bool applicable = true;
  std::string reason;
  Scalar gap = Scalar(0);
  std::vector<std::pair<std::string, Scalar>> parts;

  void add(std::string name, Scalar value) {
    gap = std::max(gap, value);
    parts.emplace_back(std::move(name), value);
  }
  static IdentityCheck not_applicable(std::string why) {
    IdentityCheck c;
    c.applicable = false;
    c.reason = std::move(why);
    c.gap = std::numeric_limits<Scalar>::quiet_NaN();
    return c;
  }
};

namespace detail {

template <typename Scalar>
std::optional<std::string> linear_gate(const TransitionKernel<Scalar> &k) {
  const Scalar residual = linear_bridge_residual(k);
  if (residual > Scalar(Tolerances::gating)) {
    std::ostringstream why;
    why << "linear bridge residual " << static_cast<double>(residual) << " exceeds "
        << Tolerances::gating;
    return why.str();
  }
  return std::nullopt;
}

/// max_i |diff_i| / (1 + |x_i|^degree): node-wise gaps on the scale of the
/// degree-`degree` quantities being compared.
template <typename Scalar>
Scalar scaled_gap(const Vector<Scalar> &diff, const Vector<Scalar> &x, int degree) {
  if (diff.size() == 0) return Scalar(0);
  const Vector<Scalar> scale = (x.array().abs().pow(degree) + Scalar(1)).matrix();
  return diff.cwiseAbs().cwiseQuotient(scale).maxCoeff();
}

}  // namespace detail

/*
 * Two-step conditional second moments:
 *   E(X_2^2|X_0) = (1+r^2) E(X_1^2|X_0) - r^2 X_0^2,
 *   E(X_2^2|X_0) = r^4 X_0^2 + 1 - r^4                  (constant variance),
 *   (1 - A(1+r^2)) E(X_1^2|X_0) = (A(1-r^2) + B r^2) X_0^2 + C + D(1+r^2) X_0.
 */
template <typename Scalar>
IdentityCheck<Scalar> check_two_step_identities(const TransitionKernel<Scalar> &k) {
  if (auto why = detail::linear_gate(k)) return IdentityCheck<Scalar>::not_applicable(*why);
  const Scalar r = k.correlation();
  const Scalar rr = r * r;
  const Vector<Scalar> x2 = detail::node_power(k, 2);
  const Vector<Scalar> one_step = conditional_moment(k, 2);
  const Vector<Scalar> two_step = k.matrix() * one_step;

  IdentityCheck<Scalar> out;
  out.add(
      "two_step_second_moment",
      detail::scaled_gap<Scalar>(two_step - ((Scalar(1) + rr) * one_step - rr * x2), k.nodes(), 2));
  if (classify_conditional_variance(k).kind == VarianceKind::constant) {
    out.add("two_step_constant_variance",
            detail::scaled_gap<Scalar>(
                two_step - rr * rr * x2 - Vector<Scalar>::Constant(k.size(), Scalar(1) - rr * rr),
                k.nodes(), 2));
  }
  const auto rep = constraint_report(quadratic_bridge_fit(k), r, kernel_power(k, 2).correlation());
  const Vector<Scalar> lhs = (Scalar(1) - rep.A * (Scalar(1) + rr)) * one_step;
  const Vector<Scalar> rhs = (rep.A * (Scalar(1) - rr) + rep.B * rr) * x2 +
                             Vector<Scalar>::Constant(k.size(), rep.C) +
                             rep.D * (Scalar(1) + rr) * k.nodes();
  out.add("past_conditioned_quadratic", detail::scaled_gap<Scalar>(lhs - rhs, k.nodes(), 2));
  return out;
}

/*
 * Third conditional moment under constant conditional variance and the main
 * constraint: the closed form
 *   E(X_1^3|X_0) = r^3 X_0^3 - (1-r^2)/r^3 (At(1+2r^4) - r^2(1+2r^2))/(1-At) X_0,
 * At = A(1+r^2), plus the two intermediate relations it is solved from.
 */
template <typename Scalar>
IdentityCheck<Scalar> check_third_moment(const TransitionKernel<Scalar> &k,
                                         const ConstraintReport<Scalar> &rep,
                                         Scalar tol = Scalar(Tolerances::fitted)) {
  if (auto why = detail::linear_gate(k)) return IdentityCheck<Scalar>::not_applicable(*why);
  if (classify_conditional_variance(k).kind != VarianceKind::constant) {
    return IdentityCheck<Scalar>::not_applicable("conditional variance is not constant");
  }
  if (!(rep.main_assumption_gap < tol)) {
    return IdentityCheck<Scalar>::not_applicable("main constraint does not hold for the fit");
  }
  const Scalar r = k.correlation();
  const Scalar rr = r * r;
  const Scalar tilde = rep.A * (Scalar(1) + rr);
  const Vector<Scalar> &x = k.nodes();
  const Vector<Scalar> x3 = detail::node_power(k, 3);
  const Vector<Scalar> one_step = conditional_moment(k, 3);
  const Vector<Scalar> two_step = k.matrix() * one_step;

  const Scalar linear = -(Scalar(1) - rr) / (rr * r) *
                        (tilde * (Scalar(1) + 2 * rr * rr) - rr * (Scalar(1) + 2 * rr)) /
                        (Scalar(1) - tilde);
  IdentityCheck<Scalar> out;
  out.add("closed_form", detail::scaled_gap<Scalar>(one_step - (rr * r * x3 + linear * x), x, 3));
  out.add(
      "forward_relation",
      detail::scaled_gap<Scalar>(
          r * one_step - two_step / (Scalar(1) + rr) - (rr * rr / (Scalar(1) + rr)) * x3, x, 3));
  out.add("bridge_relation", detail::scaled_gap<Scalar>(
                                 r * one_step - rr * (rep.A + rep.B * rr) * x3 - rep.A * two_step -
                                     (rep.B * (Scalar(1) - rr * rr) + rep.C * rr) * x,
                                 x, 3));
  return out;
}

template <typename Scalar = double>
struct MomentBoundReport {
  bool applicable = true;
  std::string reason;
  Scalar fourth_moment = Scalar(0);
  Scalar fourth_moment_bound = Scalar(0);
  // E(X_1^3 | X_0) = cubic_alpha X_0^3 + cubic_beta X_0
  Scalar cubic_alpha = Scalar(0);
  Scalar cubic_beta = Scalar(0);
  std::optional<Scalar> ratio;  // beta / (r - alpha)
  Scalar gap = Scalar(0);       // worst violation among the three assertions
};

template <typename Scalar>
MomentBoundReport<Scalar> check_moment_bounds(const TransitionKernel<Scalar> &k,
                                              Scalar tol = Scalar(Tolerances::fitted)) {
  MomentBoundReport<Scalar> out;
  if (classify_conditional_variance(k).kind != VarianceKind::constant) {
    out.applicable = false;
    out.reason = "conditional variance is not constant";
    out.gap = std::numeric_limits<Scalar>::quiet_NaN();
    return out;
  }
  using std::abs;
  const Scalar r = k.correlation();
  const Scalar ar = abs(r);
  out.fourth_moment = moment(k.measure(), 4);
  out.fourth_moment_bound = 32 * (r * r + 2 * ar + 2) / ((1 - ar) * r * r * r * r);
  out.gap = std::max(Scalar(0), out.fourth_moment - out.fourth_moment_bound);

  Matrix<Scalar> design(k.size(), 2);
  design.col(0) = detail::node_power(k, 3);
  design.col(1) = k.nodes();
  const auto ls = weighted_least_squares(design, conditional_moment(k, 3), k.weights(),
                                         Scalar(Tolerances::rank_cutoff));
  out.cubic_alpha = ls.coefficients[0];
  out.cubic_beta = ls.coefficients[1];
  if (abs(r - out.cubic_alpha) < tol) {
    out.reason = "alpha equals r; ratio undefined";
    return out;
  }
  const Scalar ratio = out.cubic_beta / (r - out.cubic_alpha);
  out.ratio = ratio;
  out.gap = std::max(out.gap, std::max(Scalar(0), Scalar(1) - Scalar(1e-9) - ratio));
  out.gap = std::max(out.gap, abs(ratio - out.fourth_moment));
  return out;
}

/// Regression coefficients of X_i on (X_0, X_span) for correlations r^m.
template <typename Scalar>
std::pair<Scalar, Scalar> interpolation_coefficients(Scalar r, int i, int span) {
  auto rho = [r](int m) { return std::pow(r, m); };
  const Scalar rk = rho(span);
  const Scalar denom = Scalar(1) - rk * rk;
  return {(rho(i) - rho(span - i) * rk) / denom, (rho(span - i) - rho(i) * rk) / denom};
}

template <typename Scalar>
IdentityCheck<Scalar> check_ee1(const TransitionKernel<Scalar> &k, int i, int span) {
  if (span < 1 || i < 0 || i > span) throw std::out_of_range("check_ee1: need 0 <= i <= span");
  if (auto why = detail::linear_gate(k)) return IdentityCheck<Scalar>::not_applicable(*why);
  const auto bridge = bridge_moment(k, 1, i, span);
  const auto fit = fit_affine(bridge.values, k.measure(), bridge.pair_weights);
  const auto [a, b] = interpolation_coefficients(k.correlation(), i, span);
  IdentityCheck<Scalar> out;
  out.add("a", std::abs(fit.a - a));
  out.add("b", std::abs(fit.b - b));
  out.add("intercept", std::abs(fit.c));
  return out;
}

/// E(X_1^{k_1} ... X_d^{k_d}) by contracting along the chain from the right.
template <typename Scalar>
Scalar exact_mixed_moment(const TransitionKernel<Scalar> &k, const std::vector<int> &exponents) {
  if (exponents.empty()) throw std::invalid_argument("exact_mixed_moment: empty exponent list");
  Vector<Scalar> v = detail::node_power(k, exponents.back());
  for (auto it = exponents.rbegin() + 1; it != exponents.rend(); ++it) {
    v = detail::node_power(k, *it).cwiseProduct(k.matrix() * v);
  }
  return k.weights().dot(v);
}

/*
 * The same moment computed in coefficient space of the eigenfunction basis:
 * expand the last factor, apply the eigenvalues, multiply by the next power
 * of x through the recurrence, and read off the constant coefficient.
 */
template <typename Scalar>
Scalar spectral_mixed_moment(const SpectralModel<Scalar> &model,
                             const std::vector<int> &exponents) {
  if (exponents.empty()) throw std::invalid_argument("spectral_mixed_moment: empty exponent list");
  int total = 0;
  for (int e : exponents) {
    if (e < 0) throw std::invalid_argument("spectral_mixed_moment: negative exponent");
    total += e;
  }
  if (total > model.recurrence.max_degree() || total >= model.eigenvalues.size()) {
    throw std::out_of_range("spectral_mixed_moment: total degree exceeds the spectral model");
  }
  Vector<Scalar> coef = expand_monomial(model.recurrence, exponents.back());
  for (auto it = exponents.rbegin() + 1; it != exponents.rend(); ++it) {
    coef = coef.cwiseProduct(model.eigenvalues.head(coef.size()));
    for (int s = 0; s < *it; ++s) coef = multiply_by_x(model.recurrence, coef);
  }
  return coef[0];
}

}  // namespace qchain

#endif  // QCHAIN_MOMENTS_HPP_

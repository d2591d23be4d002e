#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "qchain/chain_sim.hpp"
#include "qchain/report.hpp"

namespace qchain {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Kernel = TransitionKernel<double>;

const std::vector<CheckInfo> kChecks{
    {"theorem1", "fitted Q has D = 0 and satisfies the main or the degenerate constraint"},
    {"t4_bounds", "fitted A lies in an allowed branch (and matches the q-family value)"},
    {"q_roundtrip", "q recovered from the fitted A equals the constructing q"},
    {"prop_t1", "conditional variance is constant or proportional to x^2 (or the contrast)"},
    {"bridge_linearity", "E(X_1 | X_0, X_2) = r/(1+r_2) (X_0 + X_2)"},
    {"two_step_identities", "two-step conditional second moments"},
    {"third_moment", "closed third conditional moment and the two relations behind it"},
    {"moment_bounds", "fourth-moment bound and beta/(r - alpha) = E X^4"},
    {"ee1", "interpolation coefficients of E(X_i | X_0, X_k)"},
    {"mixed_moments", "chain contraction equals the spectral route for mixed moments"},
    {"mc_crossval", "Monte Carlo statistics within 4 standard errors; occupancy chi-square"},
    {"chebyshev_density_equiv", "series, half-sum and rational forms of the Chebyshev density"},
    {"chebyshev_counterexample", "Chebyshev chain: eigenfunctions, nonlinear bridge, variance"},
};

CheckOutcome not_applicable(std::string why) {
  return {Status::not_applicable, std::numeric_limits<double>::quiet_NaN(), std::move(why),
          Json::object()};
}

CheckOutcome judged(double gap, double tolerance, Json details = Json::object(),
                    std::string reason = {}) {
  const bool ok = gap <= tolerance;  // NaN fails
  return {ok ? Status::pass : Status::fail, gap, std::move(reason), std::move(details)};
}

Kernel build_kernel(const GridPoint &p, NegativityPolicy policy) {
  switch (p.family) {
    case KernelFamily::mehler:
      return q_mehler_kernel(*p.q, p.r, p.n_nodes, policy);
    case KernelFamily::two_valued:
      return two_valued_kernel(*p.alpha, *p.beta);
    case KernelFamily::chebyshev:
      return chebyshev_kernel(p.r, p.n_nodes);
  }
  throw std::logic_error("unknown family");
}

bool symmetric_two_valued(const GridPoint &p) {
  return p.family == KernelFamily::two_valued && std::abs(*p.alpha - *p.beta) < 1e-14;
}

/// Families whose bridge regression is linear by construction.
bool expects_linear_bridge(const GridPoint &p) {
  return p.family == KernelFamily::mehler || symmetric_two_valued(p);
}

/// The q this point should realize, if any.
std::optional<double> expected_q(const GridPoint &p) {
  if (p.family == KernelFamily::mehler) return p.q;
  if (symmetric_two_valued(p)) return -1.0;
  return std::nullopt;
}

std::optional<std::string> gate(const Kernel &k) {
  const double residual = linear_bridge_residual(k);
  if (residual > Tolerances::gating) {
    std::ostringstream why;
    why << "linear bridge residual " << residual << " exceeds " << Tolerances::gating;
    return why.str();
  }
  return std::nullopt;
}

ConstraintReport<double> fitted_report(const Kernel &k) {
  return constraint_report(quadratic_bridge_fit(k), k.correlation(),
                           kernel_power(k, 2).correlation());
}

CheckOutcome from_identity(const IdentityCheck<double> &c, double tolerance) {
  if (!c.applicable) {
    auto out = not_applicable(c.reason);
    out.details = to_json(c);
    return out;
  }
  return judged(c.gap, tolerance, to_json(c));
}

CheckOutcome theorem1(const Kernel &k, const GridPoint &, const Scenario &, double tol) {
  if (auto why = gate(k)) return not_applicable(*why);
  const auto fit = quadratic_bridge_fit(k);
  const auto rep = constraint_report(fit, k.correlation(), kernel_power(k, 2).correlation());
  const double gap = std::max(
      {rep.D_magnitude, std::min(rep.main_assumption_gap, rep.degenerate_gap), rep.C_identity_gap});
  return judged(gap, tol, {{"fit", to_json(fit)}, {"constraints", to_json(rep)}});
}

CheckOutcome t4_bounds(const Kernel &k, const GridPoint &p, const Scenario &, double tol) {
  if (auto why = gate(k)) return not_applicable(*why);
  const auto rep = fitted_report(k);
  const double lower = rep.lower_threshold(), upper = rep.upper_threshold();
  Json details{{"A", rep.A},
               {"lower_threshold", lower},
               {"upper_threshold", upper},
               {"A_bound_case", to_string(rep.A_bound_case)}};
  double gap = 0.0;
  if (auto q = expected_q(p)) {
    const double r = k.correlation(), rr = r * r;
    const double expected = rr * (1 - *q * rr) / ((1 + rr) * (1 - *q * rr * rr));
    details["A_expected"] = expected;
    gap = std::max(std::abs(rep.A - expected), std::max(0.0, rep.A - lower));
  } else {
    gap = std::max(0.0, std::min(rep.A - lower, upper - rep.A));
  }
  return judged(gap, tol, std::move(details));
}

CheckOutcome q_roundtrip(const Kernel &k, const GridPoint &p, const Scenario &, double tol) {
  const auto q = expected_q(p);
  if (!q) return not_applicable("no constructing q for this family member");
  if (auto why = gate(k)) return not_applicable(*why);
  const auto rep = fitted_report(k);
  Json details{{"q_expected", *q}, {"A", rep.A}};
  if (!rep.q_value) return judged(kInf, tol, details, "A sits at 1/(1+r^2): q undefined");
  details["q_value"] = *rep.q_value;
  return judged(std::abs(*rep.q_value - *q), tol, std::move(details));
}

CheckOutcome prop_t1(const Kernel &k, const GridPoint &p, const Scenario &, double tol) {
  const double residual = linear_bridge_residual(k);
  const auto vc = classify_conditional_variance(k);
  const double r = k.correlation();
  Json details{{"variance", to_json(vc)}, {"linear_bridge_residual", residual}};
  if (residual <= Tolerances::gating) {
    switch (vc.kind) {
      case VarianceKind::constant:
        return judged(std::abs(vc.c0 - (1 - r * r)), tol, std::move(details));
      case VarianceKind::proportional_to_square:
        return judged(std::abs(vc.c2 - (1 - r * r)), tol, std::move(details));
      case VarianceKind::other:
        return judged(kInf, tol, std::move(details),
                      "linear bridge but conditional variance is neither constant nor x^2");
    }
  }
  if (p.family != KernelFamily::chebyshev) {
    return not_applicable("bridge regression is not linear; the dichotomy does not apply");
  }
  // The Chebyshev chain: r here is the construction parameter, E(X_1|X_0) = r/2 X_0.
  const double rc = k.r();
  if (vc.kind != VarianceKind::other) {
    return judged(
        kInf, tol, std::move(details),
        "Chebyshev conditional variance classified as " + std::string(to_string(vc.kind)));
  }
  const double gap = std::max(
      {std::abs(vc.c2 - rc * rc / 4), std::abs(vc.c1), std::abs(vc.c0 - (0.5 - rc * rc / 4))});
  details["expected"] = {rc * rc / 4, 0.0, 0.5 - rc * rc / 4};
  return judged(gap, tol, std::move(details), "nonlinear bridge; variance class other as expected");
}

CheckOutcome bridge_linearity(const Kernel &k, const GridPoint &p, const Scenario &, double tol) {
  const auto bridge = bridge_moment(k, 1);
  const auto fit = fit_linear(bridge.values, k.measure(), bridge.pair_weights);
  const double r2 = kernel_power(k, 2).correlation();
  const double expected = k.correlation() / (1 + r2);
  Json details{{"fit", to_json(fit)}, {"a_expected", expected}};
  if (!expects_linear_bridge(p) && fit.residual > Tolerances::gating) {
    std::ostringstream why;
    why << "regression on the neighbours is not linear (residual " << fit.residual << ")";
    auto out = not_applicable(why.str());
    out.details = std::move(details);
    return out;
  }
  const double gap = std::max({fit.residual, std::abs(fit.a - expected), std::abs(fit.b)});
  return judged(gap, tol, std::move(details));
}

CheckOutcome two_step(const Kernel &k, const GridPoint &, const Scenario &, double tol) {
  return from_identity(check_two_step_identities(k), tol);
}

CheckOutcome third_moment(const Kernel &k, const GridPoint &, const Scenario &, double tol) {
  if (auto why = gate(k)) return not_applicable(*why);
  return from_identity(check_third_moment(k, fitted_report(k)), tol);
}

CheckOutcome moment_bounds(const Kernel &k, const GridPoint &, const Scenario &, double tol) {
  const auto rep = check_moment_bounds(k);
  if (!rep.applicable) {
    auto out = not_applicable(rep.reason);
    out.details = to_json(rep);
    return out;
  }
  return judged(rep.gap, tol, to_json(rep), rep.reason);
}

CheckOutcome ee1(const Kernel &k, const GridPoint &, const Scenario &, double tol) {
  if (auto why = gate(k)) return not_applicable(*why);
  Json details = Json::object();
  double gap = 0.0;
  for (auto [i, span] : {std::pair{1, 2}, std::pair{1, 3}, std::pair{2, 3}}) {
    const auto c = check_ee1(k, i, span);
    details[std::to_string(i) + "," + std::to_string(span)] = to_json(c);
    gap = std::max(gap, c.gap);
  }
  return judged(gap, tol, std::move(details));
}

void exponent_tuples(int max_length, int max_total, std::vector<std::vector<int>> &out) {
  std::vector<int> current;
  std::function<void(int)> extend = [&](int left) {
    if (!current.empty()) out.push_back(current);
    if (static_cast<int>(current.size()) == max_length) return;
    for (int e = 0; e <= left; ++e) {
      current.push_back(e);
      extend(left - e);
      current.pop_back();
    }
  };
  extend(max_total);
}

CheckOutcome mixed_moments(const Kernel &k, const GridPoint &, const Scenario &, double tol) {
  std::vector<std::vector<int>> tuples;
  exponent_tuples(3, 6, tuples);
  double gap = 0.0;
  Json worst = Json::object();
  for (const auto &t : tuples) {
    const double exact = exact_mixed_moment(k, t);
    const double spectral = spectral_mixed_moment(k.spectral(), t);
    const double diff = std::abs(exact - spectral);
    if (diff > gap || worst.empty()) {
      gap = std::max(gap, diff);
      worst = {{"exponents", t}, {"contraction", exact}, {"spectral", spectral}};
    }
  }
  return judged(gap, tol, {{"tuples", tuples.size()}, {"worst", worst}});
}

const std::vector<std::vector<int>> kMcMoments{{1},    {2},    {3},    {4},       {1, 1},
                                               {2, 2}, {1, 2}, {3, 1}, {1, 1, 1}, {2, 0, 2}};
constexpr double kMcSigmas = 4.0;
constexpr double kMcCellAllowance = 0.01;
constexpr double kChiSquareLevel = 0.999;
constexpr double kChiSquareAllowance = 0.05;

CheckOutcome mc_crossval(const Kernel &k, const GridPoint &, const Scenario &s, double tol) {
  McSettings settings = s.mc.value_or(McSettings{});
  if (settings.seeds.empty()) {
    for (std::size_t i = 1; i <= kDefaultMcSeeds; ++i) settings.seeds.push_back(i);
  }
  const auto id = kernel_id(k);
  const std::size_t stride = decorrelation_stride(k);

  std::vector<double> exact_corr;
  for (int lag = 1; lag <= 3; ++lag) exact_corr.push_back(kernel_power(k, lag).correlation());
  std::vector<double> exact_moment;
  for (const auto &t : kMcMoments) exact_moment.push_back(exact_mixed_moment(k, t));
  const Vector<double> exact_cond1 = conditional_moment(k, 1);
  const Vector<double> exact_cond2 = conditional_moment(k, 2);

  std::size_t cells = 0, misses = 0, chi_failures = 0;
  Json worst = nullptr;
  double worst_z = 0.0;
  Json chi = Json::array();
  auto score = [&](const Estimate &e, double exact, const std::string &what, std::uint64_t seed) {
    if (!e.defined) return;
    ++cells;
    // roundoff floor for statistics constant on the support (X^2 on +-1)
    const double se = std::max(e.standard_error, 1e-12 * (1.0 + std::abs(exact)));
    const double z = std::abs(e.value - exact) / se;
    if (z > kMcSigmas) ++misses;
    if (z > worst_z || worst.is_null()) {
      worst_z = std::max(worst_z, z);
      worst = {{"statistic", what},
               {"seed", seed},
               {"estimate", e.value},
               {"exact", exact},
               {"standard_error", e.standard_error}};
    }
  };

  for (const auto seed : settings.seeds) {
    const auto path = sample_path(k, settings.length, seed, id);
    const auto values = path_values(path, k.nodes());
    for (std::size_t lag = 1; lag <= 3; ++lag) {
      score(empirical_correlation(values, lag), exact_corr[lag - 1],
            "correlation lag " + std::to_string(lag), seed);
    }
    for (std::size_t m = 0; m < kMcMoments.size(); ++m) {
      score(empirical_mixed_moment(values, kMcMoments[m]), exact_moment[m],
            "mixed moment " + Json(kMcMoments[m]).dump(), seed);
    }
    const auto cond1 = empirical_conditional_moment(path, k.nodes(), 1);
    const auto cond2 = empirical_conditional_moment(path, k.nodes(), 2);
    for (Eigen::Index i = 0; i < k.size(); ++i) {
      score(cond1[i], exact_cond1[i], "E(X_1|state " + std::to_string(i) + ")", seed);
      score(cond2[i], exact_cond2[i], "E(X_1^2|state " + std::to_string(i) + ")", seed);
    }
    const auto occ = occupancy_chi_square(path, k.weights(), stride);
    const double limit = occ.degrees_of_freedom > 0
                             ? chi_square_quantile(kChiSquareLevel, occ.degrees_of_freedom)
                             : kInf;
    if (occ.statistic > limit) ++chi_failures;
    chi.push_back({{"seed", seed},
                   {"statistic", occ.statistic},
                   {"dof", occ.degrees_of_freedom},
                   {"limit", limit}});
  }
  const double miss_fraction = cells ? static_cast<double>(misses) / cells : 0.0;
  const double chi_fraction = static_cast<double>(chi_failures) / settings.seeds.size();
  const double gap = std::max(miss_fraction - kMcCellAllowance, chi_fraction - kChiSquareAllowance);
  Json details{{"length", settings.length},
               {"seeds", settings.seeds.size()},
               {"rng", kRandomEngineName},
               {"cells", cells},
               {"misses", misses},
               {"miss_fraction", miss_fraction},
               {"sigmas", kMcSigmas},
               {"worst", worst},
               {"occupancy_thinning", stride},
               {"chi_square_failures", chi_failures},
               {"chi_square", chi}};
  return judged(gap, tol, std::move(details),
                "gap = max(miss fraction - 0.01, chi-square failure fraction - 0.05)");
}

CheckOutcome chebyshev_density_equiv(const Kernel &, const GridPoint &p, const Scenario &,
                                     double tol) {
  const double r = p.r;
  constexpr int kGrid = 101;
  constexpr int kTerms = 60;
  double series_gap = 0.0, rational_gap = 0.0, printed_gap = 0.0, smallest = kInf;
  for (int a = 0; a < kGrid; ++a) {
    for (int b = 0; b < kGrid; ++b) {
      const double x = -1.0 + 2.0 * a / (kGrid - 1);
      const double y = -1.0 + 2.0 * b / (kGrid - 1);
      const double closed = chebyshev_density(r, x, y);
      series_gap =
          std::max(series_gap, std::abs(chebyshev_density_series(r, x, y, kTerms) - closed));
      rational_gap = std::max(rational_gap, std::abs(chebyshev_density_rational(r, x, y) - closed));
      printed_gap =
          std::max(printed_gap, std::abs(chebyshev_density_rational(r, x, y, true) - closed));
      smallest = std::min(smallest, closed);
    }
  }
  const double bound = (1 - std::abs(r)) / ((1 + std::abs(r)) * (1 + std::abs(r)));
  const double gap = std::max({series_gap, rational_gap, std::max(0.0, bound - smallest - 1e-12)});
  return judged(gap, tol,
                {{"series_terms", kTerms},
                 {"grid", kGrid},
                 {"series_gap", series_gap},
                 {"rational_gap", rational_gap},
                 {"printed_rational_gap", printed_gap},
                 {"min_density", smallest},
                 {"lower_bound", bound}});
}

/// Largest n <= 10 whose aliasing error |r|^(2N - n) stays below 1e-10.
int chebyshev_eigen_degree(double r, int n_nodes) {
  int n = std::min(10, n_nodes - 1);
  while (n > 1 && std::pow(std::abs(r), 2 * n_nodes - n) > 1e-10) --n;
  return n;
}

CheckOutcome chebyshev_counterexample(const Kernel &k, const GridPoint &p, const Scenario &,
                                      double tol) {
  const double r = k.r();
  const int degree = chebyshev_eigen_degree(r, p.n_nodes);
  double eigen_gap = 0.0;
  for (int n = 1; n <= degree; ++n) {
    Vector<double> t(k.size());
    for (Eigen::Index i = 0; i < k.size(); ++i) t[i] = chebyshev_t(n, k.nodes()[i]);
    eigen_gap =
        std::max(eigen_gap, (k.matrix() * t - 0.5 * std::pow(r, n) * t).cwiseAbs().maxCoeff());
  }
  const double residual = linear_bridge_residual(k);
  const auto vc = classify_conditional_variance(k);
  const double variance_gap = vc.kind == VarianceKind::other
                                  ? std::max({std::abs(vc.c2 - r * r / 4), std::abs(vc.c1),
                                              std::abs(vc.c0 - (0.5 - r * r / 4))})
                                  : kInf;
  const double linear_gap = residual > Tolerances::gating ? 0.0 : kInf;
  const double gap = std::max({eigen_gap, variance_gap, linear_gap});
  return judged(gap, tol,
                {{"eigenfunction_degree", degree},
                 {"eigenfunction_gap", eigen_gap},
                 {"linear_bridge_residual", residual},
                 {"variance", to_json(vc)},
                 {"lag1_correlation", k.correlation()}});
}

using CheckFn = CheckOutcome (*)(const Kernel &, const GridPoint &, const Scenario &, double);

const std::map<std::string, CheckFn> kDispatch{
    {"theorem1", theorem1},
    {"t4_bounds", t4_bounds},
    {"q_roundtrip", q_roundtrip},
    {"prop_t1", prop_t1},
    {"bridge_linearity", bridge_linearity},
    {"two_step_identities", two_step},
    {"third_moment", third_moment},
    {"moment_bounds", moment_bounds},
    {"ee1", ee1},
    {"mixed_moments", mixed_moments},
    {"mc_crossval", mc_crossval},
    {"chebyshev_density_equiv", chebyshev_density_equiv},
    {"chebyshev_counterexample", chebyshev_counterexample},
};

bool chebyshev_only(const std::string &check) {
  return check == "chebyshev_density_equiv" || check == "chebyshev_counterexample";
}

}  // namespace

const std::vector<CheckInfo> &registered_checks() { return kChecks; }

const CheckInfo *find_check(const std::string &name) {
  for (const auto &c : kChecks) {
    if (name == c.name) return &c;
  }
  return nullptr;
}

double default_tolerance(const std::string &check, KernelFamily family) {
  const bool two = family == KernelFamily::two_valued;
  if (check == "two_step_identities" || check == "third_moment") {
    return two ? Tolerances::exact : Tolerances::quadrature;
  }
  if (check == "ee1") return two ? Tolerances::exact : Tolerances::fitted;
  if (check == "prop_t1") return family == KernelFamily::chebyshev ? Tolerances::fitted : 1e-9;
  if (check == "mixed_moments") return 1e-9;
  if (check == "mc_crossval") return 0.0;
  if (check == "chebyshev_density_equiv") return Tolerances::quadrature;
  return Tolerances::fitted;
}

CheckOutcome evaluate_check(const std::string &check, const GridPoint &point, const Scenario &s,
                            double tolerance) {
  const auto fn = kDispatch.find(check);
  if (fn == kDispatch.end()) throw std::invalid_argument("unknown check " + check);
  if (chebyshev_only(check) && point.family != KernelFamily::chebyshev) {
    return not_applicable("check applies to the chebyshev family only");
  }
  try {
    const Kernel k = build_kernel(point, NegativityPolicy::clip_or_abort);
    return fn->second(k, point, s, tolerance);
  } catch (const KernelConstructionError &e) {
    CheckOutcome out{Status::fail, kInf, std::string("kernel construction failed: ") + e.what(),
                     Json::object()};
    if (point.family == KernelFamily::mehler && check != "mc_crossval") {
      try {
        const Kernel signed_k = build_kernel(point, NegativityPolicy::keep_signed);
        const auto diag = fn->second(signed_k, point, s, tolerance);
        out.details["signed_operator"] = {
            {"status", to_string(diag.status)},
            {"gap", std::isfinite(diag.gap) ? Json(diag.gap) : Json(nullptr)},
            {"negativity_defect", signed_k.negativity_defect()}};
      } catch (const std::exception &inner) {
        out.details["signed_operator"] = {{"error", inner.what()}};
      }
    }
    return out;
  } catch (const std::exception &e) {
    return {Status::fail, kInf, std::string("evaluation failed: ") + e.what(), Json::object()};
  }
}

}  // namespace qchain

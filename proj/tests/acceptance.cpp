#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qchain/chain_sim.hpp"
#include "qchain/kernels.hpp"
#include "qchain/moments.hpp"
#include "qchain/report.hpp"
#include "qchain/scenario.hpp"

using namespace qchain;

namespace {

using Clock = std::chrono::steady_clock;

const std::vector<double> kGridQ{-1.0, -0.5, 0.0, 0.5, 1.0};
const std::vector<double> kGridR{-0.6, -0.3, 0.3, 0.6, 0.9};
constexpr int kNodes = 32;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(3);
  out << v;
  return out.str();
}

std::string point_name(double q, double r) { return "q=" + fmt(q) + " r=" + fmt(r); }

struct GridKernel {
  double q, r;
  std::optional<TransitionKernel<double>> kernel;
  std::optional<TransitionKernel<double>> signed_kernel;
  std::string error;
};

std::vector<GridKernel> build_grid() {
  std::vector<GridKernel> out;
  for (double q : kGridQ) {
    for (double r : kGridR) {
      GridKernel g{q, r, std::nullopt, std::nullopt, {}};
      try {
        g.kernel = q_mehler_kernel(q, r, kNodes);
      } catch (const KernelConstructionError &e) {
        g.error = e.what();
        g.signed_kernel = q_mehler_kernel(q, r, kNodes, NegativityPolicy::keep_signed);
      }
      out.push_back(std::move(g));
    }
  }
  return out;
}

/// Collects per-point failures for one criterion and prints the verdict.
class Criterion {
 public:
  Criterion(int number, std::string title) : number_(number), title_(std::move(title)) {}

  void fail(const std::string &what) { failures_.push_back(what); }
  void note(const std::string &what) { notes_.push_back(what); }
  void expect(bool ok, const std::string &what) {
    if (!ok) fail(what);
  }

  bool finish(const std::string &summary) {
    const bool ok = failures_.empty();
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << number_ << " (" << title_
              << "): " << summary;
    if (!ok) std::cout << "; " << failures_.size() << " violation(s)";
    std::cout << '\n';
    for (const auto &f : failures_) std::cout << "    violation: " << f << '\n';
    for (const auto &n : notes_) std::cout << "    note: " << n << '\n';
    return ok;
  }

 private:
  int number_;
  std::string title_;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

ConstraintReport<double> fitted_constraints(const TransitionKernel<double> &k) {
  return constraint_report(quadratic_bridge_fit(k), k.correlation(),
                           kernel_power(k, 2).correlation());
}

std::string signed_note(const GridKernel &g, const std::string &result) {
  return point_name(g.q, g.r) + " signed operator (negativity " +
         fmt(g.signed_kernel->negativity_defect()) + "): " + result;
}

bool criterion1(const std::vector<GridKernel> &grid, double build_seconds) {
  Criterion c(1, "fitted Q has D = 0 and satisfies one of the two constraints");
  const auto start = Clock::now();
  double worst_d = 0.0, worst_gap = 0.0;
  for (const auto &g : grid) {
    if (!g.kernel) {
      c.fail(point_name(g.q, g.r) + ": " + g.error);
      const auto rep = fitted_constraints(*g.signed_kernel);
      c.note(signed_note(g, "|D| = " + fmt(rep.D_magnitude) + ", constraint gap " +
                                fmt(std::min(rep.main_assumption_gap, rep.degenerate_gap))));
      continue;
    }
    const auto rep = fitted_constraints(*g.kernel);
    const double gap = std::min(rep.main_assumption_gap, rep.degenerate_gap);
    worst_d = std::max(worst_d, rep.D_magnitude);
    worst_gap = std::max(worst_gap, gap);
    c.expect(rep.D_magnitude < 1e-8, point_name(g.q, g.r) + ": |D| = " + fmt(rep.D_magnitude));
    c.expect(gap < 1e-8, point_name(g.q, g.r) + ": constraint gap " + fmt(gap));
  }
  const double elapsed = build_seconds + seconds_since(start);
  c.expect(elapsed < 10.0, "runtime " + fmt(elapsed) + " s exceeds 10 s");
  return c.finish("max |D| " + fmt(worst_d) + ", max constraint gap " + fmt(worst_gap) +
                  " over constructible points, runtime " + fmt(elapsed) + " s");
}

double predicted_A(double q, double r) {
  const double rr = r * r;
  return rr * (1 - q * rr) / ((1 + rr) * (1 - q * rr * rr));
}

bool criterion2(const std::vector<GridKernel> &grid) {
  Criterion c(2, "fitted A follows the q-family formula and the lower branch");
  double worst = 0.0;
  for (const auto &g : grid) {
    const double expected = predicted_A(g.q, g.r);
    if (!g.kernel) {
      c.fail(point_name(g.q, g.r) + ": kernel not constructible");
      const auto rep = fitted_constraints(*g.signed_kernel);
      c.note(signed_note(g, "A error " + fmt(std::abs(rep.A - expected)) + ", branch " +
                                to_string(rep.A_bound_case)));
      continue;
    }
    const auto rep = fitted_constraints(*g.kernel);
    const double err = std::abs(rep.A - expected);
    worst = std::max(worst, err);
    const double endpoint_tol = (g.q == 1.0 || g.q == -1.0) ? 1e-10 : 1e-8;
    c.expect(err < endpoint_tol, point_name(g.q, g.r) + ": A error " + fmt(err));
    c.expect(rep.A_bound_case == ABoundCase::lower_branch,
             point_name(g.q, g.r) + ": branch " + to_string(rep.A_bound_case));
  }
  return c.finish("max |A - predicted| " + fmt(worst));
}

bool criterion3(const std::vector<GridKernel> &grid) {
  Criterion c(3, "q recovered from the fitted constraints");
  double worst = 0.0;
  for (const auto &g : grid) {
    const auto &k = g.kernel ? *g.kernel : *g.signed_kernel;
    const auto rep = fitted_constraints(k);
    const double err = rep.q_value ? std::abs(*rep.q_value - g.q) : INFINITY;
    if (!g.kernel) {
      c.fail(point_name(g.q, g.r) + ": kernel not constructible");
      c.note(signed_note(g, "q error " + fmt(err)));
      continue;
    }
    worst = std::max(worst, err);
    c.expect(err < 1e-8, point_name(g.q, g.r) + ": q error " + fmt(err));
  }
  return c.finish("max |q_fit - q| " + fmt(worst));
}

void lag_checks(Criterion &c, const TransitionKernel<double> &k, const std::string &name,
                double &worst) {
  const double r = k.r();
  for (int s = 1; s <= 8; ++s) {
    const double err = std::abs(kernel_power(k, s).correlation() - std::pow(r, s));
    worst = std::max(worst, err);
    c.expect(err < 1e-10, name + " s=" + std::to_string(s) + ": correlation error " + fmt(err));
  }
  const double err = (conditional_moment(k, 1) - r * k.nodes()).cwiseAbs().maxCoeff();
  worst = std::max(worst, err);
  c.expect(err < 1e-10, name + ": E(X_1|X_0) - r X_0 = " + fmt(err));
}

const std::vector<std::pair<double, double>> kTwoValued{{0.25, 0.25}, {0.25, 0.3}, {0.2, 0.25},
                                                        {0.2, 0.3},   {0.1, 0.6},  {0.7, 0.6}};

bool criterion4(const std::vector<GridKernel> &grid) {
  Criterion c(4, "lag-s correlations r^s and linear one-step regression");
  double worst = 0.0;
  for (const auto &g : grid) {
    if (!g.kernel) {
      c.fail(point_name(g.q, g.r) + ": kernel not constructible");
      Criterion shadow(0, "");
      double signed_worst = 0.0;
      lag_checks(shadow, *g.signed_kernel, "", signed_worst);
      c.note(signed_note(g, "worst error " + fmt(signed_worst)));
      continue;
    }
    lag_checks(c, *g.kernel, point_name(g.q, g.r), worst);
  }
  for (const auto &[a, b] : kTwoValued) {
    lag_checks(c, two_valued_kernel(a, b), "two_valued a=" + fmt(a) + " b=" + fmt(b), worst);
  }
  return c.finish("max error " + fmt(worst) + " over s <= 8");
}

bool criterion5(const std::vector<GridKernel> &grid) {
  Criterion c(5, "conditional variance dichotomy and the Chebyshev contrast");
  double worst = 0.0;
  for (const auto &g : grid) {
    if (!g.kernel) {
      c.fail(point_name(g.q, g.r) + ": kernel not constructible");
      const auto v = classify_conditional_variance(*g.signed_kernel);
      c.note(signed_note(g, std::string(to_string(v.kind)) + ", c0 error " +
                                fmt(std::abs(v.c0 - (1 - g.r * g.r)))));
      continue;
    }
    const auto v = classify_conditional_variance(*g.kernel);
    const double err = std::abs(v.c0 - (1 - g.r * g.r));
    worst = std::max(worst, err);
    c.expect(v.kind == VarianceKind::constant,
             point_name(g.q, g.r) + ": classified " + to_string(v.kind));
    c.expect(err < 1e-9, point_name(g.q, g.r) + ": c0 error " + fmt(err));
  }
  std::string contrast;
  for (double r : {0.3, 0.6}) {
    const auto k = chebyshev_kernel(r, kNodes);
    const auto v = classify_conditional_variance(k);
    const double err =
        std::max({std::abs(v.c2 - r * r / 4), std::abs(v.c1), std::abs(v.c0 - (0.5 - r * r / 4))});
    const double residual = linear_bridge_residual(k);
    c.expect(v.kind == VarianceKind::other,
             "chebyshev r=" + fmt(r) + ": classified " + to_string(v.kind));
    c.expect(err < 1e-8, "chebyshev r=" + fmt(r) + ": coefficient error " + fmt(err));
    c.expect(residual > Tolerances::gating,
             "chebyshev r=" + fmt(r) + ": bridge residual " + fmt(residual) + " passes linearity");
    contrast += "; chebyshev r=" + fmt(r) + " other (coef err " + fmt(err) + ", bridge residual " +
                fmt(residual) + ")";
  }
  return c.finish("max c0 error " + fmt(worst) + contrast);
}

bool criterion6(const std::vector<GridKernel> &grid) {
  Criterion c(6, "identity battery");
  std::map<std::string, double> worst;
  auto record = [&](const std::string &point, const std::string &name, double gap, double tol) {
    worst[name] = std::max(worst[name], gap);
    c.expect(gap < tol, point + ": " + name + " gap " + fmt(gap) + " (tol " + fmt(tol) + ")");
  };
  const std::map<std::string, double> level{{"two_step_second_moment", Tolerances::quadrature},
                                            {"two_step_constant_variance", Tolerances::quadrature},
                                            {"past_conditioned_quadratic", Tolerances::fitted},
                                            {"closed_form", Tolerances::fitted},
                                            {"forward_relation", Tolerances::quadrature},
                                            {"bridge_relation", Tolerances::fitted}};
  for (const auto &g : grid) {
    const std::string name = point_name(g.q, g.r);
    if (!g.kernel) {
      c.fail(name + ": kernel not constructible");
      const auto two = check_two_step_identities(*g.signed_kernel);
      const auto third = check_third_moment(*g.signed_kernel, fitted_constraints(*g.signed_kernel));
      c.note(signed_note(g, "two-step gap " + fmt(two.gap) + ", third-moment gap " +
                                (third.applicable ? fmt(third.gap) : third.reason)));
      continue;
    }
    const auto &k = *g.kernel;
    const auto two = check_two_step_identities(k);
    if (!two.applicable) c.fail(name + ": two-step identities not applicable: " + two.reason);
    for (const auto &[part, gap] : two.parts) record(name, part, gap, level.at(part));
    const auto third = check_third_moment(k, fitted_constraints(k));
    if (!third.applicable) c.fail(name + ": third moment not applicable: " + third.reason);
    for (const auto &[part, gap] : third.parts) record(name, part, gap, level.at(part));
    for (auto [i, span] : {std::pair{1, 2}, std::pair{1, 3}, std::pair{2, 3}}) {
      const auto ee1 = check_ee1(k, i, span);
      if (!ee1.applicable) c.fail(name + ": ee1 not applicable: " + ee1.reason);
      record(name, "ee1(" + std::to_string(i) + "," + std::to_string(span) + ")", ee1.gap,
             Tolerances::fitted);
    }
    const auto bounds = check_moment_bounds(k);
    if (!bounds.applicable) c.fail(name + ": moment bounds not applicable: " + bounds.reason);
    c.expect(bounds.fourth_moment <= bounds.fourth_moment_bound,
             name + ": E X^4 = " + fmt(bounds.fourth_moment) + " exceeds bound");
    if (bounds.ratio) {
      record(name, "ratio_identity", std::abs(*bounds.ratio - bounds.fourth_moment),
             Tolerances::fitted);
      c.expect(*bounds.ratio >= 1 - 1e-9, name + ": ratio " + fmt(*bounds.ratio) + " below 1");
    }
  }
  std::string summary = "max gaps:";
  for (const auto &[name, gap] : worst) summary += " " + name + " " + fmt(gap) + ",";
  summary.pop_back();
  return c.finish(summary);
}

bool criterion7() {
  Criterion c(7, "Chebyshev density forms and eigenfunctions");
  double series_gap = 0.0, eigen_gap = 0.0, floor_margin = INFINITY;
  for (double r : {0.3, 0.6}) {
    const double floor = (1 - std::abs(r)) / ((1 + std::abs(r)) * (1 + std::abs(r)));
    double smallest = INFINITY;
    for (int a = 0; a <= 100; ++a) {
      for (int b = 0; b <= 100; ++b) {
        const double x = -1.0 + 0.02 * a, y = -1.0 + 0.02 * b;
        const double closed = chebyshev_density(r, x, y);
        series_gap = std::max(series_gap, std::abs(chebyshev_density_series(r, x, y, 60) - closed));
        smallest = std::min(smallest, closed);
      }
    }
    floor_margin = std::min(floor_margin, smallest - floor);
    c.expect(smallest >= floor - 1e-12,
             "r=" + fmt(r) + ": minimum " + fmt(smallest) + " below " + fmt(floor));
    const auto k = chebyshev_kernel(r, kNodes);
    for (int n = 1; n <= 10; ++n) {
      Vector<double> t(k.size());
      for (Eigen::Index i = 0; i < k.size(); ++i) t[i] = chebyshev_t(n, k.nodes()[i]);
      const double gap = (k.matrix() * t - std::pow(r, n) / 2 * t).cwiseAbs().maxCoeff();
      eigen_gap = std::max(eigen_gap, gap);
      c.expect(gap < 1e-9, "r=" + fmt(r) + " n=" + std::to_string(n) + ": eigen gap " + fmt(gap));
    }
  }
  c.expect(series_gap < 1e-10, "series vs closed form gap " + fmt(series_gap));
  return c.finish("series gap " + fmt(series_gap) + ", min density margin " + fmt(floor_margin) +
                  ", eigenfunction gap " + fmt(eigen_gap));
}

std::vector<std::vector<int>> exponent_tuples() {
  std::vector<std::vector<int>> out;
  for (int d = 1; d <= 3; ++d) {
    std::vector<int> e(d, 0);
    while (true) {
      int total = 0;
      for (int v : e) total += v;
      if (total <= 6) out.push_back(e);
      int t = 0;
      while (t < d && ++e[t] > 6) e[t++] = 0;
      if (t == d) break;
    }
  }
  return out;
}

bool criterion8(const std::vector<GridKernel> &grid) {
  Criterion c(8, "mixed moments by contraction and spectral routes; Monte Carlo agreement");
  const auto start = Clock::now();
  const auto tuples = exponent_tuples();
  std::vector<std::pair<std::string, TransitionKernel<double>>> kernels;
  for (const auto &g : grid) {
    if (g.kernel) {
      kernels.emplace_back(point_name(g.q, g.r), *g.kernel);
      continue;
    }
    double gap = 0.0;
    for (const auto &e : tuples) {
      gap = std::max(gap, std::abs(exact_mixed_moment(*g.signed_kernel, e) -
                                   spectral_mixed_moment(g.signed_kernel->spectral(), e)));
    }
    c.note(signed_note(g, "no chain to sample; contraction vs spectral gap " + fmt(gap)));
  }
  for (const auto &[a, b] : kTwoValued) {
    kernels.emplace_back("two_valued a=" + fmt(a) + " b=" + fmt(b), two_valued_kernel(a, b));
  }
  for (double r : {0.3, 0.6})
    kernels.emplace_back("chebyshev r=" + fmt(r), chebyshev_kernel(r, kNodes));
  double worst = 0.0;
  for (const auto &[name, k] : kernels) {
    for (const auto &e : tuples) {
      const double exact = exact_mixed_moment(k, e);
      const double gap = std::abs(exact - spectral_mixed_moment(k.spectral(), e));
      worst = std::max(worst, gap);
      c.expect(gap < 1e-9, name + ": tuple " + Json(e).dump() + " gap " + fmt(gap));
    }
  }

  const Json config = Json::parse(R"({"scenarios": [
    {"name": "mc-mehler", "family": "mehler", "params": {"q": [-1, -0.5, 0, 0.5], "r": [-0.3, 0.6]},
     "checks": ["mc_crossval"], "mc": {"length": 1000000, "seeds": 20}},
    {"name": "mc-gaussian", "family": "mehler", "params": {"q": 1, "r": [-0.3, 0.3]},
     "checks": ["mc_crossval"], "mc": {"length": 1000000, "seeds": 20}},
    {"name": "mc-two-valued", "family": "two_valued", "params": {"alpha": [0.25, 0.2], "beta": [0.3]},
     "checks": ["mc_crossval"], "mc": {"length": 1000000, "seeds": 20}},
    {"name": "mc-chebyshev", "family": "chebyshev", "params": {"r": [0.3, 0.6]},
     "checks": ["mc_crossval"], "mc": {"length": 1000000, "seeds": 20}}]})");
  const auto entries = run_scenarios(parse_config(config), {workers_from_env(1)});
  std::size_t cells = 0, misses = 0, chi_failures = 0, seeds = 0, mc_kernels = 0;
  for (const auto &e : entries) {
    const std::string name =
        e.scenario + " r=" + fmt(e.point.r) + (e.point.q ? " q=" + fmt(*e.point.q) : std::string());
    if (!e.details.contains("cells")) {
      c.fail(name + ": " + e.reason);
      continue;
    }
    ++mc_kernels;
    cells += e.details["cells"].get<std::size_t>();
    misses += e.details["misses"].get<std::size_t>();
    chi_failures += e.details["chi_square_failures"].get<std::size_t>();
    seeds += e.details["seeds"].get<std::size_t>();
    c.expect(e.details["chi_square_failures"].get<std::size_t>() <= 1,
             name + ": occupancy chi-square failed for more than 1 of 20 seeds");
  }
  const double hit_rate = cells ? 1.0 - static_cast<double>(misses) / cells : 0.0;
  c.expect(hit_rate >= 0.99, "only " + fmt(100 * hit_rate) + "% of cells within 4 standard errors");
  const double elapsed = seconds_since(start);
  c.expect(elapsed < 120.0, "runtime " + fmt(elapsed) + " s exceeds 2 min");
  return c.finish(std::to_string(tuples.size()) + " tuples on " + std::to_string(kernels.size()) +
                  " kernels, max gap " + fmt(worst) + "; Monte Carlo " +
                  std::to_string(mc_kernels) + " kernels, " + std::to_string(cells) + " cells, " +
                  std::to_string(misses) + " beyond 4 SE, " + std::to_string(chi_failures) + "/" +
                  std::to_string(seeds) + " chi-square failures; runtime " + fmt(elapsed) + " s");
}

std::string slurp(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

int run_cli(const std::string &cli, const std::string &config, const std::filesystem::path &out) {
  const std::string command =
      "\"" + cli + "\" run \"" + config + "\" --format json --out \"" + out.string() + "\"";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool criterion9(const std::string &cli, const std::string &config) {
  Criterion c(9, "two identical CLI runs give byte-identical JSON");
  const auto dir =
      std::filesystem::temp_directory_path() / ("qchain_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const int first = run_cli(cli, config, dir / "first.json");
  const int second = run_cli(cli, config, dir / "second.json");
  const std::string a = slurp(dir / "first.json");
  const std::string b = slurp(dir / "second.json");
  std::filesystem::remove_all(dir);
  c.expect(first == 0 || first == 1, "first run exited with " + std::to_string(first));
  c.expect(second == first,
           "exit codes differ: " + std::to_string(first) + " vs " + std::to_string(second));
  c.expect(!a.empty(), "empty report");
  c.expect(a == b, "reports differ");
  return c.finish(std::to_string(a.size()) + " bytes, exit code " + std::to_string(first));
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"qchain acceptance suite"};
  std::string cli, config;
  app.add_option("--cli", cli, "qchain executable")->required();
  app.add_option("--config", config, "config used for the determinism run")->required();
  CLI11_PARSE(app, argc, argv);

  const auto start = Clock::now();
  const auto grid = build_grid();
  const double build_seconds = seconds_since(start);

  int failed = 0;
  failed += !criterion1(grid, build_seconds);
  failed += !criterion2(grid);
  failed += !criterion3(grid);
  failed += !criterion4(grid);
  failed += !criterion5(grid);
  failed += !criterion6(grid);
  failed += !criterion7();
  failed += !criterion8(grid);
  failed += !criterion9(cli, config);
  std::cout << (9 - failed) << "/9 criteria passed\n";
  return failed == 0 ? 0 : 1;
}

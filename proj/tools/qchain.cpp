#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qchain/chain_sim.hpp"
#include "qchain/report.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitIoError = 3;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Writes through a buffer so a failed open or write never leaves a partial file.
void write_output(const std::string &path, const std::string &text, bool binary = false) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw IoError("write to stdout failed");
    return;
  }
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("write to " + path + " failed");
}

qchain::TransitionKernel<double> kernel_from_flags(const std::string &family, double q, double r,
                                                   double alpha, double beta, int n_nodes) {
  switch (qchain::parse_family(family)) {
    case qchain::KernelFamily::mehler:
      return qchain::q_mehler_kernel(q, r, n_nodes);
    case qchain::KernelFamily::two_valued:
      return qchain::two_valued_kernel(alpha, beta);
    case qchain::KernelFamily::chebyshev:
      return qchain::chebyshev_kernel(r, n_nodes);
  }
  throw std::logic_error("unknown family");
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Stationary chains with linear regressions and quadratic conditional variances"};
  app.require_subcommand(0, 1);

  bool list_checks = false;
  app.add_flag("--list-checks", list_checks, "Print the registered check names and exit");

  std::string config_path, out_path, format = "json";
  std::uint64_t seed_override = 0;
  bool timings = false;
  int workers = 0;
  auto *run = app.add_subcommand("run", "Run the scenarios of a JSON config");
  run->add_option("config", config_path, "Scenario config (JSON)")->required();
  run->add_option("--format", format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  run->add_option("--out", out_path, "Report path (default: stdout)");
  auto *seed_opt = run->add_option("--seed-override", seed_override,
                                   "Replace Monte Carlo seeds with N, N+1, ...");
  run->add_flag("--timings", timings, "Include per-entry elapsed time (breaks byte-stability)");
  run->add_option("--workers", workers, "Worker threads (default: QCHAIN_WORKERS or 1)")
      ->check(CLI::PositiveNumber);

  std::string family = "mehler", kernel_out;
  double q = 0.0, r = 0.5, alpha = 0.25, beta = 0.25;
  int n_nodes = 32;
  auto add_kernel_flags = [&](CLI::App *cmd) {
    cmd->add_option("--family", family, "mehler | two_valued | chebyshev")
        ->check(CLI::IsMember({"mehler", "two_valued", "chebyshev"}));
    cmd->add_option("--q", q, "q in [-1, 1] (mehler)");
    cmd->add_option("--r", r, "Correlation parameter (mehler, chebyshev)");
    cmd->add_option("--alpha", alpha, "Leave probability of the upper state (two_valued)");
    cmd->add_option("--beta", beta, "Leave probability of the lower state (two_valued)");
    cmd->add_option("--nodes", n_nodes, "Node count")->check(CLI::Range(2, qchain::kMaxNodes));
  };
  auto *kernel = app.add_subcommand("kernel", "Print one kernel as JSON");
  add_kernel_flags(kernel);
  kernel->add_option("--out", kernel_out, "Output path (default: stdout)");

  std::size_t length = 1000;
  std::uint64_t seed = 1;
  std::string sample_format = "csv", sample_out;
  auto *sample = app.add_subcommand("sample", "Sample a stationary path");
  add_kernel_flags(sample);
  sample->add_option("--length", length, "Path length")->check(CLI::Range(2ULL, 1ULL << 40));
  sample->add_option("--seed", seed, "Seed");
  sample->add_option("--format", sample_format, "csv | binary")
      ->check(CLI::IsMember({"csv", "binary"}));
  sample->add_option("--out", sample_out, "Output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfigError;
  }

  try {
    if (list_checks) {
      for (const auto &c : qchain::registered_checks()) {
        std::cout << c.name << "\t" << c.summary << "\n";
      }
      return kExitPass;
    }
    if (*run) {
      auto scenarios = qchain::load_config(config_path);
      if (*seed_opt) qchain::apply_seed_override(scenarios, seed_override);
      qchain::RunOptions options;
      options.workers = workers > 0 ? workers : qchain::workers_from_env(1);
      const auto entries = qchain::run_scenarios(scenarios, options);
      const auto preamble = qchain::make_preamble(scenarios);
      std::ostringstream text;
      qchain::EmitOptions emit{timings};
      if (format == "csv") {
        qchain::emit_csv(entries, preamble, text, emit);
      } else {
        qchain::emit_json(entries, preamble, text, emit);
      }
      write_output(out_path, text.str());
      return qchain::any_failed(entries) ? kExitCheckFailure : kExitPass;
    }
    if (*kernel) {
      const auto k = kernel_from_flags(family, q, r, alpha, beta, n_nodes);
      write_output(kernel_out, qchain::to_json(k).dump(2) + "\n");
      return kExitPass;
    }
    if (*sample) {
      const auto k = kernel_from_flags(family, q, r, alpha, beta, n_nodes);
      const auto path = qchain::sample_path(k, length, seed, qchain::kernel_id(k));
      std::ostringstream text;
      if (sample_format == "binary") {
        qchain::write_path_binary(path, text);
      } else {
        qchain::write_path_csv(path, k.nodes(), text);
      }
      write_output(sample_out, text.str(), sample_format == "binary");
      return kExitPass;
    }
    std::cout << app.help();
    return kExitPass;
  } catch (const qchain::ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const IoError &e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const std::domain_error &e) {
    std::cerr << "invalid parameters: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const qchain::KernelConstructionError &e) {
    std::cerr << e.what() << "\n";
    return kExitCheckFailure;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

#include "qchain/report.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ostream>
#include <thread>

#include "qchain/chain_sim.hpp"

namespace qchain {

const char *to_string(Status s) {
  switch (s) {
    case Status::pass:
      return "pass";
    case Status::fail:
      return "fail";
    case Status::not_applicable:
      return "not_applicable";
  }
  return "unknown";
}

int workers_from_env(int fallback) {
  const char *text = std::getenv("QCHAIN_WORKERS");
  if (!text || !*text) return fallback;
  char *end = nullptr;
  const long value = std::strtol(text, &end, 10);
  if (*end != '\0' || value < 1 || value > 1024) return fallback;
  return static_cast<int>(value);
}

std::vector<ReportEntry> run_scenario(const Scenario &s, const RunOptions &options,
                                      std::size_t scenario_index) {
  const auto points = grid(s);
  std::vector<ReportEntry> entries(points.size() * s.checks.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t slot = next++; slot < entries.size(); slot = next++) {
      const auto &point = points[slot / s.checks.size()];
      const auto &check = s.checks[slot % s.checks.size()];
      const auto found = s.tolerances.find(check);
      const double tol =
          found != s.tolerances.end() ? found->second : default_tolerance(check, point.family);
      const auto start = std::chrono::steady_clock::now();
      auto outcome = evaluate_check(check, point, s, tol);
      const auto stop = std::chrono::steady_clock::now();
      auto &e = entries[slot];
      e.scenario = s.name;
      e.scenario_index = scenario_index;
      e.point = point;
      e.check = check;
      e.status = outcome.status;
      e.gap = outcome.gap;
      e.tolerance = tol;
      e.reason = std::move(outcome.reason);
      e.details = std::move(outcome.details);
      e.elapsed_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(options.workers, 1)), entries.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto &t : pool) t.join();
  }
  return entries;
}

std::vector<ReportEntry> run_scenarios(const std::vector<Scenario> &scenarios,
                                       const RunOptions &options) {
  std::vector<ReportEntry> out;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    auto part = run_scenario(scenarios[i], options, i);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

bool any_failed(const std::vector<ReportEntry> &entries) {
  for (const auto &e : entries) {
    if (e.status == Status::fail) return true;
  }
  return false;
}

Preamble make_preamble(const std::vector<Scenario> &scenarios) {
  Preamble p;
  p.config_hash = hex64(config_hash(scenarios));
  p.rng = kRandomEngineName;
  return p;
}

namespace {

Json optional_number(const std::optional<double> &v) { return v ? Json(*v) : Json(nullptr); }

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json preamble_json(const Preamble &p) {
  return {{"artifact", p.artifact},
          {"version", p.version},
          {"generator", p.generator},
          {"config_hash", p.config_hash},
          {"rng", p.rng}};
}

std::string number_text(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  return std::string(buf, end);
}

std::string optional_text(const std::optional<double> &v) { return v ? number_text(*v) : ""; }

}  // namespace

Json entry_json(const ReportEntry &e, const EmitOptions &options) {
  Json j{{"scenario", e.scenario},
         {"scenario_index", e.scenario_index},
         {"family", to_string(e.point.family)},
         {"q", optional_number(e.point.q)},
         {"alpha", optional_number(e.point.alpha)},
         {"beta", optional_number(e.point.beta)},
         {"r", e.point.r},
         {"n_nodes", e.point.n_nodes},
         {"check", e.check},
         {"status", to_string(e.status)},
         {"gap", finite_or_null(e.gap)},
         {"tolerance", e.tolerance},
         {"reason", e.reason},
         {"details", e.details}};
  if (options.timings) j["elapsed_ms"] = e.elapsed_ms;
  return j;
}

void emit_json(const std::vector<ReportEntry> &entries, const Preamble &preamble, std::ostream &out,
               const EmitOptions &options) {
  Json list = Json::array();
  for (const auto &e : entries) list.push_back(entry_json(e, options));
  const Json doc{{"preamble", preamble_json(preamble)}, {"entries", list}};
  out << doc.dump(2) << '\n';
}

std::string csv_field(const std::string &field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + '"';
}

void emit_csv(const std::vector<ReportEntry> &entries, const Preamble &preamble, std::ostream &out,
              const EmitOptions &options) {
  out << "# artifact=" << preamble.artifact << ",version=" << preamble.version
      << ",generator=" << preamble.generator << ",config_hash=" << preamble.config_hash
      << ",rng=" << preamble.rng << "\r\n";
  out << "scenario,family,q,alpha,beta,r,n_nodes,check,status,gap,tolerance,reason";
  if (options.timings) out << ",elapsed_ms";
  out << "\r\n";
  for (const auto &e : entries) {
    out << csv_field(e.scenario) << ',' << to_string(e.point.family) << ','
        << optional_text(e.point.q) << ',' << optional_text(e.point.alpha) << ','
        << optional_text(e.point.beta) << ',' << number_text(e.point.r) << ',' << e.point.n_nodes
        << ',' << e.check << ',' << to_string(e.status) << ',' << number_text(e.gap) << ','
        << number_text(e.tolerance) << ',' << csv_field(e.reason);
    if (options.timings) out << ',' << number_text(e.elapsed_ms);
    out << "\r\n";
  }
}

}  // namespace qchain

#ifndef QCHAIN_REPORT_HPP_
#define QCHAIN_REPORT_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qchain/scenario.hpp"

namespace qchain {

enum class Status { pass, fail, not_applicable };

const char *to_string(Status s);

struct CheckOutcome {
  Status status = Status::pass;
  double gap = 0.0;
  std::string reason;
  Json details = Json::object();
};

struct ReportEntry {
  std::string scenario;
  std::size_t scenario_index = 0;
  GridPoint point;
  std::string check;
  Status status = Status::pass;
  double gap = 0.0;
  double tolerance = 0.0;
  std::string reason;
  Json details = Json::object();
  double elapsed_ms = 0.0;
};

struct CheckInfo {
  const char *name;
  const char *summary;
};

const std::vector<CheckInfo> &registered_checks();
const CheckInfo *find_check(const std::string &name);

/// Tolerance used when the scenario does not override it.
double default_tolerance(const std::string &check, KernelFamily family);

struct RunOptions {
  int workers = 1;
};

/// QCHAIN_WORKERS when set to a positive integer, else the fallback.
int workers_from_env(int fallback = 1);

/// Exactly one entry per (grid point, check), in grid order then check order.
std::vector<ReportEntry> run_scenario(const Scenario &s, const RunOptions &options = {},
                                      std::size_t scenario_index = 0);
std::vector<ReportEntry> run_scenarios(const std::vector<Scenario> &scenarios,
                                       const RunOptions &options = {});

/// Evaluates a single check at a single point (used by run_scenario and tests).
CheckOutcome evaluate_check(const std::string &check, const GridPoint &point, const Scenario &s,
                            double tolerance);

bool any_failed(const std::vector<ReportEntry> &entries);

struct Preamble {
  std::string artifact = "qchain";
  std::string version = "0.1.0";
  std::string generator = "qchain";
  std::string config_hash;
  std::string rng;
};

Preamble make_preamble(const std::vector<Scenario> &scenarios);

struct EmitOptions {
  bool timings = false;
};

Json entry_json(const ReportEntry &e, const EmitOptions &options = {});
void emit_json(const std::vector<ReportEntry> &entries, const Preamble &preamble, std::ostream &out,
               const EmitOptions &options = {});
/// "# key=value,..." preamble line, header row, one RFC 4180 row per entry.
void emit_csv(const std::vector<ReportEntry> &entries, const Preamble &preamble, std::ostream &out,
              const EmitOptions &options = {});

std::string csv_field(const std::string &field);

}  // namespace qchain

#endif  // QCHAIN_REPORT_HPP_

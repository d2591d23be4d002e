#ifndef QCHAIN_SCENARIO_HPP_
#define QCHAIN_SCENARIO_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qchain/serialization.hpp"

namespace qchain {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct McSettings {
  std::size_t length = 1'000'000;
  std::vector<std::uint64_t> seeds;
};

/*
 * One family over a parameter grid: q x r for mehler, alpha x beta for
 * two_valued, r for chebyshev.
 */
struct Scenario {
  std::string name;
  KernelFamily family = KernelFamily::mehler;
  std::vector<double> q;
  std::vector<double> r;
  std::vector<double> alpha;
  std::vector<double> beta;
  int n_nodes = 32;
  std::vector<std::string> checks;
  std::optional<McSettings> mc;
  std::map<std::string, double> tolerances;
};

struct GridPoint {
  KernelFamily family = KernelFamily::mehler;
  std::optional<double> q;
  std::optional<double> alpha;
  std::optional<double> beta;
  double r = 0.0;
  int n_nodes = 32;
};

inline constexpr int kMaxNodes = 64;
inline constexpr std::size_t kDefaultMcSeeds = 20;

/// Accepts one scenario object or {"scenarios": [...]}; throws ConfigError.
std::vector<Scenario> parse_config(const Json &config);
std::vector<Scenario> load_config(const std::string &path);

/// Fully defaulted, key-sorted form; the hash is taken over its compact dump.
Json canonical_json(const std::vector<Scenario> &scenarios);
std::uint64_t config_hash(const std::vector<Scenario> &scenarios);
std::string hex64(std::uint64_t value);

/// Replaces every seed list with base, base + 1, ... of the same length.
void apply_seed_override(std::vector<Scenario> &scenarios, std::uint64_t base);

/// Grid order: outer loop over q (or alpha), inner over r (or beta).
std::vector<GridPoint> grid(const Scenario &s);

KernelFamily parse_family(const std::string &name);

}  // namespace qchain

#endif  // QCHAIN_SCENARIO_HPP_

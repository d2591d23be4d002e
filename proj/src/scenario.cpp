#include "qchain/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "qchain/report.hpp"

namespace qchain {

namespace {

const std::set<std::string> kScenarioKeys{"name",   "family", "params",    "n_nodes",
                                          "checks", "mc",     "tolerances"};

[[noreturn]] void fail(const std::string &where, const std::string &what) {
  throw ConfigError(where + ": " + what);
}

std::vector<double> number_list(const Json &j, const std::string &where) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array() || j.empty()) fail(where, "expected a number or a non-empty array of numbers");
  std::vector<double> out;
  for (const auto &v : j) {
    if (!v.is_number()) fail(where, "expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

void check_keys(const Json &j, const std::set<std::string> &allowed, const std::string &where) {
  for (const auto &[key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) fail(where, "unknown key \"" + key + "\"");
  }
}

void check_correlation(double r, const std::string &where) {
  if (!(std::abs(r) > 0.0 && std::abs(r) < 1.0)) fail(where, "r must satisfy 0 < |r| < 1");
}

Scenario parse_one(const Json &j, std::size_t index) {
  const std::string where = "scenario " + std::to_string(index);
  if (!j.is_object()) fail(where, "expected an object");
  check_keys(j, kScenarioKeys, where);

  Scenario s;
  if (j.contains("name")) {
    if (!j["name"].is_string()) fail(where, "name must be a string");
    s.name = j["name"].get<std::string>();
  }
  if (!j.contains("family") || !j["family"].is_string()) fail(where, "family is required");
  try {
    s.family = parse_family(j["family"].get<std::string>());
  } catch (const std::invalid_argument &e) {
    fail(where, e.what());
  }

  const Json params = j.value("params", Json::object());
  if (!params.is_object()) fail(where, "params must be an object");
  switch (s.family) {
    case KernelFamily::mehler:
      check_keys(params, {"q", "r"}, where + ".params");
      if (!params.contains("q") || !params.contains("r"))
        fail(where, "mehler needs params.q and params.r");
      s.q = number_list(params["q"], where + ".params.q");
      s.r = number_list(params["r"], where + ".params.r");
      for (double q : s.q) {
        if (!(q >= -1.0 && q <= 1.0)) fail(where, "q must lie in [-1, 1]");
      }
      for (double r : s.r) check_correlation(r, where);
      break;
    case KernelFamily::two_valued:
      check_keys(params, {"alpha", "beta"}, where + ".params");
      if (!params.contains("alpha") || !params.contains("beta")) {
        fail(where, "two_valued needs params.alpha and params.beta");
      }
      s.alpha = number_list(params["alpha"], where + ".params.alpha");
      s.beta = number_list(params["beta"], where + ".params.beta");
      for (double a : s.alpha) {
        if (!(a > 0.0 && a <= 1.0)) fail(where, "alpha must lie in (0, 1]");
      }
      for (double b : s.beta) {
        if (!(b > 0.0 && b <= 1.0)) fail(where, "beta must lie in (0, 1]");
      }
      for (double a : s.alpha) {
        for (double b : s.beta) {
          const double r = 1.0 - a - b;
          if (std::abs(r) < 1e-14 || std::abs(r) > 1.0 - 1e-14) {
            fail(where, "alpha + beta must avoid 1 and 2 (correlation 0 or -1)");
          }
        }
      }
      break;
    case KernelFamily::chebyshev:
      check_keys(params, {"r"}, where + ".params");
      if (!params.contains("r")) fail(where, "chebyshev needs params.r");
      s.r = number_list(params["r"], where + ".params.r");
      for (double r : s.r) check_correlation(r, where);
      break;
  }

  if (j.contains("n_nodes")) {
    if (!j["n_nodes"].is_number_integer()) fail(where, "n_nodes must be an integer");
    s.n_nodes = j["n_nodes"].get<int>();
  }
  if (s.n_nodes < 2 || s.n_nodes > kMaxNodes) {
    fail(where, "n_nodes must lie in [2, " + std::to_string(kMaxNodes) + "]");
  }

  if (j.contains("checks")) {
    if (!j["checks"].is_array()) fail(where, "checks must be an array of names");
    for (const auto &c : j["checks"]) {
      if (!c.is_string()) fail(where, "checks must be an array of names");
      const auto name = c.get<std::string>();
      if (!find_check(name)) fail(where, "unknown check \"" + name + "\"");
      s.checks.push_back(name);
    }
  }

  if (j.contains("mc")) {
    const Json &mc = j["mc"];
    if (!mc.is_object()) fail(where, "mc must be an object");
    check_keys(mc, {"length", "seeds"}, where + ".mc");
    McSettings settings;
    if (mc.contains("length")) {
      if (!mc["length"].is_number_unsigned() || mc["length"].get<std::size_t>() < 2) {
        fail(where, "mc.length must be an integer >= 2");
      }
      settings.length = mc["length"].get<std::size_t>();
    }
    const Json seeds = mc.value("seeds", Json(kDefaultMcSeeds));
    if (seeds.is_number_unsigned()) {
      const auto count = seeds.get<std::size_t>();
      if (count == 0) fail(where, "mc.seeds must be positive");
      for (std::size_t i = 1; i <= count; ++i) settings.seeds.push_back(i);
    } else if (seeds.is_array() && !seeds.empty()) {
      for (const auto &v : seeds) {
        if (!v.is_number_unsigned()) fail(where, "mc.seeds entries must be unsigned integers");
        settings.seeds.push_back(v.get<std::uint64_t>());
      }
    } else {
      fail(where, "mc.seeds must be a count or a list of seeds");
    }
    s.mc = settings;
  }

  if (j.contains("tolerances")) {
    const Json &tol = j["tolerances"];
    if (!tol.is_object()) fail(where, "tolerances must be an object");
    for (const auto &[key, value] : tol.items()) {
      if (!find_check(key)) fail(where, "tolerance for unknown check \"" + key + "\"");
      if (!value.is_number() || !(value.get<double>() >= 0.0)) {
        fail(where, "tolerance for " + key + " must be a nonnegative number");
      }
      s.tolerances[key] = value.get<double>();
    }
  }
  return s;
}

}  // namespace

KernelFamily parse_family(const std::string &name) {
  for (auto f : {KernelFamily::mehler, KernelFamily::two_valued, KernelFamily::chebyshev}) {
    if (name == to_string(f)) return f;
  }
  throw std::invalid_argument("unknown family \"" + name + "\"");
}

std::vector<Scenario> parse_config(const Json &config) {
  std::vector<Scenario> out;
  if (config.is_object() && config.contains("scenarios")) {
    if (config.size() != 1) fail("config", "a \"scenarios\" document takes no other keys");
    const Json &list = config["scenarios"];
    if (!list.is_array()) fail("config", "scenarios must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) out.push_back(parse_one(list[i], i));
  } else {
    out.push_back(parse_one(config, 0));
  }
  return out;
}

std::vector<Scenario> load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  Json config;
  try {
    config = Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error &e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(config);
}

Json canonical_json(const std::vector<Scenario> &scenarios) {
  Json list = Json::array();
  for (const auto &s : scenarios) {
    Json params = Json::object();
    switch (s.family) {
      case KernelFamily::mehler:
        params = {{"q", s.q}, {"r", s.r}};
        break;
      case KernelFamily::two_valued:
        params = {{"alpha", s.alpha}, {"beta", s.beta}};
        break;
      case KernelFamily::chebyshev:
        params = {{"r", s.r}};
        break;
    }
    Json j{{"name", s.name},     {"family", to_string(s.family)},
           {"params", params},   {"n_nodes", s.n_nodes},
           {"checks", s.checks}, {"tolerances", s.tolerances}};
    j["mc"] = s.mc ? Json{{"length", s.mc->length}, {"seeds", s.mc->seeds}} : Json(nullptr);
    list.push_back(j);
  }
  return {{"scenarios", list}};
}

std::uint64_t config_hash(const std::vector<Scenario> &scenarios) {
  const std::string text = canonical_json(scenarios).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

void apply_seed_override(std::vector<Scenario> &scenarios, std::uint64_t base) {
  for (auto &s : scenarios) {
    if (!s.mc) continue;
    for (std::size_t i = 0; i < s.mc->seeds.size(); ++i) s.mc->seeds[i] = base + i;
  }
}

std::vector<GridPoint> grid(const Scenario &s) {
  std::vector<GridPoint> out;
  switch (s.family) {
    case KernelFamily::mehler:
      for (double q : s.q) {
        for (double r : s.r) out.push_back({s.family, q, std::nullopt, std::nullopt, r, s.n_nodes});
      }
      break;
    case KernelFamily::two_valued:
      for (double a : s.alpha) {
        for (double b : s.beta) {
          out.push_back({s.family, std::nullopt, a, b, 1.0 - a - b, 2});
        }
      }
      break;
    case KernelFamily::chebyshev:
      for (double r : s.r) {
        out.push_back({s.family, std::nullopt, std::nullopt, std::nullopt, r, s.n_nodes});
      }
      break;
  }
  return out;
}

}  // namespace qchain

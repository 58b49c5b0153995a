#pragma once

/// @file config.hpp
/// Strict JSON experiment configuration.
///
/// {
///   "params":   {"lambda": 0.5, "mu": 1, "c": 2, "gamma": 0.5, "p_idle": 0.6,
///                "p_setup": 4, "p_slow": 1, "p_fast": 4, "beta": 0.5},
///   "policy":   {"k1": 1, "k2": 2, "alpha": "inf"},
///   "search":   {"k1_max": 10, "k2_max": 20, "alpha_grid": [0, 0.5, "inf"]},
///   "lambda_range": [0.05, 1.9], "resolution": 0.001, "coarse_points": 75,
///   "tolerances": {"residual": 1e-10, "mass": 1e-12},
///   "sim": {"horizon": 2000000, "warmup": 100000, "batches": 20, "seed": 1, "level": 0.99},
///   "output": {"path": "out.csv", "format": "csv"},
///   "smallness_threshold": 0.05
/// }
///
/// Every key is optional except that unknown keys are rejected. Missing
/// p_fast defaults to c^2 p_slow and missing p_setup to p_fast. k2 and
/// alpha accept the string "inf".

#include "powerq/model.hpp"
#include "powerq/optimizer.hpp"
#include "powerq/sim.hpp"
#include "powerq/solver.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace powerq {

/// Malformed or unreadable configuration (a usage error, not a domain one).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OutputSpec {
  std::string path;
  std::string format = "csv";
  friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

struct ExperimentConfig {
  SystemParams params;
  bool has_lambda = false;
  std::optional<Policy> policy;
  SearchSpace space;
  std::optional<Interval> lambda_range;
  double resolution = 1e-3;
  int coarse_points = 75;
  Tolerances tol;
  SimBudget sim;
  OutputSpec output;
  double smallness_threshold = 0.05;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

inline double number_or_inf(const json& v, const char* name) {
  if (v.is_string() && v.get<std::string>() == "inf") return kInf;
  if (!v.is_number()) throw ConfigError(std::string(name) + " must be a number or \"inf\"");
  return v.get<double>();
}

inline double number(const json& v, const char* name) {
  if (!v.is_number()) throw ConfigError(std::string(name) + " must be a number");
  return v.get<double>();
}

inline std::int64_t integer(const json& v, const char* name) {
  if (!v.is_number_integer()) throw ConfigError(std::string(name) + " must be an integer");
  return v.get<std::int64_t>();
}

inline int small_integer(const json& v, const char* name) {
  const auto x = integer(v, name);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError(std::string(name) + " out of range");
  }
  return static_cast<int>(x);
}

inline json inf_or_number(double x) { return x == kInf ? json("inf") : json(x); }

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& root) {
  using detail::json;
  detail::reject_unknown(root, "config",
                         {"params", "policy", "search", "lambda_range", "resolution", "coarse_points", "tolerances",
                          "sim", "output", "smallness_threshold"});
  ExperimentConfig cfg;

  if (root.contains("params")) {
    const json& p = root["params"];
    detail::reject_unknown(p, "params", {"lambda", "mu", "c", "gamma", "p_idle", "p_setup", "p_slow", "p_fast", "beta"});
    auto& sp = cfg.params;
    if (p.contains("lambda")) {
      sp.lambda = detail::number(p["lambda"], "lambda");
      cfg.has_lambda = true;
    }
    if (p.contains("mu")) sp.mu = detail::number(p["mu"], "mu");
    if (p.contains("c")) sp.c = detail::number(p["c"], "c");
    if (p.contains("gamma")) sp.gamma = detail::number(p["gamma"], "gamma");
    if (p.contains("p_idle")) sp.p_idle = detail::number(p["p_idle"], "p_idle");
    if (p.contains("p_slow")) sp.p_slow = detail::number(p["p_slow"], "p_slow");
    sp.p_fast = p.contains("p_fast") ? detail::number(p["p_fast"], "p_fast") : sp.c * sp.c * sp.p_slow;
    sp.p_setup = p.contains("p_setup") ? detail::number(p["p_setup"], "p_setup") : sp.p_fast;
    if (p.contains("beta")) sp.beta = detail::number(p["beta"], "beta");
  }

  if (root.contains("policy")) {
    const json& p = root["policy"];
    detail::reject_unknown(p, "policy", {"k1", "k2", "alpha"});
    Policy pol;
    if (p.contains("k1")) pol.k1 = detail::small_integer(p["k1"], "k1");
    if (p.contains("k2")) {
      const json& k2 = p["k2"];
      pol.k2 = (k2.is_string() && k2.get<std::string>() == "inf") ? SpeedThreshold::infinite()
                                                                  : SpeedThreshold(detail::small_integer(k2, "k2"));
    }
    if (p.contains("alpha")) pol.alpha = detail::number_or_inf(p["alpha"], "alpha");
    cfg.policy = pol;
  }

  if (root.contains("search")) {
    const json& s = root["search"];
    detail::reject_unknown(s, "search", {"k1_max", "k2_max", "alpha_grid"});
    if (s.contains("k1_max")) cfg.space.k1_max = detail::small_integer(s["k1_max"], "k1_max");
    if (s.contains("k2_max")) cfg.space.k2_max = detail::small_integer(s["k2_max"], "k2_max");
    if (s.contains("alpha_grid")) {
      if (!s["alpha_grid"].is_array()) throw ConfigError("alpha_grid must be an array");
      cfg.space.alpha_grid.clear();
      for (const auto& a : s["alpha_grid"]) cfg.space.alpha_grid.push_back(detail::number_or_inf(a, "alpha_grid"));
    }
  }

  if (root.contains("lambda_range")) {
    const json& r = root["lambda_range"];
    if (!r.is_array() || r.size() != 2) throw ConfigError("lambda_range must be [lo, hi]");
    cfg.lambda_range = Interval{detail::number(r[0], "lambda_range"), detail::number(r[1], "lambda_range")};
  }
  if (root.contains("resolution")) cfg.resolution = detail::number(root["resolution"], "resolution");
  if (root.contains("coarse_points")) cfg.coarse_points = detail::small_integer(root["coarse_points"], "coarse_points");

  if (root.contains("tolerances")) {
    const json& t = root["tolerances"];
    detail::reject_unknown(t, "tolerances", {"residual", "mass"});
    if (t.contains("residual")) cfg.tol.residual = detail::number(t["residual"], "residual");
    if (t.contains("mass")) cfg.tol.mass = detail::number(t["mass"], "mass");
  }

  if (root.contains("sim")) {
    const json& s = root["sim"];
    detail::reject_unknown(s, "sim", {"horizon", "warmup", "batches", "seed", "level"});
    if (s.contains("horizon")) cfg.sim.horizon = detail::integer(s["horizon"], "horizon");
    cfg.sim.warmup = s.contains("warmup") ? detail::integer(s["warmup"], "warmup") : cfg.sim.horizon / 20;
    if (s.contains("batches")) cfg.sim.batches = detail::small_integer(s["batches"], "batches");
    if (s.contains("seed")) {
      if (!s["seed"].is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
      cfg.sim.seed = s["seed"].get<std::uint64_t>();
    }
    if (s.contains("level")) cfg.sim.level = detail::number(s["level"], "level");
  }

  if (root.contains("output")) {
    const json& o = root["output"];
    detail::reject_unknown(o, "output", {"path", "format"});
    if (o.contains("path")) {
      if (!o["path"].is_string()) throw ConfigError("output.path must be a string");
      cfg.output.path = o["path"].get<std::string>();
    }
    if (o.contains("format")) {
      if (!o["format"].is_string()) throw ConfigError("output.format must be a string");
      cfg.output.format = o["format"].get<std::string>();
    }
    if (cfg.output.format != "csv" && cfg.output.format != "json") throw ConfigError("output.format must be csv or json");
  }
  if (root.contains("smallness_threshold")) {
    cfg.smallness_threshold = detail::number(root["smallness_threshold"], "smallness_threshold");
  }
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return parse_config(root);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

/// Fully explicit form of `cfg`; parse_config(to_json(cfg)) reproduces it.
inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  using detail::json;
  json root;
  json params = {{"mu", cfg.params.mu},         {"c", cfg.params.c},           {"gamma", cfg.params.gamma},
                 {"p_idle", cfg.params.p_idle}, {"p_setup", cfg.params.p_setup}, {"p_slow", cfg.params.p_slow},
                 {"p_fast", cfg.params.p_fast}, {"beta", cfg.params.beta}};
  if (cfg.has_lambda) params["lambda"] = cfg.params.lambda;
  root["params"] = params;
  if (cfg.policy) {
    root["policy"] = {{"k1", cfg.policy->k1},
                      {"k2", cfg.policy->k2.is_infinite() ? json("inf") : json(cfg.policy->k2.value())},
                      {"alpha", detail::inf_or_number(cfg.policy->alpha)}};
  }
  json grid = json::array();
  for (double a : cfg.space.alpha_grid) grid.push_back(detail::inf_or_number(a));
  root["search"] = {{"k1_max", cfg.space.k1_max}, {"k2_max", cfg.space.k2_max}, {"alpha_grid", grid}};
  if (cfg.lambda_range) root["lambda_range"] = {cfg.lambda_range->lo, cfg.lambda_range->hi};
  root["resolution"] = cfg.resolution;
  root["coarse_points"] = cfg.coarse_points;
  root["tolerances"] = {{"residual", cfg.tol.residual}, {"mass", cfg.tol.mass}};
  root["sim"] = {{"horizon", cfg.sim.horizon},
                 {"warmup", cfg.sim.warmup},
                 {"batches", cfg.sim.batches},
                 {"seed", cfg.sim.seed},
                 {"level", cfg.sim.level}};
  root["output"] = {{"path", cfg.output.path}, {"format", cfg.output.format}};
  root["smallness_threshold"] = cfg.smallness_threshold;
  return root;
}

}  // namespace powerq

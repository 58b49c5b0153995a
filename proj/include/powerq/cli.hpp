#pragma once

/// @file cli.hpp
/// The `powerq` command line: eval, optimize, sweep, thresholds, synergy,
/// simulate and validate. Exit status is 0 on success, 1 on domain errors
/// (instability, preference violation, failed validation, ...) and 2 on
/// usage errors (unknown flag, missing or malformed config).

#include "powerq/config.hpp"
#include "powerq/error.hpp"
#include "powerq/optimizer.hpp"
#include "powerq/report.hpp"
#include "powerq/sim.hpp"
#include "powerq/validation.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>

namespace powerq::cli {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::optional<double> lambda;
  std::string lambda_range;
  std::optional<double> resolution;
  std::string out;
  std::string format;
  std::optional<std::uint64_t> seed;
  int jobs = default_jobs();
  std::optional<double> smallness;
};

inline Interval parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("--lambda-range expects LO:HI, got '" + text + "'");
  try {
    std::size_t used_lo = 0;
    std::size_t used_hi = 0;
    const std::string lo = text.substr(0, colon);
    const std::string hi = text.substr(colon + 1);
    Interval r{std::stod(lo, &used_lo), std::stod(hi, &used_hi)};
    if (used_lo != lo.size() || used_hi != hi.size()) throw std::invalid_argument("trailing characters");
    return r;
  } catch (const std::exception&) {
    throw UsageError("--lambda-range expects LO:HI, got '" + text + "'");
  }
}

/// Loads the config and applies command-line overrides.
inline ExperimentConfig resolve(const Flags& f) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(f.config);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (f.lambda) {
    cfg.params.lambda = *f.lambda;
    cfg.has_lambda = true;
  }
  if (!f.lambda_range.empty()) cfg.lambda_range = parse_range(f.lambda_range);
  if (f.resolution) cfg.resolution = *f.resolution;
  if (!f.out.empty()) cfg.output.path = f.out;
  if (!f.format.empty()) cfg.output.format = f.format;
  if (f.seed) cfg.sim.seed = *f.seed;
  if (f.smallness) cfg.smallness_threshold = *f.smallness;
  return cfg;
}

inline void need_lambda(const ExperimentConfig& cfg, const char* cmd) {
  if (!cfg.has_lambda) throw UsageError(std::string(cmd) + " needs --lambda or params.lambda");
}

inline const Policy& need_policy(const ExperimentConfig& cfg, const char* cmd) {
  if (!cfg.policy) throw UsageError(std::string(cmd) + " needs a policy in the config");
  return *cfg.policy;
}

inline Interval need_range(const ExperimentConfig& cfg, const char* cmd) {
  if (!cfg.lambda_range) throw UsageError(std::string(cmd) + " needs --lambda-range or lambda_range");
  return *cfg.lambda_range;
}

/// Result of one subcommand: the data artifact and a human summary.
struct Emission {
  std::string csv;
  nlohmann::json json;
  std::string summary;
  int status = 0;
};

inline Emission cmd_eval(const ExperimentConfig& cfg) {
  need_lambda(cfg, "eval");
  const Policy& policy = need_policy(cfg, "eval");
  PolicyRow row{cfg.params.lambda, {policy.canonical(), evaluate_policy(cfg.params, policy, cfg.tol)}};
  const auto& m = row.eval.metrics;
  return {policy_csv({row}), policy_json(row),
          "policy " + to_string(row.eval.policy) + ": E[R]=" + fmt(m.mean_response) + " E[P]=" + fmt(m.mean_power) +
              " cost=" + fmt(m.cost) + "\n"};
}

inline Emission cmd_optimize(const ExperimentConfig& cfg, int jobs) {
  need_lambda(cfg, "optimize");
  PolicyRow row{cfg.params.lambda, optimize(cfg.params, cfg.space, cfg.tol, jobs)};
  return {policy_csv({row}), policy_json(row),
          "optimal policy " + to_string(row.eval.policy) + " (" + std::string(to_string(classify(row.eval.policy))) +
              ") cost=" + fmt(row.eval.metrics.cost) + "\n"};
}

inline Emission cmd_sweep(const ExperimentConfig& cfg, int jobs) {
  const Interval range = need_range(cfg, "sweep");
  std::vector<PolicyRow> rows;
  nlohmann::json arr = nlohmann::json::array();
  for (double lambda : linear_grid(range.lo, range.hi, cfg.coarse_points)) {
    SystemParams p = cfg.params;
    p.lambda = lambda;
    rows.push_back({lambda, optimize(p, cfg.space, cfg.tol, jobs)});
    arr.push_back(policy_json(rows.back()));
  }
  return {policy_csv(rows), arr, "swept " + std::to_string(rows.size()) + " arrival rates\n"};
}

inline Emission cmd_thresholds(const ExperimentConfig& cfg, int jobs) {
  const Interval range = need_range(cfg, "thresholds");
  ThresholdOptions opts;
  opts.resolution = cfg.resolution;
  opts.coarse_points = cfg.coarse_points;
  opts.jobs = jobs;
  opts.tol = cfg.tol;
  const ThresholdReport rep = find_thresholds(cfg.params, range, cfg.space, opts);
  std::string summary;
  for (const auto& seg : rep.regime_sequence) {
    summary += "  [" + fmt(seg.lambdas.lo) + ", " + fmt(seg.lambdas.hi) + "] " + std::string(to_string(seg.regime)) + "\n";
  }
  summary += rep.structure_violation ? "structure violation: regimes differ from the expected four-regime order\n"
                                     : "all four regimes found in the expected order\n";
  return {thresholds_csv(rep), thresholds_json(rep), summary};
}

inline Emission cmd_synergy(const ExperimentConfig& cfg, int jobs) {
  const Interval range = need_range(cfg, "synergy");
  const SynergyReport rep = synergy_gap(cfg.params, linear_grid(range.lo, range.hi, cfg.coarse_points), cfg.space,
                                        cfg.smallness_threshold, cfg.tol, jobs);
  return {synergy_csv(rep), synergy_json(rep),
          "max relative gain " + fmt(rep.max_relative_gain) + " at lambda=" + fmt(rep.argmax_lambda) +
              (rep.mechanisms_not_synergistic() ? " (below " : " (not below ") + fmt(rep.smallness_threshold) + ")\n"};
}

inline Emission cmd_simulate(const ExperimentConfig& cfg) {
  need_lambda(cfg, "simulate");
  const Policy policy = need_policy(cfg, "simulate").canonical();
  const SimMetrics m =
      simulate(SimConfig{cfg.params, policy, cfg.sim.horizon, cfg.sim.warmup, cfg.sim.seed, cfg.sim.batches});
  return {simulation_csv(cfg.params.lambda, policy, cfg.sim.seed, m),
          simulation_json(cfg.params.lambda, policy, cfg.sim.seed, m),
          "simulated E[R]=" + fmt(m.mean_response) + " +/- " + fmt(m.response_ci) + ", E[P]=" + fmt(m.mean_power) +
              " +/- " + fmt(m.power_ci) + "\n"};
}

inline Emission cmd_validate(const ExperimentConfig& cfg) {
  const auto checks = run_validation_suite(cfg.params, cfg.tol, cfg.sim);
  Emission e{checks_csv(checks), checks_json(checks), "", 0};
  int failed = 0;
  for (const auto& c : checks) {
    e.summary += std::string(c.passed ? "PASS " : "FAIL ") + c.check + " [" + c.case_label + "] " + fmt(c.value) +
                 " <= " + fmt(c.tolerance) + "\n";
    failed += c.passed ? 0 : 1;
  }
  e.summary += std::to_string(checks.size() - static_cast<std::size_t>(failed)) + "/" + std::to_string(checks.size()) +
               " checks passed\n";
  e.status = failed == 0 ? 0 : 1;
  return e;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Energy/performance analysis of a server with on/off control and two speeds", "powerq"};
  app.require_subcommand(1);
  Flags flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON configuration file")->required();
    sub->add_option("--lambda", flags.lambda, "arrival rate");
    sub->add_option("--lambda-range", flags.lambda_range, "arrival-rate range LO:HI");
    sub->add_option("--resolution", flags.resolution, "threshold bracket width");
    sub->add_option("--out", flags.out, "output file (default: standard output)");
    sub->add_option("--format", flags.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", flags.seed, "simulation seed");
    sub->add_option("--jobs", flags.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--smallness-threshold", flags.smallness, "synergy smallness threshold");
  };
  const char* names[][2] = {{"eval", "evaluate one policy"},
                            {"optimize", "find the minimum-cost policy"},
                            {"sweep", "optimal policy over an arrival-rate grid"},
                            {"thresholds", "locate the regime thresholds"},
                            {"synergy", "gain from combining both mechanisms"},
                            {"simulate", "discrete-event simulation of one policy"},
                            {"validate", "run the self-check suite"}};
  for (const auto& [name, help] : names) add_common(app.add_subcommand(name, help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    const ExperimentConfig cfg = resolve(flags);
    Emission e;
    if (cmd == "eval") e = cmd_eval(cfg);
    else if (cmd == "optimize") e = cmd_optimize(cfg, flags.jobs);
    else if (cmd == "sweep") e = cmd_sweep(cfg, flags.jobs);
    else if (cmd == "thresholds") e = cmd_thresholds(cfg, flags.jobs);
    else if (cmd == "synergy") e = cmd_synergy(cfg, flags.jobs);
    else if (cmd == "simulate") e = cmd_simulate(cfg);
    else e = cmd_validate(cfg);

    const std::string data = cfg.output.format == "json" ? e.json.dump(2) + "\n" : e.csv;
    if (cfg.output.path.empty()) {
      out << data;
    } else {
      std::ofstream file(cfg.output.path, std::ios::binary);
      if (!file) throw UsageError("cannot write '" + cfg.output.path + "'");
      file << data;
      out << e.summary;
    }
    return e.status;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace powerq::cli

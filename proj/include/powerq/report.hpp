#pragma once

/// @file report.hpp
/// CSV and JSON emission of evaluation, sweep, threshold, synergy,
/// simulation and validation results. Column order is fixed; numbers are
/// printed in shortest round-trip form so identical inputs give identical
/// bytes.

#include "powerq/metrics.hpp"
#include "powerq/model.hpp"
#include "powerq/optimizer.hpp"
#include "powerq/sim.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace powerq {

/// RFC 4180 style writer: one header row, fields quoted when they contain
/// a comma, quote or line break.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { write(header); }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw std::logic_error("CSV row width mismatch");
    write(fields);
  }

  [[nodiscard]] const std::string& str() const noexcept { return text_; }

 private:
  void write(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) text_ += ',';
      const std::string& f = fields[i];
      if (f.find_first_of(",\"\r\n") == std::string::npos) {
        text_ += f;
        continue;
      }
      text_ += '"';
      for (char ch : f) {
        if (ch == '"') text_ += '"';
        text_ += ch;
      }
      text_ += '"';
    }
    text_ += '\n';
  }

  std::size_t columns_;
  std::string text_;
};

inline std::string fmt(double x) { return format_number(x); }
inline std::string fmt(int x) { return std::to_string(x); }

/// lambda, optimal-or-given policy, and its metrics.
struct PolicyRow {
  double lambda = 0.0;
  PolicyEvaluation eval;
};

inline const std::vector<std::string>& policy_columns() {
  static const std::vector<std::string> cols{"lambda", "k1",  "k2",   "alpha",    "regime", "E_N",
                                             "E_R",    "E_P", "cost", "residual", "q_max",  "tail_mass"};
  return cols;
}

inline std::vector<std::string> policy_fields(double lambda, const PolicyEvaluation& e) {
  const auto& m = e.metrics;
  return {fmt(lambda),
          fmt(e.policy.k1),
          to_string(e.policy.k2),
          fmt(e.policy.alpha),
          std::string(to_string(classify(e.policy))),
          fmt(m.mean_jobs),
          fmt(m.mean_response),
          fmt(m.mean_power),
          fmt(m.cost),
          fmt(m.diagnostics.residual),
          fmt(m.diagnostics.q_max),
          fmt(m.diagnostics.tail_mass)};
}

inline std::string policy_csv(const std::vector<PolicyRow>& rows) {
  CsvWriter w(policy_columns());
  for (const auto& r : rows) w.row(policy_fields(r.lambda, r.eval));
  return w.str();
}

inline nlohmann::json policy_json(const PolicyRow& r) {
  const auto& p = r.eval.policy;
  const auto& m = r.eval.metrics;
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(format_number(x)); };
  return {{"lambda", r.lambda},
          {"k1", p.k1},
          {"k2", p.k2.is_infinite() ? nlohmann::json("inf") : nlohmann::json(p.k2.value())},
          {"alpha", num(p.alpha)},
          {"regime", std::string(to_string(classify(p)))},
          {"E_N", m.mean_jobs},
          {"E_R", m.mean_response},
          {"E_P", m.mean_power},
          {"cost", m.cost},
          {"residual", m.diagnostics.residual},
          {"q_max", m.diagnostics.q_max},
          {"tail_mass", m.diagnostics.tail_mass}};
}

inline std::string thresholds_csv(const ThresholdReport& rep) {
  CsvWriter w({"kind", "label", "lambda_lo", "lambda_hi", "regime", "k1", "k2", "alpha", "cost", "residual", "q_max",
               "tail_mass"});
  auto with_optimum = [&](std::vector<std::string> head, double at) {
    const auto& e = rep.optima.at(at);
    head.insert(head.end(), {fmt(e.policy.k1), to_string(e.policy.k2), fmt(e.policy.alpha), fmt(e.metrics.cost),
                             fmt(e.metrics.diagnostics.residual), fmt(e.metrics.diagnostics.q_max),
                             fmt(e.metrics.diagnostics.tail_mass)});
    return head;
  };
  for (std::size_t i = 0; i < rep.regime_sequence.size(); ++i) {
    const auto& seg = rep.regime_sequence[i];
    w.row(with_optimum({"segment", std::to_string(i), fmt(seg.lambdas.lo), fmt(seg.lambdas.hi),
                        std::string(to_string(seg.regime))},
                       seg.lambdas.lo));
  }
  const std::pair<const char*, const std::optional<Interval>*> named[] = {
      {"lambda3", &rep.lambda3}, {"lambda2", &rep.lambda2}, {"lambda1", &rep.lambda1}};
  for (const auto& [name, bracket] : named) {
    if (!bracket->has_value()) {
      w.row({"threshold", name, "", "", "missing", "", "", "", "", "", "", ""});
      continue;
    }
    const Interval& b = **bracket;
    const std::string label = std::string(to_string(classify(rep.optima.at(b.lo).policy))) + "->" +
                              std::string(to_string(classify(rep.optima.at(b.hi).policy)));
    w.row(with_optimum({"threshold", name, fmt(b.lo), fmt(b.hi), label}, b.hi));
  }
  for (const auto& seg : rep.violations) {
    w.row(with_optimum({"violation", "", fmt(seg.lambdas.lo), fmt(seg.lambdas.hi), std::string(to_string(seg.regime))},
                       seg.lambdas.lo));
  }
  w.row({"flag", "structure_violation", "", "", rep.structure_violation ? "true" : "false", "", "", "", "", "", "",
         ""});
  return w.str();
}

inline nlohmann::json thresholds_json(const ThresholdReport& rep) {
  auto interval = [](const std::optional<Interval>& b) {
    return b ? nlohmann::json{{"lo", b->lo}, {"hi", b->hi}} : nlohmann::json(nullptr);
  };
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& seg : rep.regime_sequence) {
    segs.push_back({{"lo", seg.lambdas.lo}, {"hi", seg.lambdas.hi}, {"regime", std::string(to_string(seg.regime))}});
  }
  nlohmann::json viol = nlohmann::json::array();
  for (const auto& seg : rep.violations) {
    viol.push_back({{"lo", seg.lambdas.lo}, {"hi", seg.lambdas.hi}, {"regime", std::string(to_string(seg.regime))}});
  }
  return {{"lambda1", interval(rep.lambda1)},
          {"lambda2", interval(rep.lambda2)},
          {"lambda3", interval(rep.lambda3)},
          {"regime_sequence", segs},
          {"violations", viol},
          {"preference_flag", rep.preference_flag},
          {"structure_violation", rep.structure_violation}};
}

inline std::string synergy_csv(const SynergyReport& rep) {
  CsvWriter w({"lambda", "best_overall_cost", "best_never_off_cost", "best_single_speed_onoff_cost", "relative_gain",
               "k1", "k2", "alpha", "regime", "residual", "q_max", "tail_mass"});
  auto cost_or_blank = [](const std::optional<PolicyEvaluation>& e) { return e ? fmt(e->metrics.cost) : std::string(); };
  for (const auto& r : rep.rows) {
    const auto& b = r.best_overall;
    w.row({fmt(r.lambda), fmt(b.metrics.cost), cost_or_blank(r.best_never_off), cost_or_blank(r.best_single_speed_onoff),
           fmt(r.relative_gain), fmt(b.policy.k1), to_string(b.policy.k2), fmt(b.policy.alpha),
           std::string(to_string(classify(b.policy))), fmt(b.metrics.diagnostics.residual),
           fmt(b.metrics.diagnostics.q_max), fmt(b.metrics.diagnostics.tail_mass)});
  }
  return w.str();
}

inline nlohmann::json synergy_json(const SynergyReport& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) {
    nlohmann::json row = {{"lambda", r.lambda},
                          {"best_overall_cost", r.best_overall.metrics.cost},
                          {"relative_gain", r.relative_gain},
                          {"best_policy", to_string(r.best_overall.policy)}};
    row["best_never_off_cost"] = r.best_never_off ? nlohmann::json(r.best_never_off->metrics.cost) : nlohmann::json();
    row["best_single_speed_onoff_cost"] =
        r.best_single_speed_onoff ? nlohmann::json(r.best_single_speed_onoff->metrics.cost) : nlohmann::json();
    rows.push_back(row);
  }
  return {{"rows", rows},
          {"max_relative_gain", rep.max_relative_gain},
          {"argmax_lambda", rep.argmax_lambda},
          {"smallness_threshold", rep.smallness_threshold},
          {"not_synergistic", rep.mechanisms_not_synergistic()}};
}

inline std::string simulation_csv(double lambda, const Policy& policy, std::uint64_t seed, const SimMetrics& m) {
  CsvWriter w({"lambda", "k1", "k2", "alpha", "seed", "completions", "E_R", "E_R_ci95", "E_P", "E_P_ci95", "E_N",
               "throughput"});
  w.row({fmt(lambda), fmt(policy.k1), to_string(policy.k2), fmt(policy.alpha), std::to_string(seed),
         std::to_string(m.completions), fmt(m.mean_response), fmt(m.response_ci), fmt(m.mean_power), fmt(m.power_ci),
         fmt(m.mean_jobs), fmt(m.throughput)});
  return w.str();
}

inline nlohmann::json simulation_json(double lambda, const Policy& policy, std::uint64_t seed, const SimMetrics& m) {
  nlohmann::json phases;
  for (int i = 0; i < kPhaseCount; ++i) {
    phases[std::string(to_string(static_cast<ServerPhase>(i)))] = m.phase_time_fractions[static_cast<std::size_t>(i)];
  }
  return {{"lambda", lambda},       {"policy", to_string(policy)},    {"seed", seed},
          {"completions", m.completions}, {"E_R", m.mean_response}, {"E_R_ci95", m.response_ci},
          {"E_P", m.mean_power},    {"E_P_ci95", m.power_ci},        {"E_N", m.mean_jobs},
          {"throughput", m.throughput}, {"phase_time_fractions", phases}};
}

/// One line of the validation suite.
struct CheckResult {
  std::string check;
  std::string case_label;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

inline std::string checks_csv(const std::vector<CheckResult>& checks) {
  CsvWriter w({"check", "case", "value", "tolerance", "pass"});
  for (const auto& c : checks) {
    w.row({c.check, c.case_label, fmt(c.value), fmt(c.tolerance), c.passed ? "true" : "false"});
  }
  return w.str();
}

inline nlohmann::json checks_json(const std::vector<CheckResult>& checks) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : checks) {
    rows.push_back({{"check", c.check},
                    {"case", c.case_label},
                    {"value", c.value},
                    {"tolerance", c.tolerance},
                    {"pass", c.passed}});
  }
  return rows;
}

}  // namespace powerq

#pragma once

/// @file validation.hpp
/// Self-check suite behind `powerq validate`: closed-form oracles,
/// conservation checks on canned policies and simulation cross-checks.

#include "powerq/metrics.hpp"
#include "powerq/oracle.hpp"
#include "powerq/report.hpp"
#include "powerq/sim.hpp"
#include "powerq/solver.hpp"

#include <string>
#include <vector>

namespace powerq {

struct CannedCase {
  std::string label;
  double load;  ///< lambda as a fraction of the top service rate
  Policy policy;
};

inline std::vector<CannedCase> canned_cases() {
  return {
      {"combined k1=3 k2=4 alpha=0.5", 0.3, Policy{3, SpeedThreshold(4), 0.5}},
      {"combined k1=2 k2=3 alpha=1", 0.6, Policy{2, SpeedThreshold(3), 1.0}},
      {"setup k1=1 slow alpha=inf", 0.25, Policy{1, SpeedThreshold::infinite(), kInf}},
  };
}

inline SystemParams at_load(SystemParams p, const Policy& policy, double load) {
  p.lambda = load * top_service_rate(p, policy);
  return p;
}

inline std::vector<CheckResult> run_validation_suite(const SystemParams& base, const Tolerances& tol,
                                                     const SimBudget& budget) {
  std::vector<CheckResult> out;
  auto add = [&](std::string check, std::string label, double value, double limit) {
    out.push_back({std::move(check), std::move(label), value, limit, value <= limit});
  };

  const std::pair<const char*, Policy> reductions[] = {
      {"M/M/1 slow", Policy{1, SpeedThreshold::infinite(), 0.0}},
      {"M/M/1 fast", Policy{1, SpeedThreshold(1), 0.0}},
      {"M/M/1 with setup", Policy{1, SpeedThreshold::infinite(), kInf}},
  };
  for (const auto& [label, policy] : reductions) {
    const SystemParams p = at_load(base, policy, 0.5);
    const auto exact = closed_form_oracle(p, policy);
    const auto numeric = evaluate_policy(p, policy, tol);
    add("oracle_E_R", label, relative_difference(numeric.mean_response, exact->mean_response), 1e-8);
    add("oracle_E_P", label, relative_difference(numeric.mean_power, exact->mean_power), 1e-8);
  }

  std::vector<CannedCase> balance_cases = canned_cases();
  balance_cases.push_back({"never off k2=5", 0.75, Policy{1, SpeedThreshold(5), 0.0}});
  for (const auto& c : balance_cases) {
    const auto d = solve_stationary(at_load(base, c.policy, c.load), c.policy, tol);
    const auto b = check_balance(d);
    add("residual", c.label, b.residual, tol.residual);
    add("mass", c.label, b.mass_error, 1e-10);
    add("cut_balance", c.label, b.cut_balance_rel, 1e-8);
    add("throughput", c.label, b.throughput_rel, 1e-8);
    add("off_ratio", c.label, b.off_ratio_rel, 1e-8);
    add("level_recurrence", c.label, b.level_recurrence_rel, 1e-6);
  }

  for (const auto& c : canned_cases()) {
    const auto cv = cross_validate(at_load(base, c.policy, c.load), c.policy, tol, budget);
    add("sim_E_R", c.label, std::abs(cv.analytic.mean_response - cv.simulated.mean_response), cv.response_ci);
    add("sim_E_P", c.label, std::abs(cv.analytic.mean_power - cv.simulated.mean_power), cv.power_ci);
  }
  return out;
}

}  // namespace powerq

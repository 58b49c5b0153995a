#pragma once

/// @file oracle.hpp
/// Exact metrics for the policies that reduce to textbook queues. Used as a
/// regression oracle for the numerical pipeline.

#include "powerq/metrics.hpp"
#include "powerq/model.hpp"

#include <optional>

namespace powerq {

/// Returns exact metrics when `policy` is one of
///   - never off, slow only: M/M/1(lambda, mu)
///   - never off, fast only: M/M/1(lambda, c mu)
///   - instant off, k1 = 1, slow only: M/M/1 with exponential setup,
///     E[R] = 1/(mu - lambda) + 1/gamma
/// and nullopt otherwise (or when the reduction is unstable).
inline std::optional<PolicyMetrics> closed_form_oracle(const SystemParams& p, const Policy& raw_policy) {
  const Policy policy = raw_policy.canonical();
  PolicyMetrics m;
  auto finish = [&](double response) {
    m.mean_response = response;
    m.mean_jobs = p.lambda * response;
    m.mean_power = mean_power(m.phase_probs, p);
    m.cost = cost(m.mean_response, m.mean_power, p);
    return m;
  };

  if (policy.never_off() && (policy.k2.is_infinite() || policy.k2.value() == 1)) {
    const double rate = policy.k2.is_infinite() ? p.mu : p.fast_rate();
    if (p.lambda >= rate) return std::nullopt;
    const double rho = p.lambda / rate;
    at(m.phase_probs, ServerPhase::Idle) = 1.0 - rho;
    at(m.phase_probs, policy.k2.is_infinite() ? ServerPhase::Slow : ServerPhase::Fast) = rho;
    return finish(1.0 / (rate - p.lambda));
  }

  if (policy.instant_off() && policy.k1 == 1 && policy.k2.is_infinite()) {
    if (p.lambda >= p.mu) return std::nullopt;
    const double rho = p.lambda / p.mu;
    // Each idle cycle is one off period (mean 1/lambda) then one setup (mean 1/gamma).
    const double cycle = 1.0 / p.lambda + 1.0 / p.gamma;
    at(m.phase_probs, ServerPhase::Slow) = rho;
    at(m.phase_probs, ServerPhase::Off) = (1.0 - rho) * (1.0 / p.lambda) / cycle;
    at(m.phase_probs, ServerPhase::Switching) = (1.0 - rho) * (1.0 / p.gamma) / cycle;
    return finish(1.0 / (p.mu - p.lambda) + 1.0 / p.gamma);
  }
  return std::nullopt;
}

}  // namespace powerq

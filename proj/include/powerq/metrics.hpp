#pragma once

/// @file metrics.hpp
/// Mean jobs, mean response time, mean power and the weighted cost
/// E[R] + beta E[P] of one (params, policy) pair.

#include "powerq/model.hpp"
#include "powerq/solver.hpp"

#include <array>
#include <numeric>

namespace powerq {

using PhaseProbabilities = std::array<double, kPhaseCount>;

inline double& at(PhaseProbabilities& probs, ServerPhase ph) { return probs[static_cast<std::size_t>(ph)]; }
inline double at(const PhaseProbabilities& probs, ServerPhase ph) { return probs[static_cast<std::size_t>(ph)]; }

struct SolverDiagnostics {
  double residual = 0.0;
  int q_max = 0;
  double tail_mass = 0.0;
};

struct PolicyMetrics {
  double mean_jobs = 0.0;
  double mean_response = 0.0;
  double mean_power = 0.0;
  double cost = 0.0;
  PhaseProbabilities phase_probs{};
  SolverDiagnostics diagnostics;
};

/// Aggregates pi by server phase. Tail mass beyond q_max goes to Switching
/// (s = 0) and to the top speed (s = 1).
inline PhaseProbabilities phase_probabilities(const StationaryDistribution& d, const Policy& policy) {
  PhaseProbabilities probs{};
  for (int q = 0; q <= d.q_max; ++q) {
    at(probs, phase_of(1, q, policy)) += d.probability(1, q);
    at(probs, phase_of(0, q, policy)) += d.probability(0, q);
  }
  at(probs, ServerPhase::Switching) += d.tail_mass_off;
  at(probs, policy.k2.is_finite() ? ServerPhase::Fast : ServerPhase::Slow) += d.tail_mass_on;
  return probs;
}

inline double mean_jobs(const StationaryDistribution& d) {
  double sum = 0.0;
  for (int q = 1; q <= d.q_max; ++q) sum += q * (d.probability(1, q) + d.probability(0, q));
  return sum + d.tail_moment_on + d.tail_moment_off;
}

/// Little's law; every arrival is admitted.
inline double mean_response(const StationaryDistribution& d, const SystemParams& params) {
  return mean_jobs(d) / params.lambda;
}

inline double mean_power(const PhaseProbabilities& probs, const SystemParams& p) {
  return p.p_idle * at(probs, ServerPhase::Idle) + p.p_setup * at(probs, ServerPhase::Switching) +
         p.p_slow * at(probs, ServerPhase::Slow) + p.p_fast * at(probs, ServerPhase::Fast);
}

inline double mean_power(const StationaryDistribution& d, const SystemParams& params, const Policy& policy) {
  return mean_power(phase_probabilities(d, policy), params);
}

inline double cost(double mean_response_time, double mean_power_draw, const SystemParams& params) {
  return mean_response_time + params.beta * mean_power_draw;
}

inline PolicyMetrics metrics_from(const StationaryDistribution& d) {
  PolicyMetrics m;
  m.phase_probs = phase_probabilities(d, d.policy);
  m.mean_jobs = mean_jobs(d);
  m.mean_response = m.mean_jobs / d.params.lambda;
  m.mean_power = mean_power(m.phase_probs, d.params);
  m.cost = cost(m.mean_response, m.mean_power, d.params);
  m.diagnostics = {d.residual, d.q_max, d.tail_mass_bound};
  return m;
}

inline PolicyMetrics evaluate_policy(const SystemParams& params, const Policy& policy, const Tolerances& tol = {}) {
  return metrics_from(solve_stationary(params, policy, tol));
}

}  // namespace powerq

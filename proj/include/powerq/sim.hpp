#pragma once

/// @file sim.hpp
/// Discrete-event simulation of the same server, used as an independent
/// statistical check of the analytic pipeline.

#include "powerq/error.hpp"
#include "powerq/metrics.hpp"
#include "powerq/model.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <vector>

namespace powerq {

struct SimConfig {
  SystemParams params;
  Policy policy;
  std::int64_t horizon = 2'000'000;  ///< job completions, warmup included
  std::int64_t warmup = 100'000;     ///< completions discarded
  std::uint64_t seed = 1;
  int batches = 20;
};

struct SimMetrics {
  double mean_response = 0.0;
  double response_ci = 0.0;  ///< 95% half-width
  double mean_power = 0.0;
  double power_ci = 0.0;  ///< 95% half-width
  double mean_jobs = 0.0;  ///< time average of q
  double throughput = 0.0;
  PhaseProbabilities phase_time_fractions{};
  std::int64_t completions = 0;  ///< completions inside the batches
  std::vector<double> response_batches;
  std::vector<double> power_batches;
};

/// Half-width of the two-sided t confidence interval for the mean of
/// `batch_means` at the given coverage level.
inline double batch_ci_half_width(const std::vector<double>& batch_means, double level) {
  const auto n = static_cast<double>(batch_means.size());
  if (batch_means.size() < 2) return std::numeric_limits<double>::infinity();
  double mean = 0.0;
  for (double x : batch_means) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : batch_means) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(boost::math::complement(dist, (1.0 - level) / 2.0));
  return t * sd / std::sqrt(n);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent exponential stream derived from (seed, stream id).
class ExpStream {
 public:
  ExpStream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (0xa0761d6478bd642fULL * (stream + 1));
    std::array<std::uint32_t, 8> words{};
    for (std::size_t i = 0; i < words.size(); i += 2) {
      const std::uint64_t v = splitmix64(s);
      words[i] = static_cast<std::uint32_t>(v);
      words[i + 1] = static_cast<std::uint32_t>(v >> 32);
    }
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  double draw(double rate) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return -std::log1p(-u) / rate;
  }

 private:
  std::mt19937_64 engine_;
};

enum Stream : std::uint64_t { kArrivals = 0, kService = 1, kSetup = 2, kTurnoff = 3 };

}  // namespace detail

/// Event-driven simulation. Service at the current queue length's speed;
/// when an arrival lifts q to k2 the remaining service is redrawn at c mu.
/// Statistics cover the completions after `warmup`, split into `batches`
/// equal batches (a trailing partial batch is dropped).
inline SimMetrics simulate(const SimConfig& cfg) {
  const Validated v = validate_params(cfg.params, cfg.policy);
  const SystemParams& p = v.params;
  const Policy& policy = v.policy;
  if (cfg.warmup < 0 || cfg.horizon <= cfg.warmup) throw Error(ErrorCode::BadParameter, "need horizon > warmup >= 0");
  if (cfg.batches < 2) throw Error(ErrorCode::DegenerateBatches, "at least 2 batches required");
  const std::int64_t batch_size = (cfg.horizon - cfg.warmup) / cfg.batches;
  if (batch_size < 1) throw Error(ErrorCode::DegenerateBatches, "fewer completions than batches");
  const std::int64_t stop_at = cfg.warmup + batch_size * cfg.batches;
  constexpr std::int64_t kQueueLimit = 1'000'000;

  detail::ExpStream arrivals(cfg.seed, detail::kArrivals);
  detail::ExpStream service(cfg.seed, detail::kService);
  detail::ExpStream setup(cfg.seed, detail::kSetup);
  detail::ExpStream turnoff(cfg.seed, detail::kTurnoff);

  std::array<double, kPhaseCount> power{};
  power[static_cast<std::size_t>(ServerPhase::Idle)] = p.p_idle;
  power[static_cast<std::size_t>(ServerPhase::Switching)] = p.p_setup;
  power[static_cast<std::size_t>(ServerPhase::Slow)] = p.p_slow;
  power[static_cast<std::size_t>(ServerPhase::Fast)] = p.p_fast;

  constexpr double kNever = std::numeric_limits<double>::infinity();
  double now = 0.0;
  double next_arrival = arrivals.draw(p.lambda);
  double service_end = kNever;
  double setup_end = kNever;
  double turnoff_at = kNever;

  // Start empty and on; with instant off the empty on-state does not exist.
  ServerPhase phase = policy.instant_off() ? ServerPhase::Off : ServerPhase::Idle;
  if (phase == ServerPhase::Idle && !policy.never_off() && !policy.instant_off()) {
    turnoff_at = turnoff.draw(policy.alpha);
  }
  std::int64_t q = 0;
  std::deque<double> waiting;  // arrival times, FCFS
  std::int64_t completed = 0;

  std::vector<double> response_sum(static_cast<std::size_t>(cfg.batches), 0.0);
  std::vector<double> energy(static_cast<std::size_t>(cfg.batches), 0.0);
  std::vector<double> duration(static_cast<std::size_t>(cfg.batches), 0.0);
  std::array<double, kPhaseCount> phase_time{};
  double area_q = 0.0;

  [[maybe_unused]] auto serving = [&] { return phase == ServerPhase::Slow || phase == ServerPhase::Fast; };
  auto start_service = [&] {
    phase = policy.k2.fast_at(static_cast<int>(std::min<std::int64_t>(q, kQueueLimit))) ? ServerPhase::Fast
                                                                                        : ServerPhase::Slow;
    service_end = now + service.draw(phase == ServerPhase::Fast ? p.fast_rate() : p.mu);
  };

  while (completed < stop_at) {
    const double t = std::min({next_arrival, service_end, setup_end, turnoff_at});
    if (completed >= cfg.warmup) {
      const double dt = t - now;
      const auto b = static_cast<std::size_t>((completed - cfg.warmup) / batch_size);
      energy[b] += power[static_cast<std::size_t>(phase)] * dt;
      duration[b] += dt;
      phase_time[static_cast<std::size_t>(phase)] += dt;
      area_q += static_cast<double>(q) * dt;
    }
    now = t;

    if (t == next_arrival) {
      next_arrival = now + arrivals.draw(p.lambda);
      waiting.push_back(now);
      ++q;
      if (q > kQueueLimit) throw Error(ErrorCode::UnstableDetected, "queue exceeded 1e6 jobs");
      switch (phase) {
        case ServerPhase::Off:
          if (q >= policy.k1) {
            phase = ServerPhase::Switching;
            setup_end = now + setup.draw(p.gamma);
          }
          break;
        case ServerPhase::Switching:
          break;
        case ServerPhase::Idle:
          turnoff_at = kNever;
          start_service();
          break;
        case ServerPhase::Slow:
          if (policy.k2.fast_at(static_cast<int>(q))) {
            phase = ServerPhase::Fast;
            service_end = now + service.draw(p.fast_rate());
          }
          break;
        case ServerPhase::Fast:
          break;
      }
    } else if (t == service_end) {
      assert(serving() && q >= 1);
      const double arrived = waiting.front();
      waiting.pop_front();
      --q;
      if (completed >= cfg.warmup) {
        response_sum[static_cast<std::size_t>((completed - cfg.warmup) / batch_size)] += now - arrived;
      }
      ++completed;
      service_end = kNever;
      if (q > 0) {
        start_service();
      } else if (policy.instant_off()) {
        phase = ServerPhase::Off;
      } else {
        phase = ServerPhase::Idle;
        if (!policy.never_off()) turnoff_at = now + turnoff.draw(policy.alpha);
      }
    } else if (t == setup_end) {
      assert(phase == ServerPhase::Switching && q >= policy.k1);
      setup_end = kNever;
      start_service();
    } else {
      assert(phase == ServerPhase::Idle && q == 0);
      turnoff_at = kNever;
      phase = ServerPhase::Off;
    }
    assert(serving() == (service_end != kNever));
  }

  SimMetrics m;
  m.completions = stop_at - cfg.warmup;
  double total_time = 0.0;
  double total_energy = 0.0;
  double total_response = 0.0;
  for (std::size_t b = 0; b < response_sum.size(); ++b) {
    m.response_batches.push_back(response_sum[b] / static_cast<double>(batch_size));
    m.power_batches.push_back(energy[b] / duration[b]);
    total_time += duration[b];
    total_energy += energy[b];
    total_response += response_sum[b];
  }
  m.mean_response = total_response / static_cast<double>(m.completions);
  m.mean_power = total_energy / total_time;
  m.response_ci = batch_ci_half_width(m.response_batches, 0.95);
  m.power_ci = batch_ci_half_width(m.power_batches, 0.95);
  m.mean_jobs = area_q / total_time;
  m.throughput = static_cast<double>(m.completions) / total_time;
  for (std::size_t i = 0; i < phase_time.size(); ++i) m.phase_time_fractions[i] = phase_time[i] / total_time;
  return m;
}

/// Optional corruption of the analytic side, for negative controls: every
/// transition of `kind` in the generator is scaled by `factor`.
struct RatePerturbation {
  TransitionKind kind = TransitionKind::Service;
  double factor = 1.05;
};

struct SimBudget {
  std::int64_t horizon = 2'000'000;
  std::int64_t warmup = 100'000;
  int batches = 20;
  std::uint64_t seed = 1;
  double level = 0.99;

  friend bool operator==(const SimBudget&, const SimBudget&) = default;
};

struct CrossValidation {
  PolicyMetrics analytic;
  SimMetrics simulated;
  double response_ci = 0.0;  ///< half-width at budget.level
  double power_ci = 0.0;
  bool response_ok = false;
  bool power_ok = false;

  [[nodiscard]] bool passed() const { return response_ok && power_ok; }
};

/// Analytic metrics of the (possibly perturbed) chain.
inline PolicyMetrics evaluate_analytic(const SystemParams& params, const Policy& policy, const Tolerances& tol,
                                       const std::optional<RatePerturbation>& perturb) {
  if (!perturb) return evaluate_policy(params, policy, tol);
  const Validated v = validate_params(params, policy);
  const int q_max = adaptive_truncation(v.params, v.policy, tol.mass);
  const Generator g = build_generator(v.params, v.policy, q_max).scaled(perturb->kind, perturb->factor);
  return metrics_from(solve_generator(g, v.params, tol));
}

/// Passes iff the analytic E[R] and E[P] both lie inside the simulator's
/// batch-means confidence intervals at budget.level.
inline CrossValidation cross_validate(const SystemParams& params, const Policy& policy, const Tolerances& tol,
                                      const SimBudget& budget,
                                      const std::optional<RatePerturbation>& perturb = std::nullopt) {
  CrossValidation cv;
  cv.analytic = evaluate_analytic(params, policy, tol, perturb);
  cv.simulated = simulate(SimConfig{params, policy, budget.horizon, budget.warmup, budget.seed, budget.batches});
  cv.response_ci = batch_ci_half_width(cv.simulated.response_batches, budget.level);
  cv.power_ci = batch_ci_half_width(cv.simulated.power_batches, budget.level);
  cv.response_ok = std::abs(cv.analytic.mean_response - cv.simulated.mean_response) <= cv.response_ci;
  cv.power_ok = std::abs(cv.analytic.mean_power - cv.simulated.mean_power) <= cv.power_ci;
  return cv;
}

}  // namespace powerq

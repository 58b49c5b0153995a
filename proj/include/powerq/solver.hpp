#pragma once

/// @file solver.hpp
/// Stationary distribution of the on/off two-speed chain.
///
/// The truncated chain is solved by banded GTH elimination in level order,
/// then normalised. Beyond the truncation level the distribution is
/// continued in closed form:
///
///   pi(0, q+1) = r pi(0, q),                 r = lambda / (lambda + gamma)
///   pi(1, q+1) = a (pi(1, q) + pi(0, q)),    a = lambda / (top service rate)
///
/// The first relation is the balance of a switching state (the only inflow
/// is an arrival from one level below). The second is the cut between
/// levels q and q+1 once every on-state above q is served at the top rate.
/// With reflecting truncation the state (0, q_max) holds exactly the lumped
/// mass of the infinite switching tail, and pi(1, q_max) is already exact up
/// to normalisation, so the continuation only adds the missing on-line tail
/// and re-spreads the lumped switching mass.

#include "powerq/error.hpp"
#include "powerq/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace powerq {

struct Tolerances {
  double residual = 1e-10;       ///< max-norm of pi Q
  double mass = 1e-12;           ///< admissible mass beyond q_max
  double negative_clip = 1e-12;  ///< round-off negatives up to this size are zeroed
  double min_load_gap = 1e-6;    ///< refuse when 1 - lambda / top rate is below this
  int max_refinements = 6;       ///< q_max doublings

  friend bool operator==(const Tolerances&, const Tolerances&) = default;
};

struct StationaryDistribution {
  SystemParams params;
  Policy policy;
  int q_max = 0;

  /// pi(1, q) and pi(0, q) for q = 0..q_max. `off` is empty when the server
  /// never turns off; absent states hold 0.
  std::vector<double> on;
  std::vector<double> off;

  double tail_mass_on = 0.0;    ///< sum over q > q_max of pi(1, q)
  double tail_mass_off = 0.0;   ///< sum over q > q_max of pi(0, q)
  double tail_moment_on = 0.0;  ///< sum over q > q_max of q pi(1, q)
  double tail_moment_off = 0.0;

  double tail_ratio_off = 0.0;  ///< lambda / (lambda + gamma)
  double tail_ratio_on = 0.0;   ///< asymptotic decay of the on-line tail
  double service_ratio = 0.0;   ///< lambda / top service rate

  double residual = 0.0;
  double tail_mass_bound = 0.0;
  int clipped_negatives = 0;
  int doublings = 0;

  [[nodiscard]] double probability(int s, int q) const {
    const auto& line = s == 1 ? on : off;
    if (q < 0 || q >= static_cast<int>(line.size())) return 0.0;
    return line[static_cast<std::size_t>(q)];
  }

  [[nodiscard]] double total_mass() const {
    const double body = std::accumulate(on.begin(), on.end(), 0.0) +
                        std::accumulate(off.begin(), off.end(), 0.0);
    return body + tail_mass_on + tail_mass_off;
  }
};

inline double tail_ratio_off(const SystemParams& params) noexcept {
  return params.lambda / (params.lambda + params.gamma);
}

/// Ratio governing how fast the truncation bound decays.
inline double effective_decay(const SystemParams& params, const Policy& policy) noexcept {
  const double service = params.lambda / top_service_rate(params, policy);
  if (policy.canonical().never_off()) return service;
  return std::max(service, tail_ratio_off(params));
}

/// Smallest q_max at or above max(k1, finite k2, 8) for which
/// rho^(q_max - knee) / (1 - rho) < mass_tol, knee = max(k1, finite k2 or 1).
/// The result is also lifted to build_generator's minimum level.
inline int adaptive_truncation(const SystemParams& params, const Policy& raw_policy, double mass_tol) {
  const Policy policy = raw_policy.canonical();
  const double top = top_service_rate(params, policy);
  if (params.lambda >= top) {
    throw Error(ErrorCode::Unstable, "lambda=" + format_number(params.lambda) +
                                         " >= service rate " + format_number(top));
  }
  const int k2 = policy.k2.is_finite() ? policy.k2.value() : 0;
  const int knee = std::max(policy.k1, policy.k2.is_finite() ? k2 : 1);
  int q_max = std::max({policy.k1, k2, 8});
  const double rho = effective_decay(params, policy);
  auto bound = [&](int q) { return std::pow(rho, q - knee) / (1.0 - rho); };
  if (!(bound(q_max) < mass_tol)) {
    // Jump near the answer, then settle on the smallest level by stepping.
    const double need = std::log(mass_tol * (1.0 - rho)) / std::log(rho);
    q_max = std::max(q_max, knee + static_cast<int>(std::floor(need)) - 1);
    while (q_max > std::max({policy.k1, k2, 8}) && bound(q_max - 1) < mass_tol) --q_max;
    while (!(bound(q_max) < mass_tol)) ++q_max;
  }
  return std::max(q_max, min_truncation_level(policy));
}

namespace detail {

/// Stationary vector of a finite generator by GTH (Grassmann-Taksar-Heyman)
/// elimination on a band. States are processed in `order`; every
/// transition must connect states at most `band` positions apart in that
/// order. Only additions of non-negative terms occur, so each entry carries
/// a small relative error even deep in the tail.
inline std::vector<double> gth_banded(const Generator& g, const std::vector<int>& order, int band) {
  const int n = g.dimension();
  const int width = 2 * band + 1;
  std::vector<int> pos(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) pos[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k;

  std::vector<double> m(static_cast<std::size_t>(n) * static_cast<std::size_t>(width), 0.0);
  auto cell = [&](int i, int j) -> double& {
    return m[static_cast<std::size_t>(i) * static_cast<std::size_t>(width) + static_cast<std::size_t>(j - i + band)];
  };
  for (const auto& t : g.entries()) cell(pos[static_cast<std::size_t>(t.from)], pos[static_cast<std::size_t>(t.to)]) += t.rate;

  std::vector<double> out_sum(static_cast<std::size_t>(n), 0.0);
  for (int k = n - 1; k >= 1; --k) {
    const int lo = std::max(0, k - band);
    double s = 0.0;
    for (int j = lo; j < k; ++j) s += cell(k, j);
    if (!(s > 0.0)) {
      throw Error(ErrorCode::SingularSystem, "state at position " + std::to_string(k) + " cannot reach lower states");
    }
    out_sum[static_cast<std::size_t>(k)] = s;
    for (int i = lo; i < k; ++i) {
      const double to_k = cell(i, k);
      if (to_k == 0.0) continue;
      for (int j = lo; j < k; ++j) {
        if (j != i) cell(i, j) += to_k * cell(k, j) / s;
      }
    }
  }

  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  x[0] = 1.0;
  for (int k = 1; k < n; ++k) {
    double inflow = 0.0;
    for (int i = std::max(0, k - band); i < k; ++i) inflow += x[static_cast<std::size_t>(i)] * cell(i, k);
    x[static_cast<std::size_t>(k)] = inflow / out_sum[static_cast<std::size_t>(k)];
  }
  double total = 0.0;
  for (double v : x) total += v;
  std::vector<double> pi(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) pi[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = x[static_cast<std::size_t>(k)] / total;
  return pi;
}

inline double balance_residual(const Generator& g, const std::vector<double>& pi) {
  std::vector<double> flow(pi.size(), 0.0);
  for (const auto& t : g.entries()) flow[static_cast<std::size_t>(t.to)] += pi[static_cast<std::size_t>(t.from)] * t.rate;
  double worst = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) worst = std::max(worst, std::abs(flow[i] + pi[i] * g.diagonal()[i]));
  return worst;
}

struct OnTail {
  double mass = 0.0;
  double moment = 0.0;  // sum of (q_max + j) pi(1, q_max + j), j >= 1
};

/// Closed-form sums of pi(1, q_max + j), j >= 1, where
/// pi(1, q_max + j + 1) = a (pi(1, q_max + j) + y r^j), pi(1, q_max) = x.
inline OnTail on_line_tail(double x, double y, double a, double r, int q_max) {
  const double qm = static_cast<double>(q_max);
  OnTail t;
  auto geo = [](double z) { return z / (1.0 - z); };
  auto geo_moment = [](double z) { return z / ((1.0 - z) * (1.0 - z)); };
  if (y == 0.0) {
    t.mass = x * geo(a);
    t.moment = qm * t.mass + x * geo_moment(a);
    return t;
  }
  if (std::abs(r - a) > 1e-6 * std::max(r, a)) {
    const double b = a * y / (r - a);
    t.mass = (x - b) * geo(a) + b * geo(r);
    t.moment = qm * t.mass + (x - b) * geo_moment(a) + b * geo_moment(r);
    return t;
  }
  // Coincident ratios: pi(1, q_max + j) = z^j (x + j y).
  const double z = 0.5 * (a + r);
  const double s1 = geo(z);
  const double s2 = geo_moment(z);                               // sum j z^j
  const double s3 = z * (1.0 + z) / ((1.0 - z) * (1.0 - z) * (1.0 - z));  // sum j^2 z^j
  t.mass = x * s1 + y * s2;
  t.moment = qm * t.mass + x * s2 + y * s3;
  return t;
}

}  // namespace detail

/// Solves one truncated generator and continues the tail in closed form.
/// `params` supplies the tail ratios; it must be the set `g` was built from
/// (a perturbed `g` is accepted and solved as given).
inline StationaryDistribution solve_generator(const Generator& g, const SystemParams& params,
                                              const Tolerances& tol = {}) {
  const int n = g.dimension();
  const int q_max = g.truncation_level();
  const Policy& policy = g.policy();

  // Level order (q, then s) keeps every transition inside a narrow band.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const State& x = g.state(a);
    const State& y = g.state(b);
    return x.q != y.q ? x.q < y.q : x.s < y.s;
  });
  std::vector<int> pos(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) pos[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k;
  int band = 1;
  for (const auto& t : g.entries()) {
    band = std::max(band, std::abs(pos[static_cast<std::size_t>(t.from)] - pos[static_cast<std::size_t>(t.to)]));
  }

  std::vector<double> pi = detail::gth_banded(g, order, band);

  StationaryDistribution d;
  d.params = params;
  d.policy = policy;
  d.q_max = q_max;

  double mass = 0.0;
  for (auto& v : pi) {
    if (v < 0.0) {
      if (v < -tol.negative_clip) {
        throw Error(ErrorCode::ToleranceNotMet, "negative probability " + format_number(v));
      }
      v = 0.0;
      ++d.clipped_negatives;
    }
    mass += v;
  }
  for (auto& v : pi) v /= mass;
  d.residual = detail::balance_residual(g, pi);
  if (!(d.residual <= tol.residual)) {
    throw Error(ErrorCode::ToleranceNotMet, "balance residual " + format_number(d.residual));
  }

  d.on.assign(static_cast<std::size_t>(q_max) + 1, 0.0);
  if (!policy.never_off()) d.off.assign(static_cast<std::size_t>(q_max) + 1, 0.0);
  for (int i = 0; i < n; ++i) {
    const State& st = g.state(i);
    (st.s == 1 ? d.on : d.off)[static_cast<std::size_t>(st.q)] = pi[static_cast<std::size_t>(i)];
  }

  d.tail_ratio_off = tail_ratio_off(params);
  d.service_ratio = params.lambda / top_service_rate(params, policy);
  d.tail_ratio_on = d.service_ratio;

  double y = 0.0;
  if (!d.off.empty()) {
    const double r = d.tail_ratio_off;
    const auto top = static_cast<std::size_t>(q_max);
    d.off[top] = d.off[top - 1] * r;
    y = d.off[top];
    d.tail_mass_off = y * r / (1.0 - r);
    d.tail_moment_off = static_cast<double>(q_max) * d.tail_mass_off + y * r / ((1.0 - r) * (1.0 - r));
    if (y > 0.0) d.tail_ratio_on = std::max(d.service_ratio, r);
  }
  const auto tail = detail::on_line_tail(d.on.back(), y, d.service_ratio, d.tail_ratio_off, q_max);
  d.tail_mass_on = tail.mass;
  d.tail_moment_on = tail.moment;

  const double total = d.total_mass();
  for (auto& v : d.on) v /= total;
  for (auto& v : d.off) v /= total;
  d.tail_mass_on /= total;
  d.tail_mass_off /= total;
  d.tail_moment_on /= total;
  d.tail_moment_off /= total;
  d.tail_mass_bound = d.tail_mass_on + d.tail_mass_off;
  return d;
}

/// Stationary distribution with adaptive truncation. q_max starts at
/// adaptive_truncation() and doubles while the continued tail carries more
/// than tol.mass.
inline StationaryDistribution solve_stationary(const SystemParams& params, const Policy& raw_policy,
                                               const Tolerances& tol = {}) {
  const Validated v = validate_params(params, raw_policy);
  const double load = params.lambda / top_service_rate(v.params, v.policy);
  if (1.0 - load < tol.min_load_gap) {
    throw Error(ErrorCode::Unstable, "load " + format_number(load) + " too close to 1 to solve in practice");
  }
  int q_max = adaptive_truncation(v.params, v.policy, tol.mass);
  for (int round = 0;; ++round) {
    StationaryDistribution d = solve_generator(build_generator(v.params, v.policy, q_max), v.params, tol);
    d.doublings = round;
    if (d.tail_mass_bound <= tol.mass || round >= tol.max_refinements) return d;
    q_max *= 2;
  }
}

/// Conservation checks on a solved distribution; all values are errors
/// (0 is perfect).
struct BalanceReport {
  double residual = 0.0;
  double mass_error = 0.0;              ///< |total mass - 1|
  double cut_balance_rel = 0.0;         ///< flow s=0 -> s=1 vs s=1 -> s=0
  double throughput_rel = 0.0;          ///< departure rate vs lambda
  double off_ratio_rel = 0.0;           ///< pi(0,q+1)/pi(0,q) vs lambda/(lambda+gamma)
  double level_recurrence_rel = 0.0;    ///< pi(1,q+1) vs a (pi(1,q) + pi(0,q)) above the knee
};

inline double relative_difference(double x, double ref) {
  const double scale = std::max(std::abs(ref), std::abs(x));
  return scale == 0.0 ? 0.0 : std::abs(x - ref) / scale;
}

inline BalanceReport check_balance(const StationaryDistribution& d) {
  const SystemParams& p = d.params;
  const Policy& policy = d.policy;
  BalanceReport rep;
  rep.residual = d.residual;
  rep.mass_error = std::abs(d.total_mass() - 1.0);

  auto rate_at = [&](int q) { return policy.k2.fast_at(q) ? p.fast_rate() : p.mu; };
  double departures = 0.0;
  for (int q = 1; q <= d.q_max; ++q) departures += rate_at(q) * d.probability(1, q);
  departures += top_service_rate(p, policy) * d.tail_mass_on;
  rep.throughput_rel = relative_difference(departures, p.lambda);

  if (!d.off.empty()) {
    double switching = d.tail_mass_off;
    for (int q = policy.k1; q <= d.q_max; ++q) switching += d.probability(0, q);
    const double up = p.gamma * switching;
    const double down = policy.instant_off() ? rate_at(1) * d.probability(1, 1) : policy.alpha * d.probability(1, 0);
    rep.cut_balance_rel = relative_difference(up, down);

    for (int q = policy.k1; q < d.q_max; ++q) {
      const double lo = d.probability(0, q);
      const double hi = d.probability(0, q + 1);
      if (lo < 1e-280 || hi < 1e-280) break;
      rep.off_ratio_rel = std::max(rep.off_ratio_rel, relative_difference(hi / lo, d.tail_ratio_off));
    }
  }

  const int knee = std::max(policy.k1, policy.k2.is_finite() ? policy.k2.value() : 1);
  for (int q = knee; q < d.q_max; ++q) {
    const double predicted = d.service_ratio * (d.probability(1, q) + d.probability(0, q));
    const double actual = d.probability(1, q + 1);
    if (actual < 1e-280) break;
    rep.level_recurrence_rel = std::max(rep.level_recurrence_rel, relative_difference(actual, predicted));
  }
  return rep;
}

}  // namespace powerq

#pragma once

/// @file optimizer.hpp
/// Exhaustive policy search, regime classification of the optimum,
/// arrival-rate regime thresholds and the synergy gap between speed
/// scaling and on/off control.

#include "powerq/error.hpp"
#include "powerq/metrics.hpp"
#include "powerq/model.hpp"
#include "powerq/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string_view>
#include <tuple>
#include <vector>

namespace powerq {

struct SearchSpace {
  int k1_max = 10;
  int k2_max = 20;
  std::vector<double> alpha_grid{0.0, 1e-2, 1e-1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0, kInf};

  void validate() const {
    if (k1_max < 1 || k2_max < 1) throw Error(ErrorCode::BadThreshold, "k1_max and k2_max must be >= 1");
    if (alpha_grid.empty()) throw Error(ErrorCode::BadParameter, "alpha_grid is empty");
    if (!std::is_sorted(alpha_grid.begin(), alpha_grid.end())) {
      throw Error(ErrorCode::BadParameter, "alpha_grid must be sorted");
    }
    if (alpha_grid.front() != 0.0 || alpha_grid.back() != kInf) {
      throw Error(ErrorCode::BadParameter, "alpha_grid must contain 0 and inf");
    }
  }

  /// Canonical, duplicate-free policies. k1 only varies when alpha > 0.
  [[nodiscard]] std::vector<Policy> policies() const {
    validate();
    std::vector<SpeedThreshold> speeds;
    for (int k2 = 1; k2 <= k2_max; ++k2) speeds.emplace_back(k2);
    speeds.push_back(SpeedThreshold::infinite());

    std::vector<Policy> out;
    double previous = -1.0;
    for (double alpha : alpha_grid) {
      if (alpha == previous) continue;
      previous = alpha;
      const int k1_top = alpha == 0.0 ? 1 : k1_max;
      for (int k1 = 1; k1 <= k1_top; ++k1) {
        for (auto k2 : speeds) out.push_back(Policy{k1, k2, alpha});
      }
    }
    return out;
  }

  friend bool operator==(const SearchSpace&, const SearchSpace&) = default;
};

enum class Regime { FastOnlyAlwaysOn, BothSpeedsAlwaysOn, SlowOnlyAlwaysOn, SlowOnlyOnOff, Other };

inline constexpr std::string_view to_string(Regime r) noexcept {
  switch (r) {
    case Regime::FastOnlyAlwaysOn: return "FastOnlyAlwaysOn";
    case Regime::BothSpeedsAlwaysOn: return "BothSpeedsAlwaysOn";
    case Regime::SlowOnlyAlwaysOn: return "SlowOnlyAlwaysOn";
    case Regime::SlowOnlyOnOff: return "SlowOnlyOnOff";
    case Regime::Other: return "Other";
  }
  return "?";
}

inline Regime classify(const Policy& raw) {
  const Policy p = raw.canonical();
  if (p.never_off()) {
    if (p.k2.is_infinite()) return Regime::SlowOnlyAlwaysOn;
    return p.k2.value() == 1 ? Regime::FastOnlyAlwaysOn : Regime::BothSpeedsAlwaysOn;
  }
  return p.k2.is_infinite() ? Regime::SlowOnlyOnOff : Regime::Other;
}

/// Order used to break cost ties: fewer active mechanisms first (never off
/// before on/off, single speed before mixed speeds), then smaller k1, k2,
/// alpha.
inline auto simplicity_key(const Policy& p) {
  const bool mixed = p.k2.is_finite() && p.k2.value() > 1;
  return std::make_tuple(p.never_off() ? 0 : 1, mixed ? 1 : 0, p.k1, p.k2, p.alpha);
}

struct PolicyEvaluation {
  Policy policy;
  PolicyMetrics metrics;
};

inline constexpr double kTieTolerance = 1e-9;

/// Minimum-cost entry among those satisfying `keep`; entries within
/// relative kTieTolerance of the minimum are resolved by simplicity_key.
template <typename Pred>
std::optional<PolicyEvaluation> best_of(const std::vector<PolicyEvaluation>& evals, Pred keep) {
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& e : evals) {
    if (keep(e.policy)) lowest = std::min(lowest, e.metrics.cost);
  }
  if (!std::isfinite(lowest)) return std::nullopt;
  const double cutoff = lowest + kTieTolerance * std::abs(lowest);
  std::optional<PolicyEvaluation> best;
  for (const auto& e : evals) {
    if (!keep(e.policy) || e.metrics.cost > cutoff) continue;
    if (!best || simplicity_key(e.policy) < simplicity_key(best->policy)) best = e;
  }
  return best;
}

inline std::optional<PolicyEvaluation> best_of(const std::vector<PolicyEvaluation>& evals) {
  return best_of(evals, [](const Policy&) { return true; });
}

/// Evaluates every stable policy of `space`, in the space's enumeration
/// order. Policies that are unstable (or too close to instability to
/// solve) are skipped.
inline std::vector<PolicyEvaluation> evaluate_space(const SystemParams& params, const SearchSpace& space,
                                                    const Tolerances& tol = {}, int jobs = 1) {
  validate_system(params);
  const auto policies = space.policies();
  std::vector<std::optional<PolicyEvaluation>> slots(policies.size());
  parallel_for(policies.size(), jobs, [&](std::size_t i) {
    const Policy& p = policies[i];
    const double load = params.lambda / top_service_rate(params, p);
    if (1.0 - load < tol.min_load_gap) return;
    slots[i] = PolicyEvaluation{p, evaluate_policy(params, p, tol)};
  });
  std::vector<PolicyEvaluation> out;
  out.reserve(slots.size());
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  return out;
}

inline PolicyEvaluation optimize(const SystemParams& params, const SearchSpace& space, const Tolerances& tol = {},
                                 int jobs = 1) {
  auto best = best_of(evaluate_space(params, space, tol, jobs));
  if (!best) {
    throw Error(ErrorCode::EmptyFeasibleSet, "no stable policy at lambda=" + format_number(params.lambda));
  }
  return *best;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct RegimeSegment {
  Interval lambdas;
  Regime regime = Regime::Other;
};

/// A bracketed regime change: `left` is optimal at lambdas.lo, `right` at
/// lambdas.hi.
struct RegimeChange {
  Interval lambdas;
  Regime left = Regime::Other;
  Regime right = Regime::Other;
};

struct ThresholdReport {
  std::optional<Interval> lambda1;  ///< BothSpeedsAlwaysOn -> FastOnlyAlwaysOn
  std::optional<Interval> lambda2;  ///< SlowOnlyAlwaysOn -> BothSpeedsAlwaysOn
  std::optional<Interval> lambda3;  ///< SlowOnlyOnOff -> SlowOnlyAlwaysOn
  std::vector<RegimeSegment> regime_sequence;
  std::vector<RegimeChange> changes;
  bool preference_flag = false;
  bool structure_violation = false;
  std::vector<RegimeSegment> violations;
  std::map<double, PolicyEvaluation> optima;  ///< every lambda optimised, keyed by lambda

  /// True when all three thresholds were found in order with no violation.
  [[nodiscard]] bool complete() const {
    return !structure_violation && lambda1 && lambda2 && lambda3 && lambda3->hi <= lambda2->lo &&
           lambda2->hi <= lambda1->lo;
  }
};

struct ThresholdOptions {
  double resolution = 1e-3;
  int coarse_points = 75;
  int jobs = 1;
  Tolerances tol{};
};

inline constexpr Regime kExpectedOrder[] = {Regime::SlowOnlyOnOff, Regime::SlowOnlyAlwaysOn,
                                            Regime::BothSpeedsAlwaysOn, Regime::FastOnlyAlwaysOn};

inline int expected_rank(Regime r) {
  for (int i = 0; i < 4; ++i) {
    if (kExpectedOrder[i] == r) return i;
  }
  return -1;
}

inline void require_slow_preference(const SystemParams& p) {
  validate_system(p);
  if (!p.slow_is_cheaper_per_job()) {
    throw Error(ErrorCode::PreferenceViolated,
                "p_fast/(c mu)=" + format_number(p.p_fast / p.fast_rate()) +
                    " does not exceed p_slow/mu=" + format_number(p.p_slow / p.mu));
  }
}

/// Evenly spaced points lo..hi inclusive.
inline std::vector<double> linear_grid(double lo, double hi, int points) {
  if (points < 2) return {lo};
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
  g.back() = hi;
  return g;
}

/// Optimises on a coarse lambda grid, bisects each change of the optimal
/// regime down to `opts.resolution`, and reports the bracketed thresholds.
/// Anything but exactly SlowOnlyOnOff -> SlowOnlyAlwaysOn ->
/// BothSpeedsAlwaysOn -> FastOnlyAlwaysOn across the range (an Other
/// optimum, a reversal, a repeat or a missing regime) sets
/// structure_violation; out-of-order segments are listed in `violations`.
/// It is a finding, not an error.
inline ThresholdReport find_thresholds(const SystemParams& base, Interval range, const SearchSpace& space,
                                       const ThresholdOptions& opts = {}) {
  require_slow_preference(base);
  if (!(range.lo > 0.0) || !(range.hi > range.lo)) throw Error(ErrorCode::BadParameter, "bad lambda range");
  if (!(opts.resolution > 0.0)) throw Error(ErrorCode::BadParameter, "resolution must be positive");

  ThresholdReport rep;
  rep.preference_flag = true;
  auto regime_at = [&](double lambda) {
    auto it = rep.optima.find(lambda);
    if (it == rep.optima.end()) {
      SystemParams p = base;
      p.lambda = lambda;
      it = rep.optima.emplace(lambda, optimize(p, space, opts.tol, opts.jobs)).first;
    }
    return classify(it->second.policy);
  };

  std::vector<RegimeChange> changes;
  auto refine = [&](auto&& self, double lo, Regime left, double hi, Regime right) -> void {
    if (hi - lo <= opts.resolution) {
      changes.push_back({{lo, hi}, left, right});
      return;
    }
    const double mid = 0.5 * (lo + hi);
    const Regime r = regime_at(mid);
    if (r == left) {
      self(self, mid, left, hi, right);
    } else if (r == right) {
      self(self, lo, left, mid, right);
    } else {
      self(self, lo, left, mid, r);
      self(self, mid, r, hi, right);
    }
  };

  const auto grid = linear_grid(range.lo, range.hi, opts.coarse_points);
  std::vector<Regime> coarse(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) coarse[i] = regime_at(grid[i]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (coarse[i] != coarse[i - 1]) refine(refine, grid[i - 1], coarse[i - 1], grid[i], coarse[i]);
  }
  rep.changes = changes;

  double seg_lo = range.lo;
  Regime current = coarse.front();
  for (const auto& ch : changes) {
    rep.regime_sequence.push_back({{seg_lo, ch.lambdas.lo}, current});
    seg_lo = ch.lambdas.hi;
    current = ch.right;
  }
  rep.regime_sequence.push_back({{seg_lo, range.hi}, current});

  int last_rank = -1;
  std::array<bool, 4> seen{};
  for (const auto& seg : rep.regime_sequence) {
    const int rank = expected_rank(seg.regime);
    if (rank <= last_rank) {
      rep.structure_violation = true;
      rep.violations.push_back(seg);
    }
    if (rank >= 0) seen[static_cast<std::size_t>(rank)] = true;
    last_rank = std::max(last_rank, rank);
  }
  // A regime that never appears is also a departure from the expected structure.
  for (bool s : seen) rep.structure_violation = rep.structure_violation || !s;

  for (const auto& ch : changes) {
    std::optional<Interval>* slot = nullptr;
    if (ch.left == Regime::SlowOnlyOnOff && ch.right == Regime::SlowOnlyAlwaysOn) slot = &rep.lambda3;
    if (ch.left == Regime::SlowOnlyAlwaysOn && ch.right == Regime::BothSpeedsAlwaysOn) slot = &rep.lambda2;
    if (ch.left == Regime::BothSpeedsAlwaysOn && ch.right == Regime::FastOnlyAlwaysOn) slot = &rep.lambda1;
    if (slot == nullptr) continue;
    if (slot->has_value()) {
      rep.structure_violation = true;
    } else {
      *slot = ch.lambdas;
    }
  }
  return rep;
}

struct SynergyRow {
  double lambda = 0.0;
  PolicyEvaluation best_overall;
  std::optional<PolicyEvaluation> best_never_off;
  std::optional<PolicyEvaluation> best_single_speed_onoff;
  double relative_gain = 0.0;
};

struct SynergyReport {
  std::vector<SynergyRow> rows;
  double max_relative_gain = 0.0;
  double argmax_lambda = 0.0;
  double smallness_threshold = 0.05;

  [[nodiscard]] bool mechanisms_not_synergistic() const { return max_relative_gain < smallness_threshold; }
};

inline bool single_speed(const Policy& p) { return p.k2.is_infinite() || p.k2.value() == 1; }

/// Builds one synergy row from a full evaluation of the search space.
inline SynergyRow synergy_row(double lambda, const std::vector<PolicyEvaluation>& evals) {
  auto overall = best_of(evals);
  if (!overall) throw Error(ErrorCode::EmptyFeasibleSet, "no stable policy at lambda=" + format_number(lambda));
  SynergyRow row;
  row.lambda = lambda;
  row.best_overall = *overall;
  row.best_never_off = best_of(evals, [](const Policy& p) { return p.never_off(); });
  row.best_single_speed_onoff = best_of(evals, [](const Policy& p) { return single_speed(p); });
  double restricted = std::numeric_limits<double>::infinity();
  if (row.best_never_off) restricted = std::min(restricted, row.best_never_off->metrics.cost);
  if (row.best_single_speed_onoff) restricted = std::min(restricted, row.best_single_speed_onoff->metrics.cost);
  row.relative_gain = std::isfinite(restricted) ? (restricted - overall->metrics.cost) / restricted : 1.0;
  return row;
}

/// Relative cost advantage of the best policy over the better of the two
/// single-mechanism families (never off with free speeds; single speed
/// with free on/off), per lambda.
inline SynergyReport synergy_gap(const SystemParams& base, const std::vector<double>& lambdas, const SearchSpace& space,
                                 double smallness_threshold = 0.05, const Tolerances& tol = {}, int jobs = 1) {
  require_slow_preference(base);
  SynergyReport rep;
  rep.smallness_threshold = smallness_threshold;
  std::vector<double> sorted = lambdas;
  std::sort(sorted.begin(), sorted.end());
  for (double lambda : sorted) {
    SystemParams p = base;
    p.lambda = lambda;
    rep.rows.push_back(synergy_row(lambda, evaluate_space(p, space, tol, jobs)));
  }
  rep.max_relative_gain = -std::numeric_limits<double>::infinity();
  for (const auto& row : rep.rows) {
    if (row.relative_gain > rep.max_relative_gain) {
      rep.max_relative_gain = row.relative_gain;
      rep.argmax_lambda = row.lambda;
    }
  }
  return rep;
}

}  // namespace powerq

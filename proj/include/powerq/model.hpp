#pragma once

/// @file model.hpp
/// Domain types for a single server with on/off control and two service
/// speeds, and construction of the truncated CTMC generator over (s, q).
///
/// s = 0 means the server is off or being switched on, s = 1 means it is on
/// (idle or serving). q is the number of jobs in the system.

#include "powerq/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace powerq {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Physical and environment parameters.
struct SystemParams {
  double lambda = 0.5;  ///< arrival rate
  double mu = 1.0;      ///< slow service rate
  double c = 2.0;       ///< fast/slow speed ratio, > 1
  double gamma = 0.5;   ///< setup completion rate
  double p_idle = 0.6;
  double p_setup = 4.0;
  double p_slow = 1.0;
  double p_fast = 4.0;
  double beta = 0.5;  ///< weight of mean power in the cost

  [[nodiscard]] double fast_rate() const noexcept { return c * mu; }

  /// True when a job is cheaper in energy at the slow speed:
  /// p_fast / (c mu) > p_slow / mu.
  [[nodiscard]] bool slow_is_cheaper_per_job() const noexcept {
    return p_fast / (c * mu) > p_slow / mu;
  }

  friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

/// Queue length at or above which the fast speed is used. `infinite()`
/// means the fast speed is never used.
class SpeedThreshold {
 public:
  constexpr SpeedThreshold() = default;
  constexpr explicit SpeedThreshold(int k) : value_(k) {}

  static constexpr SpeedThreshold infinite() noexcept { return SpeedThreshold(kInfinite); }

  [[nodiscard]] constexpr bool is_infinite() const noexcept { return value_ == kInfinite; }
  [[nodiscard]] constexpr bool is_finite() const noexcept { return !is_infinite(); }
  /// Only meaningful when finite.
  [[nodiscard]] constexpr int value() const noexcept { return value_; }
  /// True iff a job count of q is served at the fast rate.
  [[nodiscard]] constexpr bool fast_at(int q) const noexcept { return is_finite() && q >= value_; }

  friend constexpr auto operator<=>(SpeedThreshold, SpeedThreshold) = default;

 private:
  static constexpr int kInfinite = std::numeric_limits<int>::max();
  int value_ = 1;
};

/// Control triple (k1, k2, alpha). alpha = 0 never turns the server off,
/// alpha = +inf turns it off the instant the system empties.
struct Policy {
  int k1 = 1;
  SpeedThreshold k2{1};
  double alpha = 0.0;

  [[nodiscard]] bool never_off() const noexcept { return alpha == 0.0; }
  [[nodiscard]] bool instant_off() const noexcept { return alpha == kInf; }

  /// alpha = 0 makes k1 irrelevant; canonical form pins it to 1.
  [[nodiscard]] Policy canonical() const noexcept {
    Policy p = *this;
    if (p.never_off()) p.k1 = 1;
    return p;
  }

  friend bool operator==(const Policy&, const Policy&) = default;
};

/// Shortest text that reads back to the same double; +inf prints as "inf".
inline std::string format_number(double x) {
  if (x == kInf) return "inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

inline std::string to_string(SpeedThreshold k) {
  return k.is_infinite() ? std::string("inf") : std::to_string(k.value());
}

inline std::string to_string(const Policy& p) {
  return "(k1=" + std::to_string(p.k1) + ", k2=" + to_string(p.k2) +
         ", alpha=" + format_number(p.alpha) + ")";
}

enum class ServerPhase { Off, Switching, Idle, Slow, Fast };

inline constexpr int kPhaseCount = 5;

inline constexpr std::string_view to_string(ServerPhase ph) noexcept {
  switch (ph) {
    case ServerPhase::Off: return "Off";
    case ServerPhase::Switching: return "Switching";
    case ServerPhase::Idle: return "Idle";
    case ServerPhase::Slow: return "Slow";
    case ServerPhase::Fast: return "Fast";
  }
  return "?";
}

inline constexpr ServerPhase phase_of(int s, int q, const Policy& policy) noexcept {
  if (s == 0) return q < policy.k1 ? ServerPhase::Off : ServerPhase::Switching;
  if (q == 0) return ServerPhase::Idle;
  return policy.k2.fast_at(q) ? ServerPhase::Fast : ServerPhase::Slow;
}

/// Outcome of validate_params: canonical inputs plus the speed-preference
/// flag (p_fast/(c mu) > p_slow/mu), which is reported rather than enforced.
struct Validated {
  SystemParams params;
  Policy policy;
  bool slow_cheaper_per_job = false;
};

namespace detail {

inline void require_positive(double x, const char* name) {
  if (std::isnan(x)) throw Error(ErrorCode::BadParameter, std::string(name) + " is NaN");
  if (x <= 0.0) {
    throw Error(ErrorCode::NegativeRate,
                std::string(name) + " must be positive, got " + format_number(x));
  }
}

inline void require_nonnegative(double x, const char* name) {
  if (std::isnan(x) || x < 0.0) {
    throw Error(ErrorCode::BadParameter,
                std::string(name) + " must be >= 0, got " + format_number(x));
  }
}

}  // namespace detail

/// Checks parameters that do not depend on a policy.
inline void validate_system(const SystemParams& p) {
  detail::require_positive(p.lambda, "lambda");
  detail::require_positive(p.mu, "mu");
  detail::require_positive(p.gamma, "gamma");
  if (std::isnan(p.c) || !std::isfinite(p.c)) throw Error(ErrorCode::BadParameter, "c must be finite");
  if (p.c <= 1.0) {
    throw Error(ErrorCode::NonScaledSpeed, "c must exceed 1, got " + format_number(p.c));
  }
  detail::require_nonnegative(p.beta, "beta");
  detail::require_nonnegative(p.p_idle, "p_idle");
  detail::require_nonnegative(p.p_setup, "p_setup");
  if (std::isnan(p.p_slow) || p.p_slow <= 0.0) {
    throw Error(ErrorCode::BadParameter, "p_slow must be positive");
  }
  if (std::isnan(p.p_fast) || p.p_fast < p.p_slow) {
    throw Error(ErrorCode::BadParameter, "p_fast must be >= p_slow");
  }
}

/// Service rate used at and above the speed threshold (the rate that
/// governs stability).
inline double top_service_rate(const SystemParams& p, const Policy& policy) noexcept {
  return policy.k2.is_finite() ? p.fast_rate() : p.mu;
}

inline Validated validate_params(const SystemParams& params, const Policy& policy) {
  validate_system(params);
  if (std::isnan(policy.alpha)) throw Error(ErrorCode::BadParameter, "alpha is NaN");
  if (policy.alpha < 0.0) {
    throw Error(ErrorCode::NegativeRate, "alpha must be >= 0, got " + format_number(policy.alpha));
  }
  if (policy.k1 < 1) throw Error(ErrorCode::BadThreshold, "k1 must be >= 1");
  if (policy.k2.is_finite() && policy.k2.value() < 1) {
    throw Error(ErrorCode::BadThreshold, "k2 must be >= 1 or inf");
  }
  const double top = top_service_rate(params, policy);
  if (params.lambda >= top) {
    throw Error(ErrorCode::Unstable, "lambda=" + format_number(params.lambda) +
                                         " >= service rate " + format_number(top));
  }
  return Validated{params, policy.canonical(), params.slow_is_cheaper_per_job()};
}

/// A CTMC state.
struct State {
  int s = 0;
  int q = 0;
  friend bool operator==(const State&, const State&) = default;
};

enum class TransitionKind { Arrival, Setup, Turnoff, Service };

struct Transition {
  int from = 0;
  int to = 0;
  double rate = 0.0;
  TransitionKind kind = TransitionKind::Arrival;
};

/// Truncated generator in coordinate form. Diagonal entries are kept
/// separately as the negated row sums of `entries`.
class Generator {
 public:
  Generator(Policy policy, int q_max) : policy_(policy), q_max_(q_max) {
    on_index_.assign(static_cast<std::size_t>(q_max) + 1, -1);
    off_index_.assign(static_cast<std::size_t>(q_max) + 1, -1);
  }

  [[nodiscard]] int dimension() const noexcept { return static_cast<int>(states_.size()); }
  [[nodiscard]] int truncation_level() const noexcept { return q_max_; }
  [[nodiscard]] const Policy& policy() const noexcept { return policy_; }
  [[nodiscard]] const std::vector<State>& states() const noexcept { return states_; }
  [[nodiscard]] const std::vector<Transition>& entries() const noexcept { return entries_; }
  [[nodiscard]] const std::vector<double>& diagonal() const noexcept { return diagonal_; }

  [[nodiscard]] const State& state(int index) const { return states_.at(static_cast<std::size_t>(index)); }

  /// Index of (s, q), or nullopt when the state is not part of the chain.
  [[nodiscard]] std::optional<int> index_of(int s, int q) const {
    if (q < 0 || q > q_max_ || (s != 0 && s != 1)) return std::nullopt;
    const int idx = (s == 1 ? on_index_ : off_index_)[static_cast<std::size_t>(q)];
    if (idx < 0) return std::nullopt;
    return idx;
  }

  [[nodiscard]] bool contains(int s, int q) const { return index_of(s, q).has_value(); }

  /// Largest absolute row sum including the diagonal.
  [[nodiscard]] double max_row_sum_error() const {
    std::vector<double> sums = diagonal_;
    for (const auto& t : entries_) sums[static_cast<std::size_t>(t.from)] += t.rate;
    double worst = 0.0;
    for (double v : sums) worst = std::max(worst, std::abs(v));
    return worst;
  }

  /// Multiplies every transition of one kind by `factor` and refreshes the
  /// diagonal. Used to build deliberately mis-specified chains.
  [[nodiscard]] Generator scaled(TransitionKind kind, double factor) const {
    Generator g = *this;
    for (auto& t : g.entries_) {
      if (t.kind == kind) t.rate *= factor;
    }
    g.refresh_diagonal();
    return g;
  }

  int add_state(int s, int q) {
    const int idx = dimension();
    states_.push_back({s, q});
    (s == 1 ? on_index_ : off_index_)[static_cast<std::size_t>(q)] = idx;
    return idx;
  }

  void add_transition(int from, int to, double rate, TransitionKind kind) {
    if (rate > 0.0) entries_.push_back({from, to, rate, kind});
  }

  void refresh_diagonal() {
    diagonal_.assign(states_.size(), 0.0);
    for (const auto& t : entries_) diagonal_[static_cast<std::size_t>(t.from)] -= t.rate;
  }

 private:
  Policy policy_;
  int q_max_;
  std::vector<State> states_;
  std::vector<int> on_index_;
  std::vector<int> off_index_;
  std::vector<Transition> entries_;
  std::vector<double> diagonal_;
};

/// Smallest truncation level accepted by build_generator.
inline int min_truncation_level(const Policy& policy) noexcept {
  const int k2 = policy.k2.is_finite() ? policy.k2.value() : 0;
  return std::max(policy.k1, k2) + 2;
}

/// Builds the reflecting truncation of the chain at level q_max.
///
/// Transitions: arrivals move q up by one in both lines; setup moves (0,q)
/// to (1,q) for q >= k1; a finite positive alpha moves (1,0) to (0,0);
/// service moves (1,q) to (1,q-1) at mu below k2 and c mu at or above it.
/// alpha = inf drops (1,0) and sends the last departure to (0,0);
/// alpha = 0 drops the whole s = 0 line. Arrivals out of level q_max are
/// dropped.
inline Generator build_generator(const SystemParams& params, const Policy& raw_policy, int q_max) {
  const Policy policy = raw_policy.canonical();
  if (q_max < min_truncation_level(policy)) {
    throw Error(ErrorCode::TruncationTooSmall,
                "q_max=" + std::to_string(q_max) + " below " + std::to_string(min_truncation_level(policy)));
  }
  Generator g(policy, q_max);

  const bool has_off_line = !policy.never_off();
  const int first_on = policy.instant_off() ? 1 : 0;

  for (int q = first_on; q <= q_max; ++q) g.add_state(1, q);
  if (has_off_line) {
    for (int q = 0; q <= q_max; ++q) g.add_state(0, q);
  }

  auto service_rate = [&](int q) { return policy.k2.fast_at(q) ? params.fast_rate() : params.mu; };

  for (int q = first_on; q <= q_max; ++q) {
    const int from = *g.index_of(1, q);
    if (q < q_max) g.add_transition(from, *g.index_of(1, q + 1), params.lambda, TransitionKind::Arrival);
    if (q >= 1) {
      const int to = (q == 1 && policy.instant_off()) ? *g.index_of(0, 0) : *g.index_of(1, q - 1);
      g.add_transition(from, to, service_rate(q), TransitionKind::Service);
    }
    if (q == 0 && has_off_line) {
      g.add_transition(from, *g.index_of(0, 0), policy.alpha, TransitionKind::Turnoff);
    }
  }
  if (has_off_line) {
    for (int q = 0; q <= q_max; ++q) {
      const int from = *g.index_of(0, q);
      if (q < q_max) g.add_transition(from, *g.index_of(0, q + 1), params.lambda, TransitionKind::Arrival);
      if (q >= policy.k1) g.add_transition(from, *g.index_of(1, q), params.gamma, TransitionKind::Setup);
    }
  }
  g.refresh_diagonal();
  return g;
}

}  // namespace powerq

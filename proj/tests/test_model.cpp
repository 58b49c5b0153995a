#include "powerq/model.hpp"

#include "support/dense_chain.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace powerq;

namespace {

SystemParams reference(double lambda) {
  SystemParams p;
  p.lambda = lambda;
  p.mu = 1.0;
  p.c = 2.0;
  p.gamma = 1.0;
  p.p_idle = 0.6;
  p.p_setup = 4.0;
  p.p_slow = 1.0;
  p.p_fast = 4.0;
  p.beta = 1.0;
  return p;
}

ErrorCode code_of(const SystemParams& p, const Policy& pol) {
  try {
    (void)validate_params(p, pol);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::BadParameter;
}

}  // namespace

TEST(ValidateParams, AcceptsReferenceAndReportsPreference) {
  const auto v = validate_params(reference(0.5), Policy{1, SpeedThreshold(2), 1.0});
  // 4/2 > 1/1
  EXPECT_TRUE(v.slow_cheaper_per_job);
  EXPECT_EQ(v.policy, (Policy{1, SpeedThreshold(2), 1.0}));
}

TEST(ValidateParams, PreferenceFlagIsNotAnError) {
  auto p = reference(0.5);
  p.p_fast = 1.5;  // 1.5/2 < 1
  EXPECT_FALSE(validate_params(p, Policy{}).slow_cheaper_per_job);
}

TEST(ValidateParams, RejectsUnscaledSpeed) {
  auto p = reference(0.5);
  p.c = 1.0;
  EXPECT_EQ(code_of(p, Policy{}), ErrorCode::NonScaledSpeed);
}

TEST(ValidateParams, StabilityBoundary) {
  EXPECT_EQ(code_of(reference(2.5), Policy{1, SpeedThreshold(2), 1.0}), ErrorCode::Unstable);
  EXPECT_EQ(code_of(reference(2.0), Policy{1, SpeedThreshold(2), 1.0}), ErrorCode::Unstable);
  // Slow only needs lambda < mu.
  EXPECT_EQ(code_of(reference(1.0), Policy{1, SpeedThreshold::infinite(), 0.0}), ErrorCode::Unstable);
  EXPECT_NO_THROW((void)validate_params(reference(1.5), Policy{1, SpeedThreshold(7), 0.0}));
}

TEST(ValidateParams, RejectsNegativeRatesAndBadThresholds) {
  auto p = reference(0.5);
  p.gamma = -1.0;
  EXPECT_EQ(code_of(p, Policy{}), ErrorCode::NegativeRate);
  EXPECT_EQ(code_of(reference(0.5), Policy{1, SpeedThreshold(1), -0.5}), ErrorCode::NegativeRate);
  EXPECT_EQ(code_of(reference(0.5), Policy{0, SpeedThreshold(1), 1.0}), ErrorCode::BadThreshold);
  EXPECT_EQ(code_of(reference(0.5), Policy{1, SpeedThreshold(0), 1.0}), ErrorCode::BadThreshold);
}

TEST(ValidateParams, CanonicalisesNeverOff) {
  const auto v = validate_params(reference(0.5), Policy{7, SpeedThreshold(3), 0.0});
  EXPECT_EQ(v.policy.k1, 1);
}

TEST(PhaseOf, MapsStatesToPhases) {
  const Policy pol{3, SpeedThreshold(4), 1.0};
  EXPECT_EQ(phase_of(1, 0, pol), ServerPhase::Idle);
  EXPECT_EQ(phase_of(0, 3, pol), ServerPhase::Switching);
  EXPECT_EQ(phase_of(0, 2, pol), ServerPhase::Off);
  EXPECT_EQ(phase_of(1, 4, pol), ServerPhase::Fast);
  EXPECT_EQ(phase_of(1, 3, pol), ServerPhase::Slow);
  EXPECT_EQ(phase_of(1, 1000, Policy{1, SpeedThreshold::infinite(), 0.0}), ServerPhase::Slow);
}

TEST(BuildGenerator, NeverOffSlowOnlyIsBirthDeath) {
  const auto g = build_generator(reference(0.5), Policy{1, SpeedThreshold::infinite(), 0.0}, 10);
  ASSERT_EQ(g.dimension(), 11);
  for (int q = 0; q <= 10; ++q) EXPECT_FALSE(g.contains(0, q));
  for (const auto& t : g.entries()) {
    const auto& from = g.state(t.from);
    const auto& to = g.state(t.to);
    if (to.q == from.q + 1) {
      EXPECT_DOUBLE_EQ(t.rate, 0.5);
    } else {
      EXPECT_EQ(to.q, from.q - 1);
      EXPECT_DOUBLE_EQ(t.rate, 1.0);
    }
  }
  EXPECT_EQ(g.entries().size(), 20U);
}

TEST(BuildGenerator, InstantOffDropsIdleAndReroutesLastDeparture) {
  const auto g = build_generator(reference(0.5), Policy{1, SpeedThreshold(1), kInf}, 3);
  EXPECT_FALSE(g.contains(1, 0));
  bool found = false;
  for (const auto& t : g.entries()) {
    if (g.state(t.from) == State{1, 1} && g.state(t.to) == State{0, 0}) {
      found = true;
      EXPECT_DOUBLE_EQ(t.rate, 2.0);
    }
  }
  EXPECT_TRUE(found);
}

TEST(BuildGenerator, RejectsTooSmallTruncation) {
  try {
    (void)build_generator(reference(0.5), Policy{3, SpeedThreshold(5), 1.0}, 6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TruncationTooSmall);
  }
  EXPECT_NO_THROW((void)build_generator(reference(0.5), Policy{3, SpeedThreshold(5), 1.0}, 7));
}

TEST(BuildGenerator, StateCounts) {
  const int q_max = 12;
  const auto p = reference(0.5);
  EXPECT_EQ(build_generator(p, Policy{1, SpeedThreshold(2), 0.0}, q_max).dimension(), q_max + 1);
  const Policy finite{4, SpeedThreshold(2), 0.5};
  EXPECT_EQ(build_generator(p, finite, q_max).dimension(), (q_max + 1) + 4 + (q_max - 4 + 1));
  EXPECT_EQ(build_generator(p, Policy{4, SpeedThreshold(2), kInf}, q_max).dimension(), 2 * (q_max + 1) - 1);
}

// Property: for random valid inputs the generator is conservative, has
// non-negative off-diagonals, moves q by at most one, serves at the rate
// phase_of implies, and matches an independently derived dense generator.
TEST(BuildGenerator, RandomisedStructuralProperties) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  std::uniform_int_distribution<int> k(1, 6);
  const double alphas[] = {0.0, 0.3, 2.0, kInf};
  for (int trial = 0; trial < 200; ++trial) {
    SystemParams p = reference(0.0);
    p.c = 1.2 + 2.0 * unit(rng);
    p.gamma = 0.1 + 3.0 * unit(rng);
    Policy pol{k(rng), trial % 5 == 0 ? SpeedThreshold::infinite() : SpeedThreshold(k(rng)), alphas[trial % 4]};
    p.lambda = unit(rng) * top_service_rate(p, pol);
    const int q_max = min_truncation_level(pol) + trial % 7;
    const auto g = build_generator(p, pol, q_max);

    EXPECT_LE(g.max_row_sum_error(), 1e-13);
    for (const auto& t : g.entries()) {
      EXPECT_GE(t.rate, 0.0);
      const auto& from = g.state(t.from);
      const auto& to = g.state(t.to);
      EXPECT_LE(std::abs(to.q - from.q), 1);
      if (t.kind == TransitionKind::Service) {
        const auto ph = phase_of(from.s, from.q, g.policy());
        EXPECT_DOUBLE_EQ(t.rate, ph == ServerPhase::Fast ? p.fast_rate() : p.mu);
        EXPECT_TRUE(ph == ServerPhase::Fast || ph == ServerPhase::Slow);
      }
      if (from.s == 0 && to.s == 0) {
        EXPECT_EQ(to.q, from.q + 1);  // no service while off
      }
    }
    for (const auto& st : g.states()) {
      if (st.s == 0 && phase_of(0, st.q, g.policy()) == ServerPhase::Switching) {
        EXPECT_GE(st.q, g.policy().k1);
      }
    }

    const auto dense = dense::dense_chain(p, pol, q_max);
    ASSERT_EQ(static_cast<std::size_t>(g.dimension()), dense.states.size());
    std::vector<std::vector<double>> ours(dense.states.size(), std::vector<double>(dense.states.size(), 0.0));
    for (const auto& t : g.entries()) {
      const auto& a = g.state(t.from);
      const auto& b = g.state(t.to);
      ours[static_cast<std::size_t>(dense.index.at({a.s, a.q}))][static_cast<std::size_t>(dense.index.at({b.s, b.q}))] +=
          t.rate;
    }
    for (std::size_t i = 0; i < ours.size(); ++i) {
      for (std::size_t j = 0; j < ours.size(); ++j) {
        if (i != j) {
          EXPECT_NEAR(ours[i][j], static_cast<double>(dense.q[i][j]), 1e-15);
        }
      }
    }
  }
}

TEST(Generator, ScaledPerturbsOneKind) {
  const auto g = build_generator(reference(0.5), Policy{2, SpeedThreshold(3), 1.0}, 10);
  const auto h = g.scaled(TransitionKind::Service, 1.05);
  EXPECT_LE(h.max_row_sum_error(), 1e-13);
  for (std::size_t i = 0; i < g.entries().size(); ++i) {
    const double factor = g.entries()[i].kind == TransitionKind::Service ? 1.05 : 1.0;
    EXPECT_DOUBLE_EQ(h.entries()[i].rate, g.entries()[i].rate * factor);
  }
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(2.0), "2");
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(kInf), "inf");
  EXPECT_EQ(to_string(Policy{2, SpeedThreshold::infinite(), 0.5}), "(k1=2, k2=inf, alpha=0.5)");
}

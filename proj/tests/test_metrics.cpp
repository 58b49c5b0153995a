#include "powerq/metrics.hpp"
#include "powerq/oracle.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace powerq;

namespace {

SystemParams base(double lambda) {
  SystemParams p;
  p.lambda = lambda;
  p.mu = 1.0;
  p.c = 2.0;
  p.gamma = 0.5;
  p.p_idle = 0.6;
  p.p_setup = 4.0;
  p.p_slow = 1.0;
  p.p_fast = 4.0;
  p.beta = 1.0;
  return p;
}

const Policy kSlowAlwaysOn{1, SpeedThreshold::infinite(), 0.0};
const Policy kFastAlwaysOn{1, SpeedThreshold(1), 0.0};
const Policy kSetup{1, SpeedThreshold::infinite(), kInf};

}  // namespace

TEST(PhaseProbabilities, NeverOffHasNoOffOrSwitching) {
  const auto m = evaluate_policy(base(0.7), Policy{1, SpeedThreshold(3), 0.0});
  EXPECT_EQ(at(m.phase_probs, ServerPhase::Off), 0.0);
  EXPECT_EQ(at(m.phase_probs, ServerPhase::Switching), 0.0);
}

TEST(PhaseProbabilities, InstantOffHasNoIdle) {
  const auto m = evaluate_policy(base(0.7), Policy{2, SpeedThreshold(3), kInf});
  EXPECT_EQ(at(m.phase_probs, ServerPhase::Idle), 0.0);
}

TEST(PhaseProbabilities, MM1IdleAndBusy) {
  const auto m = evaluate_policy(base(0.5), kSlowAlwaysOn);
  EXPECT_NEAR(at(m.phase_probs, ServerPhase::Idle), 0.5, 1e-12);
  EXPECT_NEAR(at(m.phase_probs, ServerPhase::Slow), 0.5, 1e-12);
  EXPECT_NEAR(std::accumulate(m.phase_probs.begin(), m.phase_probs.end(), 0.0), 1.0, 1e-12);
}

TEST(PhaseProbabilities, ServiceIdentity) {
  // departures = mu P(Slow) + c mu P(Fast) = lambda
  const auto p = base(1.3);
  const auto m = evaluate_policy(p, Policy{3, SpeedThreshold(4), 0.5});
  const double served = p.mu * at(m.phase_probs, ServerPhase::Slow) + p.fast_rate() * at(m.phase_probs, ServerPhase::Fast);
  EXPECT_NEAR(served / p.lambda, 1.0, 1e-9);
}

TEST(MeanJobs, MM1Reductions) {
  EXPECT_NEAR(evaluate_policy(base(0.5), kSlowAlwaysOn).mean_jobs, 1.0, 1e-10);
  EXPECT_NEAR(evaluate_policy(base(1.0), kFastAlwaysOn).mean_jobs, 1.0, 1e-10);
}

TEST(MeanJobs, EmptySystemIsZero) {
  StationaryDistribution d;
  d.q_max = 3;
  d.on = {1.0, 0.0, 0.0, 0.0};
  EXPECT_EQ(mean_jobs(d), 0.0);
}

TEST(MeanResponse, LittlesLaw) {
  StationaryDistribution d;
  d.q_max = 2;
  d.on = {0.0, 1.0, 0.0};
  EXPECT_DOUBLE_EQ(mean_response(d, base(0.5)), 2.0);
  EXPECT_NEAR(evaluate_policy(base(0.5), kSlowAlwaysOn).mean_response, 2.0, 1e-9);
  EXPECT_NEAR(evaluate_policy(base(0.25), kSetup).mean_response, 1.0 / 0.75 + 2.0, 1e-9);
}

TEST(MeanPower, AllOffIsZero) {
  PhaseProbabilities probs{};
  at(probs, ServerPhase::Off) = 1.0;
  EXPECT_EQ(mean_power(probs, base(0.5)), 0.0);
}

TEST(MeanPower, BusyProbabilityWeighting) {
  EXPECT_NEAR(evaluate_policy(base(0.5), kSlowAlwaysOn).mean_power, 0.8, 1e-10);
  EXPECT_NEAR(evaluate_policy(base(1.0), kFastAlwaysOn).mean_power, 2.3, 1e-10);
}

TEST(MeanPower, MonotoneInEveryPowerLevel) {
  const auto p = base(0.9);
  const Policy pol{2, SpeedThreshold(3), 1.0};
  const auto d = solve_stationary(p, pol);
  const double ref = mean_power(d, p, pol);
  for (double SystemParams::*field :
       {&SystemParams::p_idle, &SystemParams::p_setup, &SystemParams::p_slow, &SystemParams::p_fast}) {
    SystemParams q = p;
    q.*field += 0.5;
    EXPECT_GE(mean_power(d, q, pol), ref);
  }
}

TEST(Cost, Arithmetic) {
  auto p = base(0.5);
  EXPECT_DOUBLE_EQ(cost(2.0, 0.8, p), 2.8);
  p.beta = 0.0;
  EXPECT_DOUBLE_EQ(cost(2.0, 0.8, p), 2.0);
  p.beta = 0.5;
  EXPECT_DOUBLE_EQ(cost(2.0, 2.3, p), 3.15);
}

TEST(Cost, AffineInBeta) {
  const Policy pol{2, SpeedThreshold(4), 0.5};
  double betas[] = {0.0, 0.7, 3.1};
  double costs[3];
  double power = 0.0;
  for (int i = 0; i < 3; ++i) {
    auto p = base(0.8);
    p.beta = betas[i];
    const auto m = evaluate_policy(p, pol);
    costs[i] = m.cost;
    power = m.mean_power;
  }
  const double slope01 = (costs[1] - costs[0]) / (betas[1] - betas[0]);
  const double slope12 = (costs[2] - costs[1]) / (betas[2] - betas[1]);
  EXPECT_NEAR(slope01, slope12, 1e-12);
  EXPECT_NEAR(slope01, power, 1e-12);
}

TEST(ClosedFormOracle, Reductions) {
  EXPECT_DOUBLE_EQ(closed_form_oracle(base(0.5), kSlowAlwaysOn)->mean_response, 2.0);
  EXPECT_DOUBLE_EQ(closed_form_oracle(base(1.0), kFastAlwaysOn)->mean_response, 1.0);
  EXPECT_NEAR(closed_form_oracle(base(0.25), kSetup)->mean_response, 3.333333333333333, 1e-12);
  EXPECT_FALSE(closed_form_oracle(base(0.25), Policy{2, SpeedThreshold(3), 1.0}).has_value());
  EXPECT_FALSE(closed_form_oracle(base(0.25), Policy{2, SpeedThreshold::infinite(), kInf}).has_value());
}

TEST(EvaluatePolicy, AgreesWithClosedForms) {
  const std::pair<double, Policy> cases[] = {{0.5, kSlowAlwaysOn}, {1.0, kFastAlwaysOn}, {0.25, kSetup},
                                             {0.9, kSlowAlwaysOn}, {1.8, kFastAlwaysOn}, {0.8, kSetup}};
  for (const auto& [lambda, pol] : cases) {
    const auto exact = closed_form_oracle(base(lambda), pol);
    ASSERT_TRUE(exact);
    const auto m = evaluate_policy(base(lambda), pol);
    EXPECT_NEAR(m.mean_response / exact->mean_response, 1.0, 1e-8) << to_string(pol) << " lambda=" << lambda;
    EXPECT_NEAR(m.mean_power / exact->mean_power, 1.0, 1e-8) << to_string(pol) << " lambda=" << lambda;
    EXPECT_NEAR(m.mean_jobs / exact->mean_jobs, 1.0, 1e-8);
  }
}

TEST(EvaluatePolicy, CarriesDiagnosticsAndIsDeterministic) {
  const Policy pol{3, SpeedThreshold(4), 0.5};
  const auto a = evaluate_policy(base(0.6), pol);
  const auto b = evaluate_policy(base(0.6), pol);
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_GT(a.diagnostics.q_max, 0);
  EXPECT_LE(a.diagnostics.residual, 1e-10);
  EXPECT_LE(a.diagnostics.tail_mass, 1e-12);
  EXPECT_DOUBLE_EQ(a.cost, a.mean_response + 1.0 * a.mean_power);
}

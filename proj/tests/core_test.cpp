#include <random>

#include <gtest/gtest.h>

#include "rsdd/core.hpp"
#include "rsdd/problem.hpp"

namespace rsdd {
namespace {

// f(x) = x^2 on [-1, 1] with g(x) = x + offset
AgentProblem scalar_agent(double offset) {
  auto a = make_agent(1, 1, Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
  a.cost_quadratic(0, 0) = 2.0;
  a.coupling_matrix(0, 0) = 1.0;
  a.coupling_offset(0) = offset;
  return a;
}

Vector scalar(double v) { return Vector::Constant(1, v); }

// Scalar cost without allocating; the agents here have no hinges.
double scalar_cost(const AgentProblem& a, double x) {
  return 0.5 * a.cost_quadratic(0, 0) * x * x + a.cost_linear(0) * x + a.cost_constant;
}

// Grid oracle for the relaxed local step of a scalar agent: rho is eliminated
// in closed form, rho = max{0, g(x) + term}.
struct GridStep {
  double x, rho, value;
};
GridStep grid_local_step(const AgentProblem& a, double term, double M, int points = 200001) {
  GridStep best{0, 0, std::numeric_limits<double>::infinity()};
  const double lo = a.local_set.lower(0), hi = a.local_set.upper(0);
  for (int k = 0; k < points; ++k) {
    const double x = lo + (hi - lo) * k / (points - 1);
    const double rho = std::max(0.0, a.coupling_offset(0) + a.coupling_matrix(0, 0) * x + term);
    const double v = scalar_cost(a, x) + M * rho;
    if (v < best.value) best = {x, rho, v};
  }
  return best;
}

// Grid oracle for q_i on a scalar agent.
double grid_q(const AgentProblem& a, double mu, int points = 20001) {
  double best = std::numeric_limits<double>::infinity();
  const double lo = a.local_set.lower(0), hi = a.local_set.upper(0);
  for (int k = 0; k < points; ++k) {
    const double x = lo + (hi - lo) * k / (points - 1);
    best = std::min(best, scalar_cost(a, x) + mu * (a.coupling_matrix(0, 0) * x + a.coupling_offset(0)));
  }
  return best;
}

TEST(LocalStep, SlackCouplingGivesUnconstrainedOptimum) {
  // Degenerate vertex: x <= rho and rho >= 0 are both active with zero
  // multipliers, so the interior point converges only like sqrt(tol).
  const auto r = local_step(scalar_agent(0.0), scalar(0.0), 10.0);
  EXPECT_NEAR(r.x(0), 0.0, 1e-4);
  EXPECT_NEAR(r.rho, 0.0, 1e-8);
  EXPECT_NEAR(r.mu(0), 0.0, 1e-4);
  EXPECT_NEAR(r.objective, 0.0, 1e-8);
}

TEST(LocalStep, InfeasibleCouplingIsRelaxed) {
  const auto a = scalar_agent(2.0);
  const auto oracle = grid_local_step(a, 0.0, 10.0);
  EXPECT_NEAR(oracle.x, -1.0, 1e-9);
  EXPECT_NEAR(oracle.rho, 1.0, 1e-9);
  EXPECT_NEAR(oracle.value, 11.0, 1e-9);

  const auto r = local_step(a, scalar(0.0), 10.0);
  EXPECT_NEAR(r.x(0), oracle.x, 1e-7);
  EXPECT_NEAR(r.rho, oracle.rho, 1e-7);
  EXPECT_NEAR(r.objective, oracle.value, 1e-7);
  // rho > 0 forces the restriction to bind: 1'mu = M
  EXPECT_NEAR(r.mu(0), 10.0, 1e-6);
}

TEST(LocalStep, NegativeLambdaTermRestoresSlack) {
  const auto a = scalar_agent(2.0);
  const auto oracle = grid_local_step(a, -3.0, 10.0);
  EXPECT_NEAR(oracle.x, 0.0, 1e-9);
  EXPECT_NEAR(oracle.rho, 0.0, 1e-12);
  const auto r = local_step(a, scalar(-3.0), 10.0);
  EXPECT_NEAR(r.x(0), 0.0, 1e-7);
  EXPECT_NEAR(r.rho, 0.0, 1e-8);
  EXPECT_NEAR(r.mu(0), 0.0, 1e-7);
}

TEST(LocalStep, LambdaMapsFormTheTerm) {
  const auto a = scalar_agent(2.0);
  std::map<std::size_t, Vector> out{{1, scalar(-1.0)}, {2, scalar(0.5)}};
  std::map<std::size_t, Vector> in{{1, scalar(2.0)}, {2, scalar(0.5)}};
  const auto via_maps = local_step(a, out, in, 10.0);
  const auto direct = local_step(a, scalar(-3.0), 10.0);
  EXPECT_EQ(via_maps.x, direct.x);
  EXPECT_THROW(local_step(a, out, {{1, scalar(0.0)}}, 10.0), DimensionError);
}

TEST(LocalStep, MatchesGridOracleOnRandomScalarAgents) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    auto a = scalar_agent(2.0 * u(rng));
    a.cost_quadratic(0, 0) = 2.0 * (1.0 + u(rng));
    a.cost_linear(0) = u(rng);
    a.coupling_matrix(0, 0) = 2.0 * u(rng);
    const double term = 2.0 * u(rng);
    const double M = 0.5 + 5.0 * (1.0 + u(rng));
    const auto oracle = grid_local_step(a, term, M);
    const auto r = local_step(a, scalar(term), M);
    // value is stable; the grid step is 1e-5, the cost is Lipschitz with constant <= 2+2+1+M*2
    EXPECT_NEAR(r.objective, oracle.value, 1e-5 * (5.0 + 2.0 * M)) << "trial " << trial;
  }
}

class RandomAgents : public ::testing::TestWithParam<int> {};

TEST_P(RandomAgents, LocalStepPropertiesHold) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  const auto p = build_random_instance(3, 3, 3, seed);
  std::mt19937_64 rng(seed + 17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& a : p.agents) {
    for (int trial = 0; trial < 4; ++trial) {
      Vector term(3);
      for (Index s = 0; s < 3; ++s) term(s) = 10.0 * u(rng);
      const double M = 1.0 + 10.0 * std::abs(u(rng));
      LocalStepResult r;
      ASSERT_NO_THROW(r = local_step(a, term, M));  // always feasible
      EXPECT_GE(r.rho, -1e-10);
      EXPECT_GE(r.mu.minCoeff(), -1e-10);
      EXPECT_LE(r.mu.sum(), M + 1e-8);
      if (r.rho > 1e-6) EXPECT_NEAR(r.mu.sum(), M, 1e-6);
      // inner strong duality: value equals the closed-form inner maximum at x
      EXPECT_NEAR(r.objective, inner_max_value(a, r.x, term, M), 1e-7);
      EXPECT_NEAR(eta_i_value(r, a, M), r.objective, 1e-7);
      // the larger-M solution is feasible for the M problem (same feasible set)
      const auto bigger = local_step(a, term, 2.0 * M);
      EXPECT_LE((a.coupling(bigger.x) + term).maxCoeff(), bigger.rho + 1e-8);
      EXPECT_LE(bigger.rho, r.rho + 1e-7);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomAgents, ::testing::Range(1, 11));

TEST(LambdaUpdate, Arithmetic) {
  EXPECT_NEAR(lambda_update(scalar(0.5), scalar(0.2), scalar(0.1), 0.1)(0), 0.49, 1e-15);
  const Vector l = Vector::LinSpaced(3, -1.0, 1.0);
  const Vector mu = Vector::Constant(3, 0.7);
  EXPECT_EQ(lambda_update(l, mu, mu, 0.3), l);
  EXPECT_EQ(lambda_update(l, mu, 2.0 * mu, 0.0), l);
  EXPECT_THROW(lambda_update(l, scalar(1.0), mu, 0.1), DimensionError);
}

TEST(StepSize, HarmonicPower) {
  EXPECT_DOUBLE_EQ(step_size(StepSizeSchedule::harmonic(1.0, 1.0), 3), 0.25);
  EXPECT_TRUE(validate_schedule(StepSizeSchedule::harmonic(1.0, 0.8)).ok);
  EXPECT_TRUE(validate_schedule(StepSizeSchedule::harmonic(1.0, 1.0)).ok);
  EXPECT_FALSE(validate_schedule(StepSizeSchedule::harmonic(1.0, 0.5)).ok);
  EXPECT_FALSE(validate_schedule(StepSizeSchedule::harmonic(1.0, 1.2)).ok);
  EXPECT_FALSE(validate_schedule(StepSizeSchedule::harmonic(0.0, 0.8)).ok);
}

TEST(StepSize, ExplicitSequenceAcceptedWithWarning) {
  const auto s = StepSizeSchedule::sequence({0.5, 0.25});
  const auto check = validate_schedule(s);
  EXPECT_TRUE(check.ok);
  EXPECT_FALSE(check.message.empty());
  EXPECT_EQ(step_size(s, 1), 0.25);
  EXPECT_THROW(step_size(s, 2), std::out_of_range);
  EXPECT_FALSE(validate_schedule(StepSizeSchedule::sequence({0.1, -0.1})).ok);
}

TEST(LocalDual, Values) {
  const auto a = scalar_agent(0.0);
  const auto q0 = q_i_eval(a, scalar(0.0));
  EXPECT_NEAR(q0.value, 0.0, 1e-8);
  EXPECT_NEAR(q0.minimizer(0), 0.0, 1e-7);
  const auto q1 = q_i_eval(a, scalar(1.0));
  EXPECT_NEAR(grid_q(a, 1.0), -0.25, 1e-8);
  EXPECT_NEAR(q1.value, -0.25, 1e-8);
  EXPECT_NEAR(q1.minimizer(0), -0.5, 1e-7);
  const auto qh = q_i_eval(a, scalar(0.5));
  EXPECT_NEAR(qh.value, -0.0625, 1e-8);
  EXPECT_GE(qh.value, 0.5 * (q0.value + q1.value));
  EXPECT_THROW(q_i_eval(a, scalar(-1.0)), std::invalid_argument);
}

TEST(LocalDual, ConcaveAlongRandomSegments) {
  const auto p = build_random_instance(2, 2, 2, 5);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (const auto& a : p.agents) {
    for (int k = 0; k < 10; ++k) {
      const Vector m1 = Vector::NullaryExpr(2, [&] { return u(rng); });
      const Vector m2 = Vector::NullaryExpr(2, [&] { return u(rng); });
      const double mid = q_i_eval(a, 0.5 * (m1 + m2)).value;
      EXPECT_GE(mid, 0.5 * (q_i_eval(a, m1).value + q_i_eval(a, m2).value) - 1e-8);
    }
  }
}

TEST(EtaValue, MatchesLocalStepExamples) {
  const auto a0 = scalar_agent(0.0);
  EXPECT_NEAR(eta_i_value(local_step(a0, scalar(0.0), 10.0), a0, 10.0), 0.0, 1e-8);
  const auto a2 = scalar_agent(2.0);
  EXPECT_NEAR(eta_i_value(local_step(a2, scalar(0.0), 10.0), a2, 10.0), 11.0, 1e-7);
}

TEST(EtaValue, AgreesWithGridMaximizationOverMu) {
  // eta_i(term) = max over mu in [0, M] of q_i(mu) + mu * term
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    const auto a = scalar_agent(2.0 * u(rng));
    const double term = 2.0 * u(rng);
    const double M = 10.0;
    const int points = 10000;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= points; ++k) {
      const double mu = M * k / points;
      best = std::max(best, grid_q(a, mu, 2001) + mu * term);
    }
    // Lipschitz bound of mu -> q(mu) + mu term is max |g + term| <= 3 + |term|
    const double resolution = (M / points) * (3.0 + std::abs(term)) + 1e-6;
    const auto r = local_step(a, scalar(term), M);
    EXPECT_NEAR(eta_i_value(r, a, M), best, resolution) << "trial " << trial;
  }
}

}  // namespace
}  // namespace rsdd

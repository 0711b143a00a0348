#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "rsdd/metrics.hpp"

namespace rsdd {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("rsdd_metrics_" + name)).string();
}

AlgorithmConfig config(int iters, double M = 10.0) {
  AlgorithmConfig c;
  c.M = M;
  c.max_iters = iters;
  c.early_stop = false;
  return c;
}

RunTrace demo_trace(int iters) {
  return run(two_agent_demo(), build_graph({TopologyKind::path}, 2), config(iters));
}

OracleArtifact oracle_for(const ConstraintCoupledProblem& p) { return make_oracle_artifact(p, solve_centralized(p)); }

// min over a grid of x of f(x) + M max{0, g(x) + term}: the closed form of the
// inner max over {mu >= 0, mu <= M}, for a scalar agent with one coupling row.
double grid_eta(const AgentProblem& a, double term, double M, int points = 400001) {
  double best = std::numeric_limits<double>::infinity();
  const double lo = a.local_set.lower(0), hi = a.local_set.upper(0);
  for (int k = 0; k < points; ++k) {
    const double x = lo + (hi - lo) * k / (points - 1);
    const double f = 0.5 * a.cost_quadratic(0, 0) * x * x + a.cost_linear(0) * x + a.cost_constant;
    const double g = a.coupling_matrix(0, 0) * x + a.coupling_offset(0);
    best = std::min(best, f + M * std::max(0.0, g + term));
  }
  return best;
}

TEST(Metrics, OneRowPerIterationWithSchema) {
  const auto trace = demo_trace(3);
  const auto table = compute_metrics(trace, oracle_for(trace.problem));
  ASSERT_EQ(table.rows.size(), 3u);
  const auto csv = metrics_to_csv(table);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,max_violation,sum_rho,cost,cost_error_norm,lambda_consistency,mu_spread,tracking_error_1,"
                  "tracking_error_2");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 8);
  }
  EXPECT_EQ(rows, 3);
}

TEST(Metrics, EmptyTableIsHeaderOnly) {
  MetricsTable t;
  t.n_agents = 2;
  const auto csv = metrics_to_csv(t);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1);
  EXPECT_TRUE(metrics_from_csv(csv).rows.empty());
}

TEST(Metrics, ConvergedDemoHasVanishingErrors) {
  const auto trace = demo_trace(5000);
  const auto table = compute_metrics(trace, oracle_for(trace.problem));
  const auto& last = table.rows.back();
  EXPECT_FALSE(table.absolute_error);
  EXPECT_LE(last.cost_error_norm, 1e-3);
  EXPECT_LE(last.max_violation, 1e-4);
  EXPECT_LE(last.sum_rho, 1e-6);
  EXPECT_LE(last.mu_spread, 1e-2);
}

TEST(Metrics, InitialTrackingErrorIsOthersCoupling) {
  const auto p = build_random_instance(3, 2, 2, 5);
  const auto trace = run(p, build_graph({TopologyKind::path}, 3), config(2));
  const auto table = compute_metrics(trace, oracle_for(p));
  const auto& x = trace.snapshots[1];
  for (std::size_t i = 0; i < 3; ++i) {
    Vector others = Vector::Zero(2);
    for (std::size_t j = 0; j < 3; ++j)
      if (j != i) others += p.agents[j].coupling(x[j].x);
    EXPECT_EQ(table.rows[0].tracking_error[i], others.cwiseAbs().maxCoeff());
  }
}

TEST(Metrics, FrozenRunRowsAreIdentical) {
  auto c = config(8);
  c.schedule = StepSizeSchedule::sequence(std::vector<double>(8, 0.0));
  const auto p = build_random_instance(3, 1, 1, 4);
  const auto trace = run(p, build_graph({TopologyKind::cycle}, 3), c);
  const auto table = compute_metrics(trace, oracle_for(p));
  for (std::size_t t = 2; t < table.rows.size(); ++t) {
    auto row = table.rows[t];
    row.t = table.rows[1].t;
    EXPECT_TRUE(row == table.rows[1]) << "row " << t;
  }
}

TEST(Metrics, RejectsOracleForAnotherProblem) {
  const auto trace = demo_trace(2);
  EXPECT_THROW(compute_metrics(trace, oracle_for(two_agent_demo(2.0))), MetricsError);
}

TEST(Metrics, ZeroOptimalCostSwitchesToAbsoluteError) {
  const auto p = two_agent_demo(10.0);
  auto o = oracle_for(p);
  o.f_star = 0.0;  // exact value; the solver may return a rounding residue
  const auto trace = run(p, build_graph({TopologyKind::path}, 2), config(50));
  const auto table = compute_metrics(trace, o);
  EXPECT_TRUE(table.absolute_error);
  EXPECT_EQ(table.rows.back().cost_error_norm, std::abs(table.rows.back().cost));
}

TEST(Metrics, CostEqualsGridMaximizedEdgeDual) {
  // scalar agents with one coupling row, so the dual term of each agent is a 1-D grid search
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto p = build_random_instance(3, 1, 1, seed);
    const auto trace = run(p, build_graph({TopologyKind::path}, 3), config(40, 5.0));
    const auto table = compute_metrics(trace, oracle_for(p));
    for (int t : {0, 7, 39}) {
      const auto& lam = trace.snapshots[t];
      double eta = 0.0, resolution = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        double term = 0.0;
        for (const auto& [j, l] : lam[i].lambda_out) term += l(0) - lam[j].lambda_out.at(i)(0);
        const auto& a = p.agents[i];
        eta += grid_eta(a, term, trace.M);
        const double width = a.local_set.upper(0) - a.local_set.lower(0);
        const double slope = std::abs(a.cost_quadratic(0, 0)) * 2.0 + std::abs(a.cost_linear(0)) +
                             trace.M * std::abs(a.coupling_matrix(0, 0));
        resolution += slope * width / 400000;
      }
      EXPECT_NEAR(table.rows[t].cost, eta, resolution + 1e-6) << "seed " << seed << " t " << t;
    }
  }
}

TEST(Metrics, FeasibleIteratesNeverBeatTheOptimum) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto p = build_random_instance(3, 2, 1, seed);
    const auto o = oracle_for(p);
    const auto trace = run(p, build_graph({TopologyKind::cycle}, 3), config(400, suggested_M(o.mu_star)));
    for (const auto& row : compute_metrics(trace, o).rows) {
      if (row.max_violation <= 0.0 && row.sum_rho <= 1e-9) EXPECT_GE(row.cost, o.f_star - 1e-6);
      EXPECT_GE(row.sum_rho, 0.0);
      EXPECT_LE(row.lambda_consistency, 1e-9);
    }
  }
}

TEST(Artifact, JsonRoundTripIsBitExact) {
  const auto trace = demo_trace(25);
  const auto table = compute_metrics(trace, oracle_for(trace.problem));
  EXPECT_TRUE(metrics_from_json(json::parse(metrics_to_json(table).dump())) == table);
  const auto path = temp_path("m.json");
  emit_run_artifact(table, path, ArtifactFormat::json);
  EXPECT_TRUE(load_run_artifact(path) == table);
  std::remove(path.c_str());
}

TEST(Artifact, CsvRoundTripKeepsTwelveDigits) {
  const auto p = build_random_instance(3, 2, 2, 9);
  const auto trace = run(p, build_graph({TopologyKind::cycle}, 3), config(20));
  const auto table = compute_metrics(trace, oracle_for(p));
  const auto path = temp_path("m.csv");
  emit_run_artifact(table, path, ArtifactFormat::csv);
  const auto back = load_run_artifact(path);
  std::remove(path.c_str());
  ASSERT_EQ(back.rows.size(), table.rows.size());
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-11 * std::max(1.0, std::abs(a)); };
  for (std::size_t t = 0; t < table.rows.size(); ++t) {
    const auto& a = table.rows[t];
    const auto& b = back.rows[t];
    EXPECT_EQ(a.t, b.t);
    EXPECT_TRUE(close(a.cost, b.cost) && close(a.sum_rho, b.sum_rho) && close(a.max_violation, b.max_violation));
    EXPECT_TRUE(close(a.mu_spread, b.mu_spread) && close(a.cost_error_norm, b.cost_error_norm));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(close(a.tracking_error[i], b.tracking_error[i]));
    EXPECT_EQ(csv_number(a.cost), csv_number(b.cost));
  }
}

TEST(Artifact, CsvParserNamesBadLines) {
  const std::string text = "t,max_violation,sum_rho,cost,cost_error_norm,lambda_consistency,mu_spread,tracking_error_1\n"
                           "0,1,2,3,4,5,6,7\n"
                           "1,1,2,x,4,5,6,7\n";
  try {
    metrics_from_csv(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(metrics_from_csv("t,cost\n"), ParseError);
}

TEST(Artifact, TraceRoundTripIsIdentity) {
  const auto p = build_random_instance(3, 2, 2, 6);
  const auto trace = run(p, build_graph({TopologyKind::erdos_renyi, 0.7, 1}, 3), config(30));
  const auto path = temp_path("trace.json");
  save_trace(trace, path);
  const auto back = load_trace(path);
  std::remove(path.c_str());
  EXPECT_TRUE(back == trace);
  EXPECT_EQ(problem_hash(back.problem), problem_hash(p));
}

TEST(Artifact, OracleRoundTripAndJoin) {
  const auto p = two_agent_demo();
  const auto o = oracle_for(p);
  const auto back = oracle_from_json(json::parse(oracle_to_json(o).dump()));
  EXPECT_TRUE(back == o);
  EXPECT_NEAR(back.suggested_M, 20.0, 1e-6);
  EXPECT_NO_THROW(compute_metrics(demo_trace(2), back));
}

TEST(Invariants, DetectCorruptedLambda) {
  auto trace = demo_trace(20);
  ASSERT_TRUE(check_trace(trace).ok());
  trace.snapshots[5][0].lambda_out.at(1)(0) += 1e-3;
  const auto rep = check_trace(trace);
  ASSERT_FALSE(rep.ok());
  EXPECT_EQ(rep.violations.front().invariant, "lambda update");
  EXPECT_EQ(rep.violations.front().iteration, 5);
  // a one-sided entry breaks the aggregate itself
  trace = demo_trace(20);
  trace.snapshots[7][1].lambda_out.at(0)(0) = std::nan("");
  EXPECT_TRUE(check_trace(trace).has("lambda consistency"));
}

TEST(Invariants, DetectBudgetAndSignViolations) {
  auto trace = demo_trace(10);
  trace.snapshots[3][1].mu(0) = trace.M + 1e-6;
  trace.snapshots[4][0].rho = -1e-3;
  trace.snapshots[6][0].x(0) = 4.0;  // sum g = 4 + x2 - 1 far above sum rho
  const auto rep = check_trace(trace);
  EXPECT_TRUE(rep.has("mu budget"));
  EXPECT_TRUE(rep.has("rho nonnegative"));
  EXPECT_TRUE(rep.has("aggregate feasibility"));
  trace.traffic.pop_back();
  EXPECT_TRUE(check_trace(trace).has("snapshot count"));
}

TEST(Invariants, SpreadBoundUsesDomainDiameter) {
  auto trace = demo_trace(5);
  trace.snapshots[2][0].mu(0) = 0.0;
  trace.snapshots[2][1].mu(0) = 2.0 * trace.M + 1.0;  // also breaks the budget
  const auto rep = check_trace(trace);
  EXPECT_TRUE(rep.has("mu spread bound"));
}

}  // namespace
}  // namespace rsdd

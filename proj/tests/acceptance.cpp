// End-to-end acceptance: one PASS/FAIL line per criterion, exit 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rsdd/rsdd.hpp"
#include "test_support.hpp"

#ifndef RSDD_CONFIG_DIR
#define RSDD_CONFIG_DIR "configs"
#endif

namespace {

using namespace rsdd;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// every trace produced here also goes through the invariant suite
std::vector<std::string> invariant_log;
int traces_checked = 0;

RunTrace checked_run(const ConstraintCoupledProblem& p, const Graph& g, const AlgorithmConfig& c,
                     const std::string& label) {
  auto trace = run(p, g, c);
  ++traces_checked;
  const auto rep = check_trace(trace);
  for (const auto& v : rep.violations)
    invariant_log.push_back(label + ": " + v.invariant + " at " + std::to_string(v.iteration) + " (" + v.detail + ")");
  return trace;
}

AlgorithmConfig make_config(double M, double gamma0, double exponent, int iters, bool early_stop) {
  AlgorithmConfig c;
  c.M = M;
  c.schedule = StepSizeSchedule::harmonic(gamma0, exponent);
  c.max_iters = iters;
  c.early_stop = early_stop;
  return c;
}

double original_cost(const ConstraintCoupledProblem& p, const std::vector<AgentState>& s) {
  double f = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) f += p.agents[i].cost(s[i].x);
  return f;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  // hand KKT: 2 x1 + mu = 0, 2 (x2 - 2) + mu = 0, x1 + x2 = 1  ->  mu = 1
  const double mu = 1.0, x1 = -mu / 2, x2 = 2 - mu / 2;
  const double f_star = x1 * x1 + (x2 - 2) * (x2 - 2);
  const auto p = two_agent_demo();
  const auto grid = brute_force_oracle(p, 2001);
  o.require(grid.found && std::abs(grid.best_cost - f_star) <= 1e-2, "grid oracle disagrees with hand KKT");

  const auto start = std::chrono::steady_clock::now();
  const auto trace = checked_run(p, build_graph({TopologyKind::path}, 2), make_config(10.0, 1.0, 0.8, 5000, false),
                                 "two-agent");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& last = trace.last();
  const double cost = relaxed_cost(p, last, 10.0);
  const double rel = std::abs(cost - f_star) / f_star;
  const double xerr = std::max(std::abs(last[0].x(0) - x1), std::abs(last[1].x(0) - x2));
  o.require(rel <= 1e-2, "relative cost error " + num(rel));
  o.require(xerr <= 2e-2, "x error " + num(xerr));
  o.require(secs < 10.0, "runtime " + num(secs) + " s");
  o.detail = "cost error " + num(rel) + ", x error " + num(xerr) + ", " + num(secs) + " s" +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome criterion2() {
  Outcome o;
  double worst_viol = -INFINITY, worst_gap = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto p = build_random_instance(3, 2, 2, seed);
    const auto c = solve_centralized(p);
    const auto trace = checked_run(p, build_graph({TopologyKind::cycle}, 3),
                                   make_config(suggested_M(c.mu_star), 1.0, 0.8, 20000, true),
                                   "random seed " + std::to_string(seed));
    const double viol = coupling_violation(p, trace.last());
    const double cost = relaxed_cost(p, trace.last(), trace.M);
    const double gap = std::abs(cost - c.f_star) / std::max(std::abs(c.f_star), 1e-12);
    worst_viol = std::max(worst_viol, viol);
    worst_gap = std::max(worst_gap, gap);
    o.require(viol <= 1e-3, "seed " + std::to_string(seed) + " violation " + num(viol));
    o.require(gap <= 0.02, "seed " + std::to_string(seed) + " cost gap " + num(gap));
    o.require(std::abs(original_cost(p, trace.last()) - c.f_star) <= 0.02 * std::abs(c.f_star) + 1e-9,
              "seed " + std::to_string(seed) + " objective off");
  }
  o.detail = "worst violation " + num(worst_viol) + ", worst cost gap " + num(worst_gap) +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome criterion3() {
  Outcome o;
  const auto p = build_microgrid_instance(default_microgrid_config());
  const auto c = solve_centralized(p);
  const auto trace = checked_run(p, build_graph({TopologyKind::cycle}, p.size()),
                                 make_config(suggested_M(c.mu_star), 0.02, 1.0, 5000, false), "microgrid");
  auto sum_rho = [&](int k) {
    double s = 0.0;
    for (const auto& a : trace.snapshots.at(k)) s += a.rho;
    return s;
  };
  const double early = sum_rho(100), late = sum_rho(5000);
  const double viol = coupling_violation(p, trace.snapshots.at(5000));
  o.require(late <= early / 10.0, "sum rho " + num(early) + " -> " + num(late));
  o.require(viol <= 1e-2, "violation " + num(viol));
  o.require(trace.status != RunStatus::solver_error, trace.status_message);
  o.detail = "sum rho " + num(early) + " at 100, " + num(late) + " at 5000; violation " + num(viol) +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome criterion4() {
  Outcome o;
  // a few more shapes and graphs beyond the runs above
  for (std::uint64_t seed = 11; seed <= 16; ++seed) {
    const auto p = build_random_instance(4, 1 + seed % 2, 1 + seed % 2, seed);
    Topology topo{TopologyKind::erdos_renyi};
    topo.p = 0.5;
    topo.seed = seed;
    auto cfg = make_config(suggested_M(solve_centralized(p).mu_star), 1.0, 0.8, 500, false);
    checked_run(p, build_graph(topo, 4), cfg, "er seed " + std::to_string(seed));
    cfg.M = 0.3;  // saturated multipliers stress the budget and spread bounds
    checked_run(p, build_graph({TopologyKind::star}, 4), cfg, "small M seed " + std::to_string(seed));
  }
  o.require(invariant_log.empty(), invariant_log.empty() ? "" : invariant_log.front());
  o.detail = std::to_string(traces_checked) + " traces, " + std::to_string(invariant_log.size()) + " violations" +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

// min over a grid of x of f(x) + M max{0, g(x) + term}, scalar agent, one coupling row
double grid_eta(const AgentProblem& a, double term, double M, int points) {
  double best = INFINITY;
  const double lo = a.local_set.lower(0), hi = a.local_set.upper(0);
  for (int k = 0; k < points; ++k) {
    const double x = lo + (hi - lo) * k / (points - 1);
    const double f = 0.5 * a.cost_quadratic(0, 0) * x * x + a.cost_linear(0) * x + a.cost_constant;
    const double g = a.coupling_matrix(0, 0) * x + a.coupling_offset(0);
    best = std::min(best, f + M * std::max(0.0, g + term));
  }
  return best;
}

Outcome criterion5() {
  Outcome o;
  double worst_dual = 0.0, worst_rho = 0.0, worst_eta = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto p = build_random_instance(1 + seed % 3, 1 + seed % 2, 1 + seed % 2, 100 + seed);
    const auto c = solve_centralized(p);
    const double gap = std::abs(dual_value(p, c.mu_star) - c.f_star);
    worst_dual = std::max(worst_dual, gap);
    o.require(gap <= 1e-6, "strong duality seed " + std::to_string(seed) + " gap " + num(gap));

    const auto r = solve_relaxed_centralized(p, c.mu_star.lpNorm<1>() + 0.25);
    worst_rho = std::max(worst_rho, r.rho);
    o.require(r.rho <= 1e-6, "rho* seed " + std::to_string(seed) + " = " + num(r.rho));
  }
  // scalar agents: cost of a round equals the sum of grid-minimized eta_i at that round's lambdas
  const int points = 200001;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto p = build_random_instance(3, 1, 1, 200 + seed);
    const double M = 0.5 + seed % 5;  // both saturated and unsaturated regimes
    const auto trace = run(p, build_graph({TopologyKind::path}, 3), make_config(M, 1.0, 0.8, 25, false));
    for (int t : {0, 12, 24}) {
      const auto& lam = trace.snapshots[t];
      double eta = 0.0, resolution = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        double term = 0.0;
        for (const auto& [j, l] : lam[i].lambda_out) term += l(0) - lam[j].lambda_out.at(i)(0);
        const auto& a = p.agents[i];
        eta += grid_eta(a, term, M, points);
        const double width = a.local_set.upper(0) - a.local_set.lower(0);
        const double slope = 2.0 * std::abs(a.cost_quadratic(0, 0)) * std::max(std::abs(a.local_set.lower(0)),
                                                                                std::abs(a.local_set.upper(0))) +
                             std::abs(a.cost_linear(0)) + M * std::abs(a.coupling_matrix(0, 0));
        resolution += slope * width / (points - 1);
      }
      const double cost = relaxed_cost(p, trace.snapshots[t + 1], M);
      const double err = std::abs(cost - eta);
      worst_eta = std::max(worst_eta, err);
      o.require(cost <= eta + 1e-7 && err <= resolution + 1e-7,
                "eta identity seed " + std::to_string(seed) + " t " + std::to_string(t) + " off by " + num(err));
    }
  }
  o.detail = "duality gap " + num(worst_dual) + ", rho* " + num(worst_rho) + ", eta mismatch " + num(worst_eta) +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome criterion6() {
  Outcome o;
  double worst_kkt = 0.0, worst_gap = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto qp = testing::random_feasible_qp(5000 + seed);
    const auto sol = solve_qp(qp.form);
    if (!sol.ok()) {
      o.require(false, "seed " + std::to_string(seed) + ": " + sol.message);
      continue;
    }
    const double kkt = kkt_residuals(qp.form, sol).max();
    worst_kkt = std::max(worst_kkt, kkt);
    worst_gap = std::max(worst_gap, sol.duality_gap());
    o.require(kkt <= 1e-8, "seed " + std::to_string(seed) + " kkt " + num(kkt));
    o.require(sol.duality_gap() <= 1e-7, "seed " + std::to_string(seed) + " gap " + num(sol.duality_gap()));
  }
  // min (x-1)^2 on [0, 0.5]: x = 0.5, upper multiplier 1, objective 0.25
  auto f = QpStandardForm::with_box(Vector::Constant(1, 0.0), Vector::Constant(1, 0.5));
  f.Q(0, 0) = 2.0;
  f.c(0) = -2.0;
  f.constant = 1.0;
  const auto a = solve_qp(f);
  o.require(a.ok() && std::abs(a.x(0) - 0.5) <= 1e-8 && std::abs(a.z_ub(0) - 1.0) <= 1e-7 &&
                std::abs(a.objective - 0.25) <= 1e-8,
            "clipped parabola");
  // min x^2 on [-1, 1]: interior, zero multipliers
  auto g = QpStandardForm::with_box(Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
  g.Q(0, 0) = 2.0;
  const auto b = solve_qp(g);
  o.require(b.ok() && std::abs(b.x(0)) <= 1e-8 && std::abs(b.z_lb(0)) <= 1e-8 && std::abs(b.z_ub(0)) <= 1e-8,
            "interior optimum");
  // min 0 on [0, 1] with x <= -1: empty
  auto h = QpStandardForm::with_box(Vector::Constant(1, 0.0), Vector::Constant(1, 1.0));
  h.add_inequalities(Matrix::Constant(1, 1, 1.0), Vector::Constant(1, -1.0), RowTag::local);
  o.require(solve_qp(h).status == QpStatus::infeasible, "empty region not reported infeasible");
  o.detail = "100 random QPs: worst kkt " + num(worst_kkt) + ", worst gap " + num(worst_gap) +
             (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

Outcome criterion7() {
  Outcome o;
  const auto p = build_random_instance(5, 2, 2, 77);
  Topology topo{TopologyKind::erdos_renyi};
  topo.p = 0.4;
  topo.seed = 77;
  auto cfg = make_config(30.0, 1.0, 0.8, 300, false);
  const auto a = run(p, build_graph(topo, 5), cfg);
  const auto b = run(build_random_instance(5, 2, 2, 77), build_graph(topo, 5), cfg);
  cfg.threads = 4;
  const auto c = run(p, build_graph(topo, 5), cfg);
  o.require(a == b, "same seed, different trace");
  o.require(a == c, "threaded trace differs");
  o.require(!(build_random_instance(5, 2, 2, 78) == p), "different seeds give the same instance");

  o.require(problem_from_json(json::parse(problem_to_json(p).dump())) == p, "problem round-trip");
  const auto mg = default_microgrid_config();
  o.require(build_microgrid_instance(microgrid_from_json(json::parse(microgrid_to_json(mg).dump()))) ==
                build_microgrid_instance(mg),
            "microgrid config round-trip");
  o.require(trace_from_json(json::parse(trace_to_json(a).dump())) == a, "trace round-trip");
  const auto oracle = make_oracle_artifact(p, solve_centralized(p));
  o.require(oracle_from_json(json::parse(oracle_to_json(oracle).dump())) == oracle, "oracle round-trip");
  const auto table = compute_metrics(a, oracle);
  o.require(metrics_from_json(json::parse(metrics_to_json(table).dump())) == table, "metrics json round-trip");
  const auto csv = metrics_from_csv(metrics_to_csv(table));
  o.require(metrics_to_csv(csv) == metrics_to_csv(table), "metrics csv is not stable at 12 digits");

  o.require(load_problem(std::string(RSDD_CONFIG_DIR) + "/two_agent_demo.json") == two_agent_demo(),
            "shipped demo problem file drifted");
  o.require(build_microgrid_instance(load_microgrid_config(std::string(RSDD_CONFIG_DIR) + "/microgrid_default.json")) ==
                build_microgrid_instance(mg),
            "shipped microgrid config drifted");
  o.detail = "traces bit-identical (1 and 4 threads), 7 round-trips" + (o.detail.empty() ? "" : "; " + o.detail);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"two-agent optimality", criterion1},  {"primal recovery on random instances", criterion2},
      {"vanishing relaxation on microgrid", criterion3}, {"per-iteration invariants", criterion4},
      {"duality identities", criterion5},   {"QP solver correctness", criterion6},
      {"determinism and round-trips", criterion7}};
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %zu (%s): %s - %s\n", k + 1, criteria[k].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

#pragma once

// Per-iteration checks run over a whole trace.

#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "rsdd/simulator.hpp"

namespace rsdd {

struct InvariantTolerances {
  double aggregate_feasibility = 1e-6;
  double lambda_consistency = 1e-9;
  double mu_budget = 1e-8;
  double lambda_update = 1e-9;  // relative to 1 + |lambda|
};

struct InvariantViolation {
  std::string invariant;
  int iteration = 0;  // snapshot index
  std::string detail;
};

struct InvariantReport {
  std::vector<InvariantViolation> violations;
  int snapshots_checked = 0;

  bool ok() const { return violations.empty(); }

  bool has(const std::string& name) const {
    for (const auto& v : violations)
      if (v.invariant == name) return true;
    return false;
  }
};

/// || sum_i sum_j (lambda_ij - lambda_ji) ||_inf
inline double lambda_consistency(const std::vector<AgentState>& states, Index S) {
  Vector total = Vector::Zero(S);
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (const auto& [j, lam] : states[i].lambda_out) {
      total += lam;
      const auto back = states.at(j).lambda_out.find(i);
      if (back != states[j].lambda_out.end()) total -= back->second;
    }
  }
  return S == 0 ? 0.0 : total.cwiseAbs().maxCoeff();
}

inline InvariantReport check_trace(const RunTrace& trace, const InvariantTolerances& tol = {}) {
  InvariantReport rep;
  const auto& p = trace.problem;
  const Index S = p.coupling_dim;
  const std::size_t N = p.size();
  auto fail = [&](const std::string& name, int k, const std::string& detail) {
    rep.violations.push_back({name, k, detail});
  };
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
  };

  if (trace.snapshots.empty()) {
    fail("snapshot count", 0, "trace has no initial state");
    return rep;
  }
  if (trace.traffic.size() != static_cast<std::size_t>(trace.iterations())) {
    fail("snapshot count", trace.iterations(),
         std::to_string(trace.snapshots.size()) + " snapshots but " + std::to_string(trace.traffic.size()) +
             " recorded rounds");
  }
  const double spread_bound = 2.0 * trace.M * std::sqrt(static_cast<double>(S));

  for (std::size_t k = 0; k < trace.snapshots.size(); ++k) {
    const int it = static_cast<int>(k);
    const auto& st = trace.snapshots[k];
    rep.snapshots_checked++;
    if (st.size() != N) {
      fail("state shape", it, std::to_string(st.size()) + " agent states for " + std::to_string(N) + " agents");
      continue;
    }
    bool shaped = true;
    for (std::size_t i = 0; i < N; ++i) {
      bool good = st[i].x.size() == p.agents[i].dim && st[i].mu.size() == S && st[i].t == it;
      for (const auto& [j, lam] : st[i].lambda_out) good = good && j < N && trace.graph.adjacency(i, j) && lam.size() == S;
      good = good && st[i].lambda_out.size() == trace.graph.neighbors(i).size();
      if (!good) {
        fail("state shape", it, "agent " + std::to_string(i));
        shaped = false;
      }
    }
    if (!shaped) continue;

    const double lc = lambda_consistency(st, S);
    if (!(lc <= tol.lambda_consistency)) fail("lambda consistency", it, "residual " + num(lc));

    if (k == 0) continue;  // x, rho, mu are placeholders before the first round

    double sum_rho = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      sum_rho += st[i].rho;
      if (!(st[i].rho >= 0.0)) fail("rho nonnegative", it, "agent " + std::to_string(i) + " rho " + num(st[i].rho));
      if (S > 0 && !(st[i].mu.minCoeff() >= 0.0))
        fail("mu nonnegative", it, "agent " + std::to_string(i) + " min " + num(st[i].mu.minCoeff()));
      const double budget = st[i].mu.sum();
      if (!(budget <= trace.M + tol.mu_budget))
        fail("mu budget", it, "agent " + std::to_string(i) + " 1'mu " + num(budget) + " > M " + num(trace.M));
    }
    // replay of the edge update that produced these lambdas
    const auto& before = trace.snapshots[k - 1];
    if (before.size() == N) {
      double gamma = std::numeric_limits<double>::quiet_NaN();
      try {
        gamma = step_size(trace.schedule, it - 1);
      } catch (const std::exception&) {
      }
      for (std::size_t i = 0; i < N; ++i) {
        for (const auto& [j, lam] : st[i].lambda_out) {
          const auto prev = before[i].lambda_out.find(j);
          if (prev == before[i].lambda_out.end() || prev->second.size() != S) continue;
          const Vector expect = lambda_update(prev->second, st[i].mu, st[j].mu, gamma);
          const double err = S == 0 ? 0.0 : (lam - expect).cwiseAbs().maxCoeff();
          const double scale = 1.0 + (S == 0 ? 0.0 : lam.cwiseAbs().maxCoeff());
          if (!(err <= tol.lambda_update * scale))
            fail("lambda update", it,
                 "edge (" + std::to_string(i) + ", " + std::to_string(j) + ") off by " + num(err));
        }
      }
    }

    const double excess = coupling_violation(p, st) - sum_rho;
    if (!(excess <= tol.aggregate_feasibility))
      fail("aggregate feasibility", it, "sum g exceeds sum rho by " + num(excess));

    for (const auto& [i, j] : trace.graph.edges()) {
      const double d = (st[i].mu - st[j].mu).norm();
      if (!(d <= spread_bound))
        fail("mu spread bound", it,
             "edge (" + std::to_string(i) + ", " + std::to_string(j) + ") gap " + num(d) + " > " + num(spread_bound));
    }
  }
  return rep;
}

}  // namespace rsdd

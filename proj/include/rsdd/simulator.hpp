#pragma once

// Synchronous in-process simulation of the distributed scheme. Each round:
// gather lambda_ji, local step, gather mu_j, edge update.

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rsdd/core.hpp"
#include "rsdd/graph.hpp"
#include "rsdd/io.hpp"
#include "rsdd/oracle.hpp"
#include "rsdd/problem.hpp"

namespace rsdd {

inline constexpr const char* kMessageFormat = "rsdd.msg.v1";

enum class MessagePhase { lambda, mu };

inline const char* to_string(MessagePhase p) { return p == MessagePhase::lambda ? "lambda" : "mu"; }

/// The only thing agents ever exchange: an S-vector of multipliers.
struct Message {
  std::size_t sender = 0;
  std::size_t receiver = 0;
  MessagePhase phase = MessagePhase::lambda;
  int iteration = 0;
  Vector payload;

  // sender, receiver, iteration, phase tag, then the payload doubles
  std::size_t byte_estimate() const { return 3 * sizeof(std::uint64_t) + 1 + sizeof(double) * payload.size(); }
};

inline json message_to_json(const Message& m) {
  return json{{"format", kMessageFormat},  {"sender", m.sender},       {"receiver", m.receiver},
              {"phase", to_string(m.phase)}, {"iteration", m.iteration}, {"payload", io::vector(m.payload)}};
}

inline Message message_from_json(const json& j) {
  io::Reader r(j, "");
  if (r.at("format").as_string() != kMessageFormat) throw ParseError("unsupported message format");
  Message m;
  m.sender = static_cast<std::size_t>(r.at("sender").as_int());
  m.receiver = static_cast<std::size_t>(r.at("receiver").as_int());
  const auto phase = r.at("phase").as_string();
  if (phase == "lambda") m.phase = MessagePhase::lambda;
  else if (phase == "mu") m.phase = MessagePhase::mu;
  else throw ParseError("field 'phase': expected lambda or mu");
  m.iteration = static_cast<int>(r.at("iteration").as_int());
  m.payload = r.at("payload").as_vector();
  return m;
}

enum class RunStatus { max_iters, tolerance_met, solver_error };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::max_iters: return "max-iters";
    case RunStatus::tolerance_met: return "tolerance-met";
    case RunStatus::solver_error: return "solver-error";
  }
  return "?";
}

inline RunStatus run_status_from_string(const std::string& s) {
  if (s == "max-iters") return RunStatus::max_iters;
  if (s == "tolerance-met") return RunStatus::tolerance_met;
  if (s == "solver-error") return RunStatus::solver_error;
  throw ParseError("unknown run status '" + s + "'");
}

struct RoundTraffic {
  std::size_t messages = 0;
  std::size_t bytes = 0;
  friend bool operator==(const RoundTraffic&, const RoundTraffic&) = default;
};

/// snapshots[0] holds lambda^0 (x, rho, mu zero); snapshots[t+1] holds the
/// local-step outputs of round t and the lambdas after its update.
struct RunTrace {
  ConstraintCoupledProblem problem;
  Graph graph;
  double M = 0.0;
  StepSizeSchedule schedule;
  std::vector<std::vector<AgentState>> snapshots;
  std::vector<RoundTraffic> traffic;
  RunStatus status = RunStatus::max_iters;
  std::string status_message;
  std::vector<std::string> diagnostics;

  int iterations() const { return snapshots.empty() ? 0 : static_cast<int>(snapshots.size()) - 1; }
  const std::vector<AgentState>& last() const { return snapshots.back(); }
};

struct MessageStats {
  std::vector<std::size_t> per_round;
  std::vector<std::size_t> cumulative;
  std::size_t total = 0;
  Index dimension = 0;  // each message carries this many decimals
};

inline MessageStats message_stats(const Graph& graph, int rounds, Index S) {
  MessageStats st;
  st.dimension = S;
  for (int t = 0; t < rounds; ++t) {
    st.per_round.push_back(2 * graph.directed_edge_count());
    st.total += st.per_round.back();
    st.cumulative.push_back(st.total);
  }
  return st;
}

inline MessageStats message_stats(const RunTrace& trace) {
  return message_stats(trace.graph, trace.iterations(), trace.problem.coupling_dim);
}

/// M from the config, or 10 (||mu*||_1 + 1) from the centralized dual.
inline double resolve_penalty(const ConstraintCoupledProblem& p, const AlgorithmConfig& config) {
  if (config.M) return *config.M;
  return suggested_M(solve_centralized(p).mu_star);
}

/// max_s sum_i g_is(x_i)
inline double coupling_violation(const ConstraintCoupledProblem& p, const std::vector<AgentState>& states) {
  Vector total = Vector::Zero(p.coupling_dim);
  for (std::size_t i = 0; i < p.agents.size(); ++i) total += p.agents[i].coupling(states[i].x);
  return p.coupling_dim == 0 ? 0.0 : total.maxCoeff();
}

inline double relaxed_cost(const ConstraintCoupledProblem& p, const std::vector<AgentState>& states, double M) {
  double c = 0.0;
  for (std::size_t i = 0; i < p.agents.size(); ++i) c += p.agents[i].cost(states[i].x) + M * states[i].rho;
  return c;
}

inline std::vector<AgentState> initial_states(const ConstraintCoupledProblem& p, const Graph& g,
                                              const AlgorithmConfig& config) {
  const Index S = p.coupling_dim;
  std::vector<AgentState> st(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    st[i].x = Vector::Zero(p.agents[i].dim);
    st[i].mu = Vector::Zero(S);
    for (auto j : g.neighbors(i)) {
      const auto it = config.lambda_init.find({i, j});
      st[i].lambda_out[j] = it == config.lambda_init.end() ? Vector::Zero(S) : it->second;
      require_dim(st[i].lambda_out[j].size(), S, "initial lambda");
    }
  }
  for (const auto& [edge, v] : config.lambda_init) {
    if (edge.first >= p.size() || !g.adjacency(edge.first, edge.second)) {
      throw std::invalid_argument("initial lambda given for a non-edge (" + std::to_string(edge.first) + ", " +
                                  std::to_string(edge.second) + ")");
    }
  }
  return st;
}

using MessageTap = std::function<void(const Message&)>;

/// Runs rounds until the stop rule or max_iters. Local-solver failures end the
/// run with status solver-error; the trace up to the failure is kept. `tap`
/// sees every delivered message.
inline RunTrace run(const ConstraintCoupledProblem& problem, const Graph& graph, const AlgorithmConfig& config,
                    const MessageTap& tap = {}) {
  check_structure(problem);
  if (graph.size() != problem.size()) {
    throw std::invalid_argument("graph has " + std::to_string(graph.size()) + " nodes but the problem has " +
                                std::to_string(problem.size()) + " agents");
  }
  const auto sched = validate_schedule(config.schedule);
  if (!sched.ok) throw std::invalid_argument("step-size schedule: " + sched.message);
  if (const auto* seq = std::get_if<std::vector<double>>(&config.schedule.kind);
      seq && seq->size() < static_cast<std::size_t>(std::max(0, config.max_iters))) {
    throw std::invalid_argument("step-size sequence has " + std::to_string(seq->size()) + " entries for " +
                                std::to_string(config.max_iters) + " iterations");
  }

  RunTrace trace;
  trace.problem = problem;
  trace.graph = graph;
  trace.schedule = config.schedule;
  trace.M = resolve_penalty(problem, config);
  if (!sched.message.empty()) trace.diagnostics.push_back("step-size schedule: " + sched.message);
  trace.snapshots.push_back(initial_states(problem, graph, config));

  const std::size_t N = problem.size();
  const Index S = problem.coupling_dim;
  std::vector<RelaxedLocalProblem> locals;
  locals.reserve(N);
  for (const auto& a : problem.agents) locals.emplace_back(a, trace.M, config.local_tol);

  std::vector<int> saturated(N, 0);
  std::vector<bool> flagged(N, false);
  std::vector<double> costs;

  for (int t = 0; t < config.max_iters; ++t) {
    const auto& prev = trace.snapshots.back();
    std::vector<AgentState> next(N);
    RoundTraffic traffic;

    // phase 1: lambda_ji travels j -> i
    std::vector<std::vector<Message>> inbox(N);
    for (std::size_t j = 0; j < N; ++j) {
      for (const auto& [i, lam] : prev[j].lambda_out) {
        Message m{j, i, MessagePhase::lambda, t, lam};
        traffic.messages++;
        traffic.bytes += m.byte_estimate();
        if (tap) tap(m);
        inbox[i].push_back(std::move(m));
      }
    }

    // phase 2: local steps, optionally spread over worker threads
    std::vector<std::exception_ptr> errors(N);
    auto work = [&](std::size_t i) {
      try {
        std::map<std::size_t, Vector> lambda_in;
        for (const auto& m : inbox[i]) lambda_in[m.sender] = m.payload;
        const auto step = locals[i].solve(lambda_term(prev[i].lambda_out, lambda_in, S), i, t);
        next[i].x = step.x;
        next[i].rho = step.rho;
        next[i].mu = step.mu;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    };
    const auto workers = static_cast<std::size_t>(std::max(1, config.threads));
    if (workers <= 1 || N <= 1) {
      for (std::size_t i = 0; i < N; ++i) work(i);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < std::min(workers, N); ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t i = w; i < N; i += workers) work(i);
        });
      }
    }
    for (std::size_t i = 0; i < N; ++i) {
      if (!errors[i]) continue;
      trace.status = RunStatus::solver_error;
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        trace.status_message = e.what();
      }
      return trace;
    }

    // phase 3: mu_j travels j -> i
    std::vector<std::map<std::size_t, Vector>> mu_in(N);
    for (std::size_t j = 0; j < N; ++j) {
      for (auto i : graph.neighbors(j)) {
        Message m{j, i, MessagePhase::mu, t, next[j].mu};
        traffic.messages++;
        traffic.bytes += m.byte_estimate();
        if (tap) tap(m);
        mu_in[i][m.sender] = std::move(m.payload);
      }
    }

    // phase 4: edge update
    const double gamma = step_size(config.schedule, t);
    for (std::size_t i = 0; i < N; ++i) {
      next[i].t = t + 1;
      for (const auto& [j, lam] : prev[i].lambda_out) {
        next[i].lambda_out[j] = lambda_update(lam, next[i].mu, mu_in[i].at(j), gamma);
      }
    }

    for (std::size_t i = 0; i < N; ++i) {
      if (std::abs(next[i].mu.sum() - trace.M) <= 1e-6) {
        if (++saturated[i] > config.saturation_window && !flagged[i]) {
          flagged[i] = true;
          trace.diagnostics.push_back("M likely too small: agent " + std::to_string(i) + " has 1'mu at M for more than " +
                                      std::to_string(config.saturation_window) + " rounds (iteration " +
                                      std::to_string(t) + ")");
        }
      } else {
        saturated[i] = 0;
      }
    }

    trace.traffic.push_back(traffic);
    trace.snapshots.push_back(std::move(next));

    if (config.early_stop) {
      const auto& cur = trace.snapshots.back();
      double sum_rho = 0.0;
      for (const auto& s : cur) sum_rho += s.rho;
      costs.push_back(relaxed_cost(problem, cur, trace.M));
      const int w = config.stop.window;
      if (static_cast<int>(costs.size()) > w && coupling_violation(problem, cur) <= config.stop.coupling_violation &&
          sum_rho <= config.stop.sum_rho) {
        const double now = costs.back();
        const double then = costs[costs.size() - 1 - w];
        if (std::abs(now - then) <= config.stop.cost_stagnation * std::max(1.0, std::abs(now))) {
          trace.status = RunStatus::tolerance_met;
          return trace;
        }
      }
    }
  }
  trace.status = RunStatus::max_iters;
  return trace;
}

}  // namespace rsdd

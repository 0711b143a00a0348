#pragma once

// Per-agent operations of the relaxation-and-duality scheme: the relaxed local
// primal-dual solve, the edge-variable update, step sizes, and the local dual
// quantities used for diagnostics.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rsdd/lift.hpp"
#include "rsdd/problem.hpp"
#include "rsdd/qp.hpp"

namespace rsdd {

struct AgentState {
  Vector x;
  double rho = 0.0;
  Vector mu;
  std::map<std::size_t, Vector> lambda_out;  // neighbor j -> lambda_ij
  int t = 0;

  friend bool operator==(const AgentState& a, const AgentState& b) {
    if (a.rho != b.rho || a.t != b.t || !same_values(a.x, b.x) || !same_values(a.mu, b.mu)) return false;
    if (a.lambda_out.size() != b.lambda_out.size()) return false;
    for (auto ia = a.lambda_out.begin(), ib = b.lambda_out.begin(); ia != a.lambda_out.end(); ++ia, ++ib) {
      if (ia->first != ib->first || !same_values(ia->second, ib->second)) return false;
    }
    return true;
  }
};

// ---------------------------------------------------------------------------
// Step sizes

struct HarmonicPower {
  double gamma0 = 1.0;
  double exponent = 0.8;
};

struct StepSizeSchedule {
  std::variant<HarmonicPower, std::vector<double>> kind = HarmonicPower{};

  static StepSizeSchedule harmonic(double gamma0, double exponent) { return {HarmonicPower{gamma0, exponent}}; }
  static StepSizeSchedule sequence(std::vector<double> values) { return {std::move(values)}; }
};

struct ScheduleCheck {
  bool ok = true;
  std::string message;  // rejection reason, or a warning when ok
};

/// gamma0 / (t+1)^p needs p in (0.5, 1] for sum = inf and sum of squares < inf.
inline ScheduleCheck validate_schedule(const StepSizeSchedule& schedule) {
  if (const auto* h = std::get_if<HarmonicPower>(&schedule.kind)) {
    if (!(h->gamma0 > 0.0)) return {false, "gamma0 must be positive"};
    if (!(h->exponent > 0.5)) return {false, "exponent must exceed 0.5 (square-summability)"};
    if (!(h->exponent <= 1.0)) return {false, "exponent must not exceed 1 (non-summability)"};
    return {};
  }
  const auto& seq = std::get<std::vector<double>>(schedule.kind);
  for (double g : seq) {
    if (!(g >= 0.0)) return {false, "explicit step sizes must be non-negative"};
  }
  return {true, "explicit step-size sequence accepted without checking the summability conditions"};
}

inline double step_size(const StepSizeSchedule& schedule, int t) {
  if (const auto* h = std::get_if<HarmonicPower>(&schedule.kind)) {
    return h->gamma0 / std::pow(static_cast<double>(t) + 1.0, h->exponent);
  }
  const auto& seq = std::get<std::vector<double>>(schedule.kind);
  if (t < 0 || static_cast<std::size_t>(t) >= seq.size()) {
    throw std::out_of_range("explicit step-size sequence has no entry for t=" + std::to_string(t));
  }
  return seq[static_cast<std::size_t>(t)];
}

// ---------------------------------------------------------------------------
// Edge update

/// lambda_ij - gamma (mu_i - mu_j)
inline Vector lambda_update(const Vector& lambda_ij, const Vector& mu_i, const Vector& mu_j, double gamma) {
  require_dim(mu_i.size(), lambda_ij.size(), "lambda_update mu_i");
  require_dim(mu_j.size(), lambda_ij.size(), "lambda_update mu_j");
  return lambda_ij - gamma * (mu_i - mu_j);
}

/// sum_j (lambda_ij - lambda_ji) over the neighbors present in `lambda_out`.
inline Vector lambda_term(const std::map<std::size_t, Vector>& lambda_out,
                          const std::map<std::size_t, Vector>& lambda_in, Index S) {
  Vector term = Vector::Zero(S);
  for (const auto& [j, out] : lambda_out) {
    require_dim(out.size(), S, "lambda_ij");
    const auto in = lambda_in.find(j);
    if (in == lambda_in.end()) throw DimensionError("missing lambda_ji for neighbor " + std::to_string(j));
    require_dim(in->second.size(), S, "lambda_ji");
    term += out - in->second;
  }
  if (lambda_in.size() != lambda_out.size()) throw DimensionError("lambda_in and lambda_out neighbor sets differ");
  return term;
}

// ---------------------------------------------------------------------------
// Local relaxed step

struct LocalStepResult {
  Vector x;
  double rho = 0.0;
  Vector mu;
  double objective = 0.0;  // f_i(x) + M rho
  double kkt_residual = 0.0;
  int solver_iterations = 0;
};

class LocalStepError : public std::runtime_error {
 public:
  LocalStepError(std::size_t agent, int iteration, const std::string& what)
      : std::runtime_error("agent " + std::to_string(agent) + ", iteration " + std::to_string(iteration) +
                           ": local solve failed: " + what),
        agent_(agent),
        iteration_(iteration) {}
  std::size_t agent() const { return agent_; }
  int iteration() const { return iteration_; }

 private:
  std::size_t agent_;
  int iteration_;
};

/// Reusable relaxed local problem of one agent:
///
///   min f_i(x) + M rho   s.t.  rho >= 0,  x in X_i,  A_i x + b_i + term <= rho 1
///
/// Only the right-hand side of the coupling rows and the rho box change
/// between calls, so the lifted form is built once.
class RelaxedLocalProblem {
 public:
  RelaxedLocalProblem(const AgentProblem& agent, double M, double tol = 1e-9) : agent_(&agent), M_(M), tol_(tol) {
    if (!(M > 0.0)) throw std::invalid_argument("M must be positive");
    lifted_ = lift_hinges(agent);
    const Index S = agent.coupling_dim();
    form_ = append_columns(lifted_.form, Vector::Zero(1), Vector::Ones(1));
    rho_col_ = form_.n() - 1;
    form_.c(rho_col_) = M;
    Matrix rows = Matrix::Zero(S, form_.n());
    rows.leftCols(agent.dim) = agent.coupling_matrix;
    rows.col(rho_col_).setConstant(-1.0);
    coupling_first_ = form_.A_in.rows();
    form_.add_inequalities(rows, -agent.coupling_offset, RowTag::coupling);
    // max over the box of each coupling row, for the rho bound
    row_max_.resize(S);
    for (Index s = 0; s < S; ++s) {
      row_max_(s) = detail::row_range(agent.coupling_matrix.row(s).transpose(), agent.local_set.lower,
                                      agent.local_set.upper)
                        .second +
                    agent.coupling_offset(s);
    }
  }

  const QpStandardForm& form() const { return form_; }
  double M() const { return M_; }

  /// Sets the coupling right-hand side for the given lambda term.
  const QpStandardForm& prepare(const Vector& term) {
    const Index S = agent_->coupling_dim();
    require_dim(term.size(), S, "local_step lambda term");
    form_.b_in.segment(coupling_first_, S) = -agent_->coupling_offset - term;
    // rho* = max{0, max_s (g_s(x*) + term_s)} never reaches this bound.
    form_.ub(rho_col_) = std::max(0.0, (row_max_ + term).maxCoeff()) + 1.0;
    return form_;
  }

  LocalStepResult solve(const Vector& term, std::size_t agent_id = 0, int iteration = 0) {
    prepare(term);
    const auto sol = solve_qp(form_, tol_);
    if (!sol.ok()) {
      throw LocalStepError(agent_id, iteration, std::string(to_string(sol.status)) + ": " + sol.message);
    }
    const Index S = agent_->coupling_dim();
    LocalStepResult r;
    r.x = lifted_.x_part(sol.x);
    r.rho = sol.x(rho_col_);
    r.mu = sol.y_in.segment(coupling_first_, S);
    r.objective = sol.objective;
    r.kkt_residual = sol.kkt_residual;
    r.solver_iterations = sol.iterations;
    return r;
  }

 private:
  const AgentProblem* agent_;
  double M_;
  double tol_;
  LiftedAgent lifted_;
  QpStandardForm form_;
  Index rho_col_ = 0;
  Index coupling_first_ = 0;
  Vector row_max_;
};

inline LocalStepResult local_step(const AgentProblem& agent, const Vector& term, double M) {
  RelaxedLocalProblem local(agent, M);
  return local.solve(term);
}

inline LocalStepResult local_step(const AgentProblem& agent, const std::map<std::size_t, Vector>& lambda_out,
                                  const std::map<std::size_t, Vector>& lambda_in, double M) {
  return local_step(agent, lambda_term(lambda_out, lambda_in, agent.coupling_dim()), M);
}

/// f_i(x) + M rho; by the inner min-max equivalence this is the value of the
/// agent's term of the edge-variable dual at the lambdas used for the step.
inline double eta_i_value(const LocalStepResult& step, const AgentProblem& agent, double M) {
  return agent.cost(step.x) + M * step.rho;
}

/// Closed form of max over {mu >= 0, 1'mu <= M} of f(x) + mu'(g(x) + term).
inline double inner_max_value(const AgentProblem& agent, const Vector& x, const Vector& term, double M) {
  const Vector v = agent.coupling(x) + term;
  return agent.cost(x) + M * std::max(0.0, v.maxCoeff());
}

// ---------------------------------------------------------------------------
// Local dual function

struct LocalDualValue {
  double value = 0.0;
  Vector minimizer;
};

/// q_i(mu) = min over X_i of f_i(x) + mu'g_i(x).
inline LocalDualValue q_i_eval(const AgentProblem& agent, const Vector& mu, double tol = 1e-9) {
  require_dim(mu.size(), agent.coupling_dim(), "q_i_eval mu");
  if (mu.size() > 0 && mu.minCoeff() < 0.0) throw std::invalid_argument("q_i_eval requires mu >= 0");
  auto lifted = lift_hinges(agent);
  lifted.form.c.head(agent.dim) += agent.coupling_matrix.transpose() * mu;
  lifted.form.constant += mu.dot(agent.coupling_offset);
  const auto sol = solve_qp(lifted.form, tol);
  if (!sol.ok()) throw std::runtime_error(std::string("q_i_eval: ") + to_string(sol.status) + ": " + sol.message);
  return {sol.objective, lifted.x_part(sol.x)};
}

// ---------------------------------------------------------------------------
// Configuration

struct StopTolerances {
  double coupling_violation = 1e-6;
  double sum_rho = 1e-6;
  double cost_stagnation = 1e-8;  // relative change over the window
  int window = 100;
};

struct AlgorithmConfig {
  std::optional<double> M;  // unset: derived from the centralized dual
  StepSizeSchedule schedule = StepSizeSchedule::harmonic(1.0, 0.8);
  // (i, j) -> lambda_ij; missing entries start at zero
  std::map<std::pair<std::size_t, std::size_t>, Vector> lambda_init;
  int max_iters = 1000;
  bool early_stop = true;
  StopTolerances stop;
  double local_tol = 1e-9;
  int threads = 1;
  // consecutive rounds with 1'mu_i within 1e-6 of M before flagging M as small
  int saturation_window = 50;
};

}  // namespace rsdd

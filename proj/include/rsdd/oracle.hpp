#pragma once

// Centralized ground truth for a constraint-coupled problem: the stacked
// original problem, its relaxed counterpart, dual function values, and an
// exhaustive grid search for tiny instances.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rsdd/core.hpp"
#include "rsdd/lift.hpp"
#include "rsdd/problem.hpp"
#include "rsdd/qp.hpp"

namespace rsdd {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CentralizedResult {
  std::vector<Vector> x;
  double f_star = 0.0;
  Vector mu_star;  // multipliers of the S coupling rows
  double kkt_residual = 0.0;
};

/// Multiplier-based penalty level with a x10 margin: 10 (||mu*||_1 + 1).
inline double suggested_M(const Vector& mu_star) { return 10.0 * (mu_star.lpNorm<1>() + 1.0); }

namespace detail {

struct StackedProblem {
  QpStandardForm form;
  std::vector<Index> offsets;  // column of x_i in the stacked vector
  Index coupling_first = 0;
};

// Stacks the lifted agents and appends sum_i A_i x_i - rho_coeff * rho <= -sum_i b_i.
// When `with_rho` a trailing rho column with box [0, rho_ub] is added.
inline StackedProblem stack_problem(const ConstraintCoupledProblem& p, bool with_rho, double M) {
  std::vector<QpStandardForm> parts;
  std::vector<LiftedAgent> lifted;
  for (const auto& a : p.agents) {
    lifted.push_back(lift_hinges(a));
    parts.push_back(lifted.back().form);
  }
  StackedProblem out;
  Index col = 0;
  for (const auto& l : lifted) {
    out.offsets.push_back(col);
    col += l.form.n();
  }
  out.form = stack_forms(parts);
  const Index S = p.coupling_dim;
  Vector offset_sum = Vector::Zero(S);
  for (const auto& a : p.agents) offset_sum += a.coupling_offset;

  if (with_rho) {
    double worst = 0.0;
    for (Index s = 0; s < S; ++s) {
      double row_max = offset_sum(s);
      for (const auto& a : p.agents) {
        row_max += row_range(a.coupling_matrix.row(s).transpose(), a.local_set.lower, a.local_set.upper).second;
      }
      worst = std::max(worst, row_max);
    }
    out.form = append_columns(out.form, Vector::Zero(1), Vector::Constant(1, worst + 1.0));
    out.form.c(out.form.n() - 1) = M;
  }
  Matrix rows = Matrix::Zero(S, out.form.n());
  for (std::size_t i = 0; i < p.agents.size(); ++i) {
    rows.block(0, out.offsets[i], S, p.agents[i].dim) = p.agents[i].coupling_matrix;
  }
  if (with_rho) rows.col(out.form.n() - 1).setConstant(-1.0);
  out.coupling_first = out.form.A_in.rows();
  out.form.add_inequalities(rows, -offset_sum, RowTag::coupling);
  return out;
}

inline std::vector<Vector> unstack(const ConstraintCoupledProblem& p, const StackedProblem& st, const Vector& v) {
  std::vector<Vector> xs;
  for (std::size_t i = 0; i < p.agents.size(); ++i) xs.emplace_back(v.segment(st.offsets[i], p.agents[i].dim));
  return xs;
}

}  // namespace detail

inline CentralizedResult solve_centralized(const ConstraintCoupledProblem& p, double tol = 1e-9) {
  check_structure(p);
  const auto st = detail::stack_problem(p, false, 0.0);
  const auto sol = solve_qp(st.form, tol);
  if (!sol.ok()) throw OracleError(std::string("centralized solve: ") + to_string(sol.status) + ": " + sol.message);
  CentralizedResult r;
  r.x = detail::unstack(p, st, sol.x);
  r.f_star = sol.objective;
  r.mu_star = sol.y_in.segment(st.coupling_first, p.coupling_dim);
  r.kkt_residual = sol.kkt_residual;
  return r;
}

struct RelaxedResult {
  std::vector<Vector> x;
  double rho = 0.0;
  double cost = 0.0;  // sum f_i + M rho
  Vector mu;          // coupling multipliers, 1'mu <= M
  // rho > 0 at the optimum means M <= ||mu*||_1 for every dual optimum mu*,
  // i.e. the penalty level is below what convergence requires.
  bool precondition_violated = false;
};

inline RelaxedResult solve_relaxed_centralized(const ConstraintCoupledProblem& p, double M, double tol = 1e-9) {
  check_structure(p);
  if (!(M > 0.0)) throw std::invalid_argument("M must be positive");
  const auto st = detail::stack_problem(p, true, M);
  const auto sol = solve_qp(st.form, tol);
  if (!sol.ok()) throw OracleError(std::string("relaxed solve: ") + to_string(sol.status) + ": " + sol.message);
  RelaxedResult r;
  r.x = detail::unstack(p, st, sol.x);
  r.rho = sol.x(st.form.n() - 1);
  r.cost = sol.objective;
  r.mu = sol.y_in.segment(st.coupling_first, p.coupling_dim);
  r.precondition_violated = r.rho > 1e-6;
  return r;
}

/// q(mu) = sum_i q_i(mu)
inline double dual_value(const ConstraintCoupledProblem& p, const Vector& mu) {
  double total = 0.0;
  for (const auto& a : p.agents) total += q_i_eval(a, mu).value;
  return total;
}

/// q(mu) on {mu >= 0, 1'mu <= M}; nullopt marks a point outside that domain (value -inf).
inline std::optional<double> restricted_dual_value(const ConstraintCoupledProblem& p, const Vector& mu, double M) {
  if (mu.sum() > M) return std::nullopt;
  return dual_value(p, mu);
}

// ---------------------------------------------------------------------------
// Grid search

struct BruteForceResult {
  bool found = false;  // false: no feasible grid point
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<Vector> best_x;
  double spacing = 0.0;  // largest grid step; the error bound on the argmin
  std::size_t points_evaluated = 0;
};

struct BruteForceOptions {
  std::size_t max_points = 10'000'000;
  Index max_stacked_dim = 4;
  bool allow_large = false;  // lifts the stacked-dimension cap (not the point cap)
};

/// Exhaustive evaluation over a uniform grid of the stacked box. Coupling
/// feasibility is exact; local linear rows are accepted within half a grid
/// step (otherwise equality-constrained sets would contain no grid point).
inline BruteForceResult brute_force_oracle(const ConstraintCoupledProblem& p, int points_per_dim,
                                           const BruteForceOptions& opt = {}) {
  check_structure(p);
  if (points_per_dim < 2) throw std::invalid_argument("grid needs at least 2 points per dimension");
  const Index dim = p.stacked_dim();
  if (dim > opt.max_stacked_dim && !opt.allow_large) {
    throw std::invalid_argument("stacked dimension " + std::to_string(dim) + " exceeds the grid oracle cap of " +
                                std::to_string(opt.max_stacked_dim));
  }
  const double total = std::pow(static_cast<double>(points_per_dim), static_cast<double>(dim));
  if (total > static_cast<double>(opt.max_points)) {
    throw std::invalid_argument("grid of " + std::to_string(total) + " points exceeds the limit of " +
                                std::to_string(opt.max_points));
  }

  // per-coordinate grids
  std::vector<std::pair<std::size_t, Index>> coord;  // (agent, index)
  Vector lo(dim), step(dim);
  {
    Index k = 0;
    for (std::size_t i = 0; i < p.agents.size(); ++i) {
      for (Index c = 0; c < p.agents[i].dim; ++c, ++k) {
        coord.emplace_back(i, c);
        lo(k) = p.agents[i].local_set.lower(c);
        step(k) = (p.agents[i].local_set.upper(c) - lo(k)) / (points_per_dim - 1);
      }
    }
  }

  BruteForceResult r;
  r.spacing = dim > 0 ? step.maxCoeff() : 0.0;
  std::vector<Vector> xs;
  for (const auto& a : p.agents) xs.emplace_back(Vector::Zero(a.dim));

  auto locally_feasible = [&](std::size_t i) {
    const auto& a = p.agents[i];
    const auto& ls = a.local_set;
    for (Index row = 0; row < ls.eq_matrix.rows(); ++row) {
      const double slack = 0.5 * r.spacing * ls.eq_matrix.row(row).cwiseAbs().sum() + 1e-12;
      if (std::abs(ls.eq_matrix.row(row).dot(xs[i]) - ls.eq_rhs(row)) > slack) return false;
    }
    for (Index row = 0; row < ls.ineq_matrix.rows(); ++row) {
      const double slack = 0.5 * r.spacing * ls.ineq_matrix.row(row).cwiseAbs().sum() + 1e-12;
      if (ls.ineq_matrix.row(row).dot(xs[i]) - ls.ineq_rhs(row) > slack) return false;
    }
    return true;
  };

  std::vector<int> counter(static_cast<std::size_t>(dim), 0);
  const auto n_points = static_cast<std::size_t>(total + 0.5);
  for (std::size_t point = 0; point < n_points; ++point) {
    for (Index k = 0; k < dim; ++k) {
      const auto [i, c] = coord[static_cast<std::size_t>(k)];
      xs[i](c) = lo(k) + step(k) * counter[static_cast<std::size_t>(k)];
    }
    ++r.points_evaluated;
    bool ok = (p.coupling_sum(xs).array() <= 1e-12).all();
    for (std::size_t i = 0; ok && i < p.agents.size(); ++i) ok = locally_feasible(i);
    if (ok) {
      const double cost = p.total_cost(xs);
      if (cost < r.best_cost) {
        r.best_cost = cost;
        r.best_x = xs;
        r.found = true;
      }
    }
    for (Index k = 0; k < dim; ++k) {
      auto& d = counter[static_cast<std::size_t>(k)];
      if (++d < points_per_dim) break;
      d = 0;
    }
  }
  return r;
}

}  // namespace rsdd

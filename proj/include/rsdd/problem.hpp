#pragma once

// Constraint-coupled problem data model:
//
//   min  sum_i f_i(x_i)   s.t.  x_i in X_i,   sum_i (A_i x_i + b_i) <= 0
//
// with f_i(x) = 1/2 x'Px + q'x + k + sum_h scale_h * max{0, a_h'x + c_h}
// and X_i a finite box intersected with optional linear equalities/inequalities.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rsdd/types.hpp"

namespace rsdd {

/// scale * max{0, row'x + offset}
struct HingeTerm {
  double scale = 0.0;
  Vector row;
  double offset = 0.0;

  double value(const Vector& x) const { return scale * std::max(0.0, row.dot(x) + offset); }

  friend bool operator==(const HingeTerm& a, const HingeTerm& b) {
    return a.scale == b.scale && a.offset == b.offset && same_values(a.row, b.row);
  }
};

struct LocalSet {
  Vector lower;
  Vector upper;
  Matrix eq_matrix;  // rows x dim, may have zero rows
  Vector eq_rhs;
  Matrix ineq_matrix;
  Vector ineq_rhs;

  friend bool operator==(const LocalSet& a, const LocalSet& b) {
    return same_values(a.lower, b.lower) && same_values(a.upper, b.upper) &&
           same_values(a.eq_matrix, b.eq_matrix) && same_values(a.eq_rhs, b.eq_rhs) &&
           same_values(a.ineq_matrix, b.ineq_matrix) && same_values(a.ineq_rhs, b.ineq_rhs);
  }
};

struct AgentProblem {
  std::string name;
  Index dim = 0;
  Matrix cost_quadratic;  // P, symmetric PSD; f contains 1/2 x'Px
  Vector cost_linear;
  double cost_constant = 0.0;
  std::vector<HingeTerm> cost_hinges;
  LocalSet local_set;
  Matrix coupling_matrix;  // S x dim
  Vector coupling_offset;  // S

  Index coupling_dim() const { return coupling_matrix.rows(); }

  double cost(const Vector& x) const {
    double value = 0.5 * x.dot(cost_quadratic * x) + cost_linear.dot(x) + cost_constant;
    for (const auto& h : cost_hinges) value += h.value(x);
    return value;
  }

  Vector coupling(const Vector& x) const { return coupling_matrix * x + coupling_offset; }

  friend bool operator==(const AgentProblem& a, const AgentProblem& b) {
    return a.name == b.name && a.dim == b.dim && same_values(a.cost_quadratic, b.cost_quadratic) &&
           same_values(a.cost_linear, b.cost_linear) && a.cost_constant == b.cost_constant &&
           a.cost_hinges == b.cost_hinges && a.local_set == b.local_set &&
           same_values(a.coupling_matrix, b.coupling_matrix) &&
           same_values(a.coupling_offset, b.coupling_offset);
  }
};

/// Builds an agent with the given box, zero cost, no local rows and an S x dim zero coupling map.
inline AgentProblem make_agent(Index dim, Index coupling_dim, const Vector& lower, const Vector& upper) {
  AgentProblem a;
  a.dim = dim;
  a.cost_quadratic = Matrix::Zero(dim, dim);
  a.cost_linear = Vector::Zero(dim);
  a.local_set.lower = lower;
  a.local_set.upper = upper;
  a.local_set.eq_matrix = Matrix::Zero(0, dim);
  a.local_set.eq_rhs = Vector::Zero(0);
  a.local_set.ineq_matrix = Matrix::Zero(0, dim);
  a.local_set.ineq_rhs = Vector::Zero(0);
  a.coupling_matrix = Matrix::Zero(coupling_dim, dim);
  a.coupling_offset = Vector::Zero(coupling_dim);
  return a;
}

struct ConstraintCoupledProblem {
  std::vector<AgentProblem> agents;
  Index coupling_dim = 0;
  std::optional<std::vector<Vector>> slater_point;

  std::size_t size() const { return agents.size(); }

  Index stacked_dim() const {
    Index n = 0;
    for (const auto& a : agents) n += a.dim;
    return n;
  }

  /// sum_i g_i(x_i)
  Vector coupling_sum(const std::vector<Vector>& xs) const {
    Vector total = Vector::Zero(coupling_dim);
    for (std::size_t i = 0; i < agents.size(); ++i) total += agents[i].coupling(xs[i]);
    return total;
  }

  double total_cost(const std::vector<Vector>& xs) const {
    double c = 0.0;
    for (std::size_t i = 0; i < agents.size(); ++i) c += agents[i].cost(xs[i]);
    return c;
  }

  std::vector<Vector> split(const Vector& stacked) const {
    std::vector<Vector> out;
    Index offset = 0;
    for (const auto& a : agents) {
      out.emplace_back(stacked.segment(offset, a.dim));
      offset += a.dim;
    }
    return out;
  }

  friend bool operator==(const ConstraintCoupledProblem& a, const ConstraintCoupledProblem& b) {
    if (a.agents != b.agents || a.coupling_dim != b.coupling_dim) return false;
    if (a.slater_point.has_value() != b.slater_point.has_value()) return false;
    if (!a.slater_point) return true;
    if (a.slater_point->size() != b.slater_point->size()) return false;
    for (std::size_t i = 0; i < a.slater_point->size(); ++i) {
      if (!same_values((*a.slater_point)[i], (*b.slater_point)[i])) return false;
    }
    return true;
  }
};

/// Shape checks only; throws ProblemError naming the first inconsistency.
inline void check_structure(const ConstraintCoupledProblem& p) {
  auto fail = [](std::size_t i, const std::string& what) {
    throw ProblemError("agents[" + std::to_string(i) + "]: " + what);
  };
  if (p.coupling_dim <= 0) throw ProblemError("coupling_dim must be positive");
  if (p.agents.empty()) throw ProblemError("agents must be non-empty");
  for (std::size_t i = 0; i < p.agents.size(); ++i) {
    const auto& a = p.agents[i];
    const Index n = a.dim;
    if (n <= 0) fail(i, "dim must be positive");
    if (a.cost_quadratic.rows() != n || a.cost_quadratic.cols() != n) fail(i, "cost quadratic must be dim x dim");
    if (a.cost_linear.size() != n) fail(i, "cost linear must have dim entries");
    for (const auto& h : a.cost_hinges) {
      if (h.row.size() != n) fail(i, "hinge row must have dim entries");
    }
    const auto& ls = a.local_set;
    if (ls.lower.size() != n || ls.upper.size() != n) fail(i, "box bounds must have dim entries");
    if (ls.eq_matrix.cols() != n || ls.eq_matrix.rows() != ls.eq_rhs.size()) fail(i, "local equality system shape");
    if (ls.ineq_matrix.cols() != n || ls.ineq_matrix.rows() != ls.ineq_rhs.size())
      fail(i, "local inequality system shape");
    if (a.coupling_matrix.rows() != p.coupling_dim || a.coupling_offset.size() != p.coupling_dim)
      fail(i, "coupling map has " + std::to_string(a.coupling_matrix.rows()) + " rows, coupling_dim is " +
                  std::to_string(p.coupling_dim));
    if (a.coupling_matrix.cols() != n) fail(i, "coupling matrix must have dim columns");
  }
  if (p.slater_point) {
    if (p.slater_point->size() != p.agents.size()) throw ProblemError("slater_point must have one vector per agent");
    for (std::size_t i = 0; i < p.agents.size(); ++i) {
      if ((*p.slater_point)[i].size() != p.agents[i].dim) fail(i, "slater point has wrong dimension");
    }
  }
}

// ---------------------------------------------------------------------------
// Microgrid instances

struct MicrogridConfig {
  int n_gen = 4;
  int n_stor = 3;
  int n_conl = 2;
  int horizon = 12;  // T; trajectories have T+1 samples

  double gen_p_min = 0.1;
  double gen_p_max = 1.2;
  double gen_rate_min = -0.4;
  double gen_rate_max = 0.4;
  double gen_alpha1 = 0.5;
  double gen_alpha2 = 1.0;

  double stor_discharge = 0.5;  // d_stor
  double stor_charge = 0.5;     // c_stor
  double stor_q_max = 2.0;
  double stor_q_init = 1.0;

  std::vector<double> conl_desired;  // p_des, T+1 samples
  double conl_p_min = 0.0;
  double conl_p_max = 1.0;
  double conl_beta = 2.0;

  double trade_capacity = 1.5;  // E
  double trade_price = 1.0;     // c1
  double trade_fee = 0.1;       // c2

  std::vector<double> demand;  // D, T+1 samples

  // The demand balance is coupled as |sum p - D| <= balance_tolerance.
  double balance_tolerance = 1e-3;
};

/// Day-shaped demand in [1.0, 2.5]: low at the ends of the horizon, peak at T/2.
inline std::vector<double> default_demand_profile(int horizon) {
  std::vector<double> d(static_cast<std::size_t>(horizon) + 1);
  for (int tau = 0; tau <= horizon; ++tau) {
    const double phase = horizon == 0 ? 0.0 : 2.0 * M_PI * tau / horizon;
    d[static_cast<std::size_t>(tau)] = 1.75 - 0.75 * std::cos(phase);
  }
  return d;
}

inline MicrogridConfig default_microgrid_config() {
  MicrogridConfig c;
  c.demand = default_demand_profile(c.horizon);
  c.conl_desired.assign(static_cast<std::size_t>(c.horizon) + 1, 0.4);
  return c;
}

/// Throws ProblemError naming the offending field.
inline void validate_microgrid_config(const MicrogridConfig& c) {
  auto bad = [](const std::string& field, const std::string& why) {
    throw ProblemError("microgrid config field '" + field + "': " + why);
  };
  if (c.n_gen < 0) bad("n_gen", "must be >= 0");
  if (c.n_stor < 0) bad("n_stor", "must be >= 0");
  if (c.n_conl < 0) bad("n_conl", "must be >= 0");
  if (c.horizon < 0) bad("horizon", "must be >= 0");
  if (!(c.gen_p_min < c.gen_p_max)) bad("gen_p_min", "must be < gen_p_max");
  if (!(c.gen_rate_min < 0.0)) bad("gen_rate_min", "must be < 0");
  if (!(c.gen_rate_max > 0.0)) bad("gen_rate_max", "must be > 0");
  if (!(c.gen_alpha2 > 0.0)) bad("gen_alpha2", "must be > 0");
  if (!(c.stor_discharge > 0.0)) bad("stor_discharge", "must be > 0");
  if (!(c.stor_charge > 0.0)) bad("stor_charge", "must be > 0");
  if (!(c.stor_q_max > 0.0)) bad("stor_q_max", "must be > 0");
  if (c.stor_q_init < 0.0 || c.stor_q_init > c.stor_q_max) bad("stor_q_init", "must lie in [0, stor_q_max]");
  if (!(c.conl_beta > 0.0)) bad("conl_beta", "must be > 0");
  if (!(c.conl_p_min <= c.conl_p_max)) bad("conl_p_min", "must be <= conl_p_max");
  if (!(c.trade_capacity > 0.0)) bad("trade_capacity", "must be > 0");
  if (!(c.trade_fee > 0.0)) bad("trade_fee", "must be > 0");
  if (!(c.balance_tolerance > 0.0)) bad("balance_tolerance", "must be > 0");
  const auto samples = static_cast<std::size_t>(c.horizon) + 1;
  if (c.demand.size() != samples) bad("demand", "must have horizon+1 entries");
  if (c.n_conl > 0 && c.conl_desired.size() != samples) bad("conl_desired", "must have horizon+1 entries");
  for (double v : c.demand) {
    if (!std::isfinite(v)) bad("demand", "entries must be finite");
  }
}

/// One agent per device, generators first, then storage, loads, and the trade node last.
/// Coupling row 2*tau is  sum_i p_i^tau - D^tau - tol <= 0, row 2*tau+1 is its mirror.
inline ConstraintCoupledProblem build_microgrid_instance(const MicrogridConfig& c) {
  validate_microgrid_config(c);
  const Index samples = c.horizon + 1;
  const Index S = 2 * samples;

  // +p on the <= row, -p on the >= row, for the power entries at `offset`.
  auto balance_rows = [&](Index dim, Index offset) {
    Matrix A = Matrix::Zero(S, dim);
    for (Index tau = 0; tau < samples; ++tau) {
      A(2 * tau, offset + tau) = 1.0;
      A(2 * tau + 1, offset + tau) = -1.0;
    }
    return A;
  };

  ConstraintCoupledProblem p;
  p.coupling_dim = S;

  for (int g = 0; g < c.n_gen; ++g) {
    auto a = make_agent(samples, S, Vector::Constant(samples, c.gen_p_min), Vector::Constant(samples, c.gen_p_max));
    a.name = "gen" + std::to_string(g + 1);
    a.cost_quadratic = 2.0 * c.gen_alpha2 * Matrix::Identity(samples, samples);
    a.cost_linear = Vector::Constant(samples, c.gen_alpha1);
    // r_min <= p^{tau+1} - p^tau <= r_max
    a.local_set.ineq_matrix = Matrix::Zero(2 * c.horizon, samples);
    a.local_set.ineq_rhs = Vector::Zero(2 * c.horizon);
    for (Index tau = 0; tau < c.horizon; ++tau) {
      a.local_set.ineq_matrix(2 * tau, tau + 1) = 1.0;
      a.local_set.ineq_matrix(2 * tau, tau) = -1.0;
      a.local_set.ineq_rhs(2 * tau) = c.gen_rate_max;
      a.local_set.ineq_matrix(2 * tau + 1, tau + 1) = -1.0;
      a.local_set.ineq_matrix(2 * tau + 1, tau) = 1.0;
      a.local_set.ineq_rhs(2 * tau + 1) = -c.gen_rate_min;
    }
    a.coupling_matrix = balance_rows(samples, 0);
    p.agents.push_back(std::move(a));
  }

  for (int s = 0; s < c.n_stor; ++s) {
    // x = [p^0..p^T, q^0..q^T]
    const Index dim = 2 * samples;
    Vector lo(dim), hi(dim);
    lo << Vector::Constant(samples, -c.stor_discharge), Vector::Zero(samples);
    hi << Vector::Constant(samples, c.stor_charge), Vector::Constant(samples, c.stor_q_max);
    auto a = make_agent(dim, S, lo, hi);
    a.name = "stor" + std::to_string(s + 1);
    // q^{tau+1} - q^tau - p^tau = 0, and q^0 = q_init
    a.local_set.eq_matrix = Matrix::Zero(samples, dim);
    a.local_set.eq_rhs = Vector::Zero(samples);
    for (Index tau = 0; tau < c.horizon; ++tau) {
      a.local_set.eq_matrix(tau, samples + tau + 1) = 1.0;
      a.local_set.eq_matrix(tau, samples + tau) = -1.0;
      a.local_set.eq_matrix(tau, tau) = -1.0;
    }
    a.local_set.eq_matrix(c.horizon, samples) = 1.0;
    a.local_set.eq_rhs(c.horizon) = c.stor_q_init;
    a.coupling_matrix = balance_rows(dim, 0);
    p.agents.push_back(std::move(a));
  }

  for (int l = 0; l < c.n_conl; ++l) {
    auto a = make_agent(samples, S, Vector::Constant(samples, c.conl_p_min), Vector::Constant(samples, c.conl_p_max));
    a.name = "conl" + std::to_string(l + 1);
    for (Index tau = 0; tau < samples; ++tau) {
      HingeTerm h;
      h.scale = c.conl_beta;
      h.row = Vector::Zero(samples);
      h.row(tau) = -1.0;
      h.offset = c.conl_desired[static_cast<std::size_t>(tau)];
      a.cost_hinges.push_back(std::move(h));
    }
    a.coupling_matrix = balance_rows(samples, 0);
    p.agents.push_back(std::move(a));
  }

  {
    auto a = make_agent(samples, S, Vector::Constant(samples, -c.trade_capacity),
                        Vector::Constant(samples, c.trade_capacity));
    a.name = "trade";
    a.cost_linear = Vector::Constant(samples, -c.trade_price);
    // c2 |p| = c2 max{0, p} + c2 max{0, -p}
    for (Index tau = 0; tau < samples; ++tau) {
      for (double sign : {1.0, -1.0}) {
        HingeTerm h;
        h.scale = c.trade_fee;
        h.row = Vector::Zero(samples);
        h.row(tau) = sign;
        a.cost_hinges.push_back(std::move(h));
      }
    }
    a.coupling_matrix = balance_rows(samples, 0);
    // Only the connection node knows the demand.
    for (Index tau = 0; tau < samples; ++tau) {
      const double d = c.demand[static_cast<std::size_t>(tau)];
      a.coupling_offset(2 * tau) = -d - c.balance_tolerance;
      a.coupling_offset(2 * tau + 1) = d - c.balance_tolerance;
    }
    p.agents.push_back(std::move(a));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Random instances

/// Random strongly convex agents with random boxes and coupling maps. The
/// coupling offsets are shifted so that an interior point (stored as the Slater
/// point) satisfies sum_i g_i < 0 with a positive margin.
inline ConstraintCoupledProblem build_random_instance(int n_agents, int dim_each, int coupling_dim,
                                                      std::uint64_t seed) {
  if (n_agents <= 0 || dim_each <= 0 || coupling_dim <= 0) {
    throw ProblemError("random instance counts must be positive");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> positive(0.0, 1.0);
  const Index n = dim_each;
  const Index S = coupling_dim;

  ConstraintCoupledProblem p;
  p.coupling_dim = S;
  std::vector<Vector> interior;
  Vector total = Vector::Zero(S);

  for (int i = 0; i < n_agents; ++i) {
    Vector lo(n), hi(n);
    for (Index k = 0; k < n; ++k) {
      lo(k) = -0.5 - 1.5 * positive(rng);
      hi(k) = 0.5 + 1.5 * positive(rng);
    }
    auto a = make_agent(n, S, lo, hi);
    a.name = "agent" + std::to_string(i + 1);
    Matrix B(n, n);
    for (Index r = 0; r < n; ++r)
      for (Index k = 0; k < n; ++k) B(r, k) = unit(rng);
    a.cost_quadratic = B.transpose() * B + 0.5 * Matrix::Identity(n, n);
    for (Index k = 0; k < n; ++k) a.cost_linear(k) = 2.0 * unit(rng);
    a.cost_constant = 1.0 + positive(rng);
    for (Index s = 0; s < S; ++s) {
      for (Index k = 0; k < n; ++k) a.coupling_matrix(s, k) = unit(rng);
      a.coupling_offset(s) = unit(rng);
    }
    Vector x(n);
    for (Index k = 0; k < n; ++k) {
      const double w = 0.2 + 0.6 * positive(rng);
      x(k) = lo(k) + w * (hi(k) - lo(k));
    }
    total += a.coupling(x);
    interior.push_back(x);
    p.agents.push_back(std::move(a));
  }

  Vector margin(S);
  for (Index s = 0; s < S; ++s) margin(s) = 0.1 + 0.4 * positive(rng);
  const Vector shift = (total + margin) / static_cast<double>(n_agents);
  for (auto& a : p.agents) a.coupling_offset -= shift;
  p.slater_point = interior;
  return p;
}

/// f1 = x1^2, f2 = (x2 - 2)^2, X = [-5, 5], coupling x1 + x2 - 1 <= 0 (or `rhs` in place of 1).
inline ConstraintCoupledProblem two_agent_demo(double rhs = 1.0) {
  ConstraintCoupledProblem p;
  p.coupling_dim = 1;
  Vector lo = Vector::Constant(1, -5.0), hi = Vector::Constant(1, 5.0);
  auto a1 = make_agent(1, 1, lo, hi);
  a1.name = "agent1";
  a1.cost_quadratic(0, 0) = 2.0;
  a1.coupling_matrix(0, 0) = 1.0;
  auto a2 = make_agent(1, 1, lo, hi);
  a2.name = "agent2";
  a2.cost_quadratic(0, 0) = 2.0;
  a2.cost_linear(0) = -4.0;
  a2.cost_constant = 4.0;
  a2.coupling_matrix(0, 0) = 1.0;
  a2.coupling_offset(0) = -rhs;
  p.agents = {a1, a2};
  return p;
}

}  // namespace rsdd

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rsdd/lift.hpp"
#include "rsdd/oracle.hpp"
#include "rsdd/problem.hpp"
#include "rsdd/qp.hpp"

namespace rsdd {

struct ValidationReport {
  std::vector<std::string> findings;
  std::optional<double> slater_margin;  // min_s -sum_i g_is at the certified point

  bool ok() const { return findings.empty(); }

  bool mentions(const std::string& text) const {
    for (const auto& f : findings)
      if (f.find(text) != std::string::npos) return true;
    return false;
  }
};

namespace detail {

inline constexpr double kSlaterMargin = 1e-8;

// Largest achievable margin min_s -(sum_i g_is(x_i)) over the local sets.
inline std::optional<double> best_slater_margin(const ConstraintCoupledProblem& p) {
  auto st = stack_problem(p, true, 1.0);
  const Index rho = st.form.n() - 1;
  double lowest = std::numeric_limits<double>::infinity();
  Vector offset_sum = Vector::Zero(p.coupling_dim);
  for (const auto& a : p.agents) offset_sum += a.coupling_offset;
  for (Index s = 0; s < p.coupling_dim; ++s) {
    double row_min = offset_sum(s);
    for (const auto& a : p.agents)
      row_min += row_range(a.coupling_matrix.row(s).transpose(), a.local_set.lower, a.local_set.upper).first;
    lowest = std::min(lowest, row_min);
  }
  // min rho with rho free (bounded by the box range of the coupling rows)
  st.form.Q.setZero();
  st.form.c.setZero();
  st.form.constant = 0.0;
  st.form.c(rho) = 1.0;
  st.form.lb(rho) = lowest - 1.0;
  const auto sol = solve_qp(st.form, 1e-10);
  if (!sol.ok()) return std::nullopt;
  return -sol.x(rho);
}

}  // namespace detail

/// Every violated admissibility condition, one finding each. Never throws.
inline ValidationReport validate_problem(const ConstraintCoupledProblem& p) {
  ValidationReport report;
  try {
    check_structure(p);
  } catch (const ProblemError& e) {
    report.findings.push_back(std::string("malformed problem: ") + e.what());
    return report;
  }

  bool locals_ok = true;
  for (std::size_t i = 0; i < p.agents.size(); ++i) {
    const auto& a = p.agents[i];
    const std::string who = "agents[" + std::to_string(i) + "]";
    bool compact = true;
    for (Index k = 0; k < a.dim; ++k) {
      if (!std::isfinite(a.local_set.lower(k)) || !std::isfinite(a.local_set.upper(k))) compact = false;
    }
    if (!compact) {
      report.findings.push_back(who + ": non-compact local set (infinite box bound)");
      locals_ok = false;
      continue;
    }
    if (((a.local_set.lower - a.local_set.upper).array() > 0.0).any()) {
      report.findings.push_back(who + ": empty local set (lower bound above upper bound)");
      locals_ok = false;
      continue;
    }
    if ((a.cost_quadratic - a.cost_quadratic.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
      report.findings.push_back(who + ": non-convex cost (quadratic matrix not symmetric)");
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(a.cost_quadratic, Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() < -1e-9) {
        report.findings.push_back(who + ": non-convex cost (quadratic matrix not positive semidefinite)");
      }
    }
    for (const auto& h : a.cost_hinges) {
      if (!(h.scale >= 0.0)) {
        report.findings.push_back(who + ": non-convex cost (negative hinge scale)");
        break;
      }
    }
    const auto lifted = lift_hinges(a);
    const auto feas = solve_phase_one(lifted.form);
    if (!feas.ok()) {
      report.findings.push_back(who + ": local set nonemptiness unverified (" + feas.message + ")");
      locals_ok = false;
    } else if (feas.objective > 1e-7) {
      report.findings.push_back(who + ": empty local set");
      locals_ok = false;
    }
  }

  if (p.slater_point) {
    const auto& pts = *p.slater_point;
    bool valid = true;
    for (std::size_t i = 0; i < p.agents.size(); ++i) {
      const auto& ls = p.agents[i].local_set;
      const Vector& x = pts[i];
      for (Index k = 0; k < x.size(); ++k) {
        const bool flat = ls.lower(k) == ls.upper(k);
        if (flat ? x(k) != ls.lower(k) : !(x(k) > ls.lower(k) && x(k) < ls.upper(k))) valid = false;
      }
      if (ls.eq_matrix.rows() > 0 && inf_norm(ls.eq_matrix * x - ls.eq_rhs) > 1e-9) valid = false;
      if (ls.ineq_matrix.rows() > 0 && (ls.ineq_matrix * x - ls.ineq_rhs).maxCoeff() > 1e-9) valid = false;
    }
    if (!valid) {
      report.findings.push_back("slater_point is not in the relative interior of the local sets");
    } else {
      const double margin = -p.coupling_sum(pts).maxCoeff();
      if (margin < detail::kSlaterMargin) {
        report.findings.push_back("slater_point violates strict coupling feasibility (margin " +
                                  std::to_string(margin) + ")");
      } else {
        report.slater_margin = margin;
      }
    }
  } else if (locals_ok) {
    const auto margin = detail::best_slater_margin(p);
    if (!margin) {
      report.findings.push_back("Slater unverified (margin problem could not be solved)");
    } else if (*margin < detail::kSlaterMargin) {
      report.findings.push_back("no Slater point: best achievable coupling margin is " + std::to_string(*margin));
    } else {
      report.slater_margin = margin;
    }
  } else {
    report.findings.push_back("Slater unverified (local sets invalid)");
  }
  return report;
}

}  // namespace rsdd

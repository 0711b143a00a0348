#pragma once

// Epigraph lift of an agent's cost into QP standard form. Each hinge
// scale * max{0, a'x + b} becomes an auxiliary t with  t >= 0  (box) and
// a'x - t <= -b  (row tagged `hinge`), contributing scale * t to the cost.
// Variables are ordered [x, t].

#include <algorithm>

#include "rsdd/problem.hpp"
#include "rsdd/qp.hpp"

namespace rsdd {

struct LiftedAgent {
  QpStandardForm form;
  Index x_dim = 0;
  Index hinge_count = 0;

  Vector x_part(const Vector& v) const { return v.head(x_dim); }
};

inline LiftedAgent lift_hinges(const AgentProblem& a) {
  const Index n = a.dim;
  const auto H = static_cast<Index>(a.cost_hinges.size());
  const Index total = n + H;

  Vector lb(total), ub(total);
  lb.head(n) = a.local_set.lower;
  ub.head(n) = a.local_set.upper;
  for (Index h = 0; h < H; ++h) {
    const auto& term = a.cost_hinges[static_cast<std::size_t>(h)];
    const auto range = detail::row_range(term.row, a.local_set.lower, a.local_set.upper);
    lb(n + h) = 0.0;
    // Upper bound never binds at an optimum: max{0, a'x+b} over the box plus slack.
    ub(n + h) = std::max(0.0, range.second + term.offset) + 1.0;
  }

  LiftedAgent out;
  out.x_dim = n;
  out.hinge_count = H;
  auto& f = out.form;
  f = QpStandardForm::with_box(lb, ub);
  f.Q.topLeftCorner(n, n) = a.cost_quadratic;
  f.c.head(n) = a.cost_linear;
  f.constant = a.cost_constant;
  for (Index h = 0; h < H; ++h) f.c(n + h) = a.cost_hinges[static_cast<std::size_t>(h)].scale;

  if (a.local_set.eq_matrix.rows() > 0) {
    Matrix rows = Matrix::Zero(a.local_set.eq_matrix.rows(), total);
    rows.leftCols(n) = a.local_set.eq_matrix;
    f.add_equalities(rows, a.local_set.eq_rhs);
  }
  if (a.local_set.ineq_matrix.rows() > 0) {
    Matrix rows = Matrix::Zero(a.local_set.ineq_matrix.rows(), total);
    rows.leftCols(n) = a.local_set.ineq_matrix;
    f.add_inequalities(rows, a.local_set.ineq_rhs, RowTag::local);
  }
  if (H > 0) {
    Matrix rows = Matrix::Zero(H, total);
    Vector rhs(H);
    for (Index h = 0; h < H; ++h) {
      const auto& term = a.cost_hinges[static_cast<std::size_t>(h)];
      rows.block(h, 0, 1, n) = term.row.transpose();
      rows(h, n + h) = -1.0;
      rhs(h) = -term.offset;
    }
    f.add_inequalities(rows, rhs, RowTag::hinge);
  }
  return out;
}

/// Appends `extra` zero-cost columns with box [lb, ub] to a form.
inline QpStandardForm append_columns(const QpStandardForm& f, const Vector& lb, const Vector& ub) {
  const Index n = f.n();
  const Index k = lb.size();
  QpStandardForm g;
  g.Q = Matrix::Zero(n + k, n + k);
  g.Q.topLeftCorner(n, n) = f.Q;
  g.c = Vector::Zero(n + k);
  g.c.head(n) = f.c;
  g.constant = f.constant;
  g.lb.resize(n + k);
  g.lb << f.lb, lb;
  g.ub.resize(n + k);
  g.ub << f.ub, ub;
  g.A_eq = Matrix::Zero(f.A_eq.rows(), n + k);
  g.A_eq.leftCols(n) = f.A_eq;
  g.b_eq = f.b_eq;
  g.A_in = Matrix::Zero(f.A_in.rows(), n + k);
  g.A_in.leftCols(n) = f.A_in;
  g.b_in = f.b_in;
  g.in_tags = f.in_tags;
  return g;
}

/// Block-diagonal stacking of several forms; the stacked variables follow input order.
inline QpStandardForm stack_forms(const std::vector<QpStandardForm>& parts) {
  Index n = 0, m_eq = 0, m_in = 0;
  for (const auto& p : parts) {
    n += p.n();
    m_eq += p.A_eq.rows();
    m_in += p.A_in.rows();
  }
  QpStandardForm g;
  g.Q = Matrix::Zero(n, n);
  g.c.resize(n);
  g.lb.resize(n);
  g.ub.resize(n);
  g.A_eq = Matrix::Zero(m_eq, n);
  g.b_eq.resize(m_eq);
  g.A_in = Matrix::Zero(m_in, n);
  g.b_in.resize(m_in);
  Index col = 0, re = 0, ri = 0;
  for (const auto& p : parts) {
    const Index k = p.n();
    g.Q.block(col, col, k, k) = p.Q;
    g.c.segment(col, k) = p.c;
    g.constant += p.constant;
    g.lb.segment(col, k) = p.lb;
    g.ub.segment(col, k) = p.ub;
    g.A_eq.block(re, col, p.A_eq.rows(), k) = p.A_eq;
    g.b_eq.segment(re, p.A_eq.rows()) = p.b_eq;
    g.A_in.block(ri, col, p.A_in.rows(), k) = p.A_in;
    g.b_in.segment(ri, p.A_in.rows()) = p.b_in;
    g.in_tags.insert(g.in_tags.end(), p.in_tags.begin(), p.in_tags.end());
    col += k;
    re += p.A_eq.rows();
    ri += p.A_in.rows();
  }
  return g;
}

}  // namespace rsdd

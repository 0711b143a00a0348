#pragma once

// Dense convex QP solver.
//
//   min  1/2 x'Qx + c'x + k
//   s.t. A_eq x = b_eq,  A_in x <= b_in,  lb <= x <= ub
//
// Primal-dual interior point with Mehrotra predictor-corrector. Multipliers
// follow the Lagrangian
//
//   L = f + y_eq'(A_eq x - b_eq) + y_in'(A_in x - b_in) + z_ub'(x - ub) + z_lb'(lb - x)
//
// so stationarity reads Qx + c + A_eq'y_eq + A_in'y_in + z_ub - z_lb = 0.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "rsdd/types.hpp"

namespace rsdd {

enum class RowTag { local, coupling, hinge, elastic };

struct QpStandardForm {
  Matrix Q;
  Vector c;
  double constant = 0.0;
  Vector lb;
  Vector ub;
  Matrix A_eq;
  Vector b_eq;
  Matrix A_in;
  Vector b_in;
  std::vector<RowTag> in_tags;  // one per inequality row

  Index n() const { return c.size(); }

  /// Empty problem of dimension n with box [lb, ub].
  static QpStandardForm with_box(const Vector& lb, const Vector& ub) {
    QpStandardForm f;
    const Index n = lb.size();
    f.Q = Matrix::Zero(n, n);
    f.c = Vector::Zero(n);
    f.lb = lb;
    f.ub = ub;
    f.A_eq = Matrix::Zero(0, n);
    f.b_eq = Vector::Zero(0);
    f.A_in = Matrix::Zero(0, n);
    f.b_in = Vector::Zero(0);
    return f;
  }

  double objective(const Vector& x) const { return 0.5 * x.dot(Q * x) + c.dot(x) + constant; }

  /// Appends inequality rows `rows x <= rhs` tagged `tag`.
  void add_inequalities(const Matrix& rows, const Vector& rhs, RowTag tag) {
    Matrix A(A_in.rows() + rows.rows(), n());
    A << A_in, rows;
    Vector b(b_in.size() + rhs.size());
    b << b_in, rhs;
    A_in = std::move(A);
    b_in = std::move(b);
    in_tags.insert(in_tags.end(), static_cast<std::size_t>(rows.rows()), tag);
  }

  void add_equalities(const Matrix& rows, const Vector& rhs) {
    Matrix A(A_eq.rows() + rows.rows(), n());
    A << A_eq, rows;
    Vector b(b_eq.size() + rhs.size());
    b << b_eq, rhs;
    A_eq = std::move(A);
    b_eq = std::move(b);
  }

  std::vector<Index> rows_tagged(RowTag tag) const {
    std::vector<Index> out;
    for (std::size_t k = 0; k < in_tags.size(); ++k)
      if (in_tags[k] == tag) out.push_back(static_cast<Index>(k));
    return out;
  }
};

enum class QpStatus { optimal, infeasible, max_iterations, numerical_error, invalid_input };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::max_iterations: return "max_iterations";
    case QpStatus::numerical_error: return "numerical_error";
    case QpStatus::invalid_input: return "invalid_input";
  }
  return "unknown";
}

struct PrimalDualSolution {
  QpStatus status = QpStatus::numerical_error;
  Vector x;
  Vector y_in;  // >= 0
  Vector y_eq;
  Vector z_lb;  // >= 0
  Vector z_ub;  // >= 0
  double objective = std::numeric_limits<double>::quiet_NaN();
  double dual_objective = std::numeric_limits<double>::quiet_NaN();
  double kkt_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::string message;

  bool ok() const { return status == QpStatus::optimal; }
  double duality_gap() const { return std::abs(objective - dual_objective); }
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  double dual_feasibility = 0.0;
  double complementarity = 0.0;

  double max() const { return std::max({stationarity, primal_feasibility, dual_feasibility, complementarity}); }
};

/// Residuals of a candidate pair, recomputed from the problem data alone.
inline KktResiduals kkt_residuals(const QpStandardForm& qp, const PrimalDualSolution& s) {
  const Index n = qp.n();
  require_dim(s.x.size(), n, "kkt_residuals x");
  require_dim(s.y_in.size(), qp.A_in.rows(), "kkt_residuals y_in");
  require_dim(s.y_eq.size(), qp.A_eq.rows(), "kkt_residuals y_eq");
  require_dim(s.z_lb.size(), n, "kkt_residuals z_lb");
  require_dim(s.z_ub.size(), n, "kkt_residuals z_ub");

  KktResiduals r;
  const Vector grad = qp.Q * s.x + qp.c + qp.A_eq.transpose() * s.y_eq + qp.A_in.transpose() * s.y_in + s.z_ub - s.z_lb;
  r.stationarity = inf_norm(grad);

  const Vector eq = qp.A_eq * s.x - qp.b_eq;
  const Vector in_slack = qp.b_in - qp.A_in * s.x;
  const Vector ub_slack = qp.ub - s.x;
  const Vector lb_slack = s.x - qp.lb;
  double pf = inf_norm(eq);
  if (in_slack.size() > 0) pf = std::max(pf, -in_slack.minCoeff());
  if (n > 0) pf = std::max({pf, -ub_slack.minCoeff(), -lb_slack.minCoeff()});
  r.primal_feasibility = std::max(pf, 0.0);

  double df = 0.0;
  if (s.y_in.size() > 0) df = std::max(df, -s.y_in.minCoeff());
  if (n > 0) df = std::max({df, -s.z_lb.minCoeff(), -s.z_ub.minCoeff()});
  r.dual_feasibility = df;

  double cs = 0.0;
  if (s.y_in.size() > 0) cs = std::max(cs, s.y_in.cwiseProduct(in_slack).cwiseAbs().maxCoeff());
  if (n > 0) {
    cs = std::max(cs, s.z_ub.cwiseProduct(ub_slack).cwiseAbs().maxCoeff());
    cs = std::max(cs, s.z_lb.cwiseProduct(lb_slack).cwiseAbs().maxCoeff());
  }
  r.complementarity = cs;
  return r;
}

/// Wolfe dual objective at (x, y, z); equals the primal objective at a KKT point.
inline double dual_objective(const QpStandardForm& qp, const PrimalDualSolution& s) {
  return -0.5 * s.x.dot(qp.Q * s.x) - qp.b_eq.dot(s.y_eq) - qp.b_in.dot(s.y_in) - qp.ub.dot(s.z_ub) +
         qp.lb.dot(s.z_lb) + qp.constant;
}

/// Empty string when the form is well posed; otherwise the first problem found.
inline std::string check_form(const QpStandardForm& qp, double psd_tol = 1e-9) {
  const Index n = qp.n();
  if (qp.Q.rows() != n || qp.Q.cols() != n) return "Q must be n x n";
  if (qp.lb.size() != n || qp.ub.size() != n) return "box bounds must have n entries";
  if (qp.A_eq.cols() != n || qp.A_eq.rows() != qp.b_eq.size()) return "equality system shape mismatch";
  if (qp.A_in.cols() != n || qp.A_in.rows() != qp.b_in.size()) return "inequality system shape mismatch";
  if (!qp.in_tags.empty() && static_cast<Index>(qp.in_tags.size()) != qp.A_in.rows())
    return "inequality tags must match inequality rows";
  for (Index k = 0; k < n; ++k) {
    if (!std::isfinite(qp.lb(k)) || !std::isfinite(qp.ub(k))) return "box bounds must be finite";
    if (qp.lb(k) > qp.ub(k)) return "lb must not exceed ub";
  }
  if (n > 0) {
    if ((qp.Q - qp.Q.transpose()).cwiseAbs().maxCoeff() > psd_tol) return "Q must be symmetric";
    Eigen::SelfAdjointEigenSolver<Matrix> eig(qp.Q, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -psd_tol) return "Q must be positive semidefinite";
  }
  return {};
}

struct QpSettings {
  double tol = 1e-8;
  int max_iterations = 200;
  bool phase_one_on_failure = true;
  // accept the best iterate within this factor of tol once steps collapse
  double acceptable_factor = 1e3;
};

namespace detail {

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// Range of row'x over the box.
inline std::pair<double, double> row_range(const Eigen::Ref<const Vector>& row, const Vector& lb, const Vector& ub) {
  double lo = 0.0, hi = 0.0;
  for (Index k = 0; k < row.size(); ++k) {
    const double a = row(k) * lb(k), b = row(k) * ub(k);
    lo += std::min(a, b);
    hi += std::max(a, b);
  }
  return {lo, hi};
}

inline PrimalDualSolution interior_point(const QpStandardForm& qp, const QpSettings& settings) {
  const Index n = qp.n();
  const Index m_eq = qp.A_eq.rows();
  const Index m_in = qp.A_in.rows();
  const Index m = m_in + 2 * n;  // stacked G = [A_in; I; -I]

  PrimalDualSolution out;
  // h - Gx
  auto slack_of = [&](const Vector& x) {
    Vector s(m);
    s.head(m_in) = qp.b_in - qp.A_in * x;
    s.segment(m_in, n) = qp.ub - x;
    s.tail(n) = x - qp.lb;
    return s;
  };
  auto G_times = [&](const Vector& v) {
    Vector r(m);
    r.head(m_in) = qp.A_in * v;
    r.segment(m_in, n) = v;
    r.tail(n) = -v;
    return r;
  };
  auto Gt_times = [&](const Vector& w) -> Vector {
    return qp.A_in.transpose() * w.head(m_in) + w.segment(m_in, n) - w.tail(n);
  };
  auto pack = [&](const Vector& x, const Vector& y, const Vector& z, PrimalDualSolution& sol) {
    sol.x = x;
    sol.y_eq = y;
    sol.y_in = z.head(m_in);
    sol.z_ub = z.segment(m_in, n);
    sol.z_lb = z.tail(n);
    sol.objective = qp.objective(x);
    sol.dual_objective = dual_objective(qp, sol);
    sol.kkt_residual = kkt_residuals(qp, sol).max();
  };

  Vector x = 0.5 * (qp.lb + qp.ub);
  Vector y = Vector::Zero(m_eq);
  Vector s = slack_of(x).cwiseMax(1.0);
  Vector z = Vector::Ones(m);

  // Start multipliers on the scale of the objective gradient.
  const double scale = std::max(1.0, inf_norm(qp.Q * x + qp.c));
  z *= scale;

  const Vector h = [&] {
    Vector v(m);
    v << qp.b_in, qp.ub, -qp.lb;
    return v;
  }();

  Eigen::LLT<Matrix> llt;
  Eigen::PartialPivLU<Matrix> kkt_lu;
  Matrix H(n, n);
  Matrix K;

  const double grad_scale = std::max(1.0, inf_norm(qp.c));
  PrimalDualSolution best;
  double best_merit = std::numeric_limits<double>::infinity();
  int stalled = 0;
  int since_best = 0;

  for (int it = 0; it <= settings.max_iterations; ++it) {
    out.iterations = it;
    if (!x.allFinite() || !z.allFinite() || !y.allFinite()) {
      out.status = QpStatus::numerical_error;
      out.message = "non-finite iterate";
      return out;
    }
    pack(x, y, z, out);
    // stationarity and gap are judged relative to the data scale
    const auto res = kkt_residuals(qp, out);
    const double merit = std::max({res.stationarity / grad_scale, res.primal_feasibility, res.dual_feasibility,
                                   res.complementarity, out.duality_gap() / std::max(grad_scale, std::abs(out.objective))});
    if (merit <= settings.tol) {
      out.status = QpStatus::optimal;
      return out;
    }
    if (merit < best_merit) {
      best_merit = merit;
      best = out;
      since_best = 0;
    } else if (++since_best >= 8) {
      stalled = 3;  // rounding has taken over
    }
    if (it == settings.max_iterations || stalled >= 3) break;

    const Vector rd = qp.Q * x + qp.c + qp.A_eq.transpose() * y + Gt_times(z);
    const Vector rp = qp.A_eq * x - qp.b_eq;
    const Vector rg = G_times(x) + s - h;
    const double mu = s.dot(z) / static_cast<double>(m);

    const Vector w = z.cwiseQuotient(s);
    H = qp.Q;
    H.noalias() += qp.A_in.transpose() * w.head(m_in).asDiagonal() * qp.A_in;
    H.diagonal() += w.segment(m_in, n) + w.tail(n);
    if (m_eq == 0) {
      llt.compute(H);
      if (llt.info() != Eigen::Success) {
        H.diagonal().array() += 1e-12 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
        llt.compute(H);
        if (llt.info() != Eigen::Success) {
          out.status = QpStatus::numerical_error;
          out.message = "reduced KKT matrix factorization failed";
          return out;
        }
      }
    } else {
      // augmented system [H A'; A -delta I]; small enough to factor densely
      K.setZero(n + m_eq, n + m_eq);
      K.topLeftCorner(n, n) = H;
      K.topRightCorner(n, m_eq) = qp.A_eq.transpose();
      K.bottomLeftCorner(m_eq, n) = qp.A_eq;
      K.bottomRightCorner(m_eq, m_eq).diagonal().setConstant(-1e-13);
      kkt_lu.compute(K);
      K.bottomRightCorner(m_eq, m_eq).setZero();
    }

    // Newton direction for a given complementarity residual r_sz.
    auto direction = [&](const Vector& r_sz, Vector& dx, Vector& dy, Vector& dz, Vector& ds) {
      const Vector tmp = (z.cwiseProduct(rg) - r_sz).cwiseQuotient(s);
      const Vector rhs = -rd - Gt_times(tmp);
      if (m_eq > 0) {
        Vector r(n + m_eq);
        r << rhs, -rp;
        Vector d = kkt_lu.solve(r);
        for (int pass = 0; pass < 2; ++pass) d += kkt_lu.solve(r - K * d);
        dx = d.head(n);
        dy = d.tail(m_eq);
      } else {
        dy = Vector::Zero(0);
        dx = llt.solve(rhs);
      }
      const Vector Gdx = G_times(dx);
      dz = w.cwiseProduct(Gdx) + tmp;
      ds = -rg - Gdx;
    };
    auto max_step = [](const Vector& v, const Vector& dv) {
      double a = 1.0;
      for (Index k = 0; k < v.size(); ++k)
        if (dv(k) < 0.0) a = std::min(a, -v(k) / dv(k));
      return a;
    };

    Vector dx, dy, dz, ds;
    direction(s.cwiseProduct(z), dx, dy, dz, ds);
    const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(m);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    const Vector r_sz = s.cwiseProduct(z) + ds.cwiseProduct(dz) - Vector::Constant(m, sigma * mu);
    direction(r_sz, dx, dy, dz, ds);
    const double alpha = std::min(1.0, 0.995 * std::min(max_step(s, ds), max_step(z, dz)));

    if (!(dx.allFinite() && dy.allFinite() && dz.allFinite() && ds.allFinite() && std::isfinite(alpha))) {
      stalled = 3;
      continue;  // re-enters with the same iterate and leaves through the best-iterate exit
    }
    stalled = alpha < 1e-10 ? stalled + 1 : 0;
    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    // Keep the slack consistent with the box when the step lands exactly.
    s = s.cwiseMax(std::numeric_limits<double>::min());
    z = z.cwiseMax(std::numeric_limits<double>::min());
  }
  const int used = out.iterations;
  if (best_merit < std::numeric_limits<double>::infinity()) out = best;
  out.iterations = used;
  if (stalled >= 3 && best_merit <= settings.acceptable_factor * settings.tol) {
    // conditioning ended progress just short of tol; the best iterate stands
    out.status = QpStatus::optimal;
    out.message = "reduced accuracy: scaled residual " + detail::sci(best_merit);
    return out;
  }
  out.status = stalled >= 3 ? QpStatus::numerical_error : QpStatus::max_iterations;
  out.message = (stalled >= 3 ? "step length collapsed after " : "no KKT point within ") + std::to_string(used) +
                " iterations; best scaled residual " + detail::sci(best_merit);
  return out;
}

/// Elastic feasibility problem: minimize total violation of the linear rows
/// while keeping the box hard. Its optimum is zero iff the region is nonempty.
inline QpStandardForm phase_one_form(const QpStandardForm& qp) {
  const Index n = qp.n();
  const Index m_in = qp.A_in.rows();
  const Index m_eq = qp.A_eq.rows();
  const Index total = n + m_in + 2 * m_eq;
  Vector lb = Vector::Zero(total), ub = Vector::Zero(total);
  lb.head(n) = qp.lb;
  ub.head(n) = qp.ub;
  for (Index k = 0; k < m_in; ++k) {
    const auto [lo, hi] = row_range(qp.A_in.row(k).transpose(), qp.lb, qp.ub);
    ub(n + k) = std::max(0.0, hi - qp.b_in(k)) + 1.0;
  }
  for (Index k = 0; k < m_eq; ++k) {
    const auto [lo, hi] = row_range(qp.A_eq.row(k).transpose(), qp.lb, qp.ub);
    const double bound = std::max(std::abs(hi - qp.b_eq(k)), std::abs(lo - qp.b_eq(k))) + 1.0;
    ub(n + m_in + k) = bound;
    ub(n + m_in + m_eq + k) = bound;
  }
  auto f = QpStandardForm::with_box(lb, ub);
  f.c.tail(total - n).setOnes();
  if (m_in > 0) {
    Matrix rows = Matrix::Zero(m_in, total);
    rows.leftCols(n) = qp.A_in;
    rows.block(0, n, m_in, m_in) = -Matrix::Identity(m_in, m_in);
    f.add_inequalities(rows, qp.b_in, RowTag::elastic);
  }
  if (m_eq > 0) {
    Matrix rows = Matrix::Zero(m_eq, total);
    rows.leftCols(n) = qp.A_eq;
    rows.block(0, n + m_in, m_eq, m_eq) = Matrix::Identity(m_eq, m_eq);
    rows.block(0, n + m_in + m_eq, m_eq, m_eq) = -Matrix::Identity(m_eq, m_eq);
    f.add_equalities(rows, qp.b_eq);
  }
  return f;
}

}  // namespace detail

/// Minimum total violation of the linear rows over the box (0 when feasible).
inline PrimalDualSolution solve_phase_one(const QpStandardForm& qp, double tol = 1e-9) {
  QpSettings s;
  s.tol = tol;
  s.phase_one_on_failure = false;
  return detail::interior_point(detail::phase_one_form(qp), s);
}

inline PrimalDualSolution solve_qp(const QpStandardForm& qp, const QpSettings& settings = {}) {
  if (auto why = check_form(qp); !why.empty()) {
    PrimalDualSolution bad;
    bad.status = QpStatus::invalid_input;
    bad.message = why;
    return bad;
  }
  PrimalDualSolution sol = detail::interior_point(qp, settings);
  if (sol.ok() || !settings.phase_one_on_failure) return sol;

  // Distinguish an empty region from a numerical breakdown.
  const PrimalDualSolution feas = solve_phase_one(qp);
  const double threshold = 1e-7 * (1.0 + inf_norm(qp.b_in) + inf_norm(qp.b_eq));
  if (feas.ok() && feas.objective > threshold) {
    sol.status = QpStatus::infeasible;
    sol.message = "feasible region is empty (minimum total violation " + std::to_string(feas.objective) + ")";
  } else if (!sol.message.empty()) {
    sol.message += " after " + std::to_string(sol.iterations) + " iterations";
  }
  return sol;
}

inline PrimalDualSolution solve_qp(const QpStandardForm& qp, double tol) {
  QpSettings s;
  s.tol = tol;
  return solve_qp(qp, s);
}

}  // namespace rsdd

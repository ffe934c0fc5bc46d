#include "synthtx/qp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "synthtx/kernel.hpp"

namespace synthtx {

namespace {

constexpr double kStepTol = 1e-12;
constexpr double kDualTol = 1e-9;
constexpr double kActiveTol = 1e-10;

struct Constraints {
  MatrixXd E;  // equalities E x = f
  VectorXd f;
  MatrixXd G;  // inequalities G x >= h (bounds expanded into rows)
  VectorXd h;
};

Constraints assemble(const QpProblem& p) {
  const long n = p.q.rows();
  Constraints cs;
  cs.E = p.eq_lhs.size() ? p.eq_lhs : MatrixXd(0, n);
  cs.f = p.eq_rhs.size() ? p.eq_rhs : VectorXd(0);
  long rows = p.ineq_lhs.rows() + (p.lower_bounds ? n : 0);
  cs.G.resize(rows, n);
  cs.h.resize(rows);
  long r = 0;
  if (p.lower_bounds) {
    if (p.lower_bounds->size() != n) fail(Error::Kind::shape, "qp: lower_bounds length mismatch");
    for (long k = 0; k < n; ++k, ++r) {
      cs.G.row(r).setZero();
      cs.G(r, k) = 1.0;
      cs.h[r] = (*p.lower_bounds)[k];
    }
  }
  if (p.ineq_lhs.rows()) {
    if (p.ineq_lhs.cols() != n || p.ineq_rhs.size() != p.ineq_lhs.rows())
      fail(Error::Kind::shape, "qp: inequality block dimensions mismatch");
    cs.G.middleRows(r, p.ineq_lhs.rows()) = p.ineq_lhs;
    cs.h.segment(r, p.ineq_rhs.size()) = p.ineq_rhs;
  }
  return cs;
}

double max_violation(const Constraints& cs, const VectorXd& x) {
  double v = 0.0;
  if (cs.E.rows()) v = (cs.E * x - cs.f).cwiseAbs().maxCoeff();
  if (cs.G.rows()) v = std::max(v, (cs.h - cs.G * x).maxCoeff());
  return v;
}

// Direction subproblem: minimize the quadratic from x along p with A_act p = 0.
// Null-space solve; the reduced Hessian gets a jitter retry when singular.
VectorXd solve_direction(const MatrixXd& q, const VectorXd& grad, const MatrixXd& A_act) {
  const long n = q.rows();
  MatrixXd Z;
  if (A_act.rows() == 0) {
    Z = MatrixXd::Identity(n, n);
  } else {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A_act.transpose());
    const long r = qr.rank();
    if (r >= n) return VectorXd::Zero(n);
    MatrixXd Q = qr.householderQ();
    Z = Q.rightCols(n - r);
  }
  MatrixXd Hz = Z.transpose() * (2.0 * q) * Z;
  Hz = 0.5 * (Hz + Hz.transpose());
  VectorXd gz = Z.transpose() * grad;
  Eigen::LLT<MatrixXd> llt;
  const double base = std::max(Hz.trace() / static_cast<double>(Hz.rows()), 1.0);
  llt.compute(Hz);
  if (llt.info() != Eigen::Success) {
    MatrixXd Hj = Hz;
    Hj.diagonal().array() += 1e-12 * base;
    llt.compute(Hj);
    if (llt.info() != Eigen::Success) {
      Hj.diagonal().array() += 1e-8 * base;
      llt.compute(Hj);
      if (llt.info() != Eigen::Success)
        fail(Error::Kind::numeric, "qp: reduced Hessian factorization failed");
    }
  }
  return -(Z * llt.solve(gz));
}

QpSolution active_set_solve(const MatrixXd& q, const VectorXd& c, const Constraints& cs,
                            const VectorXd& x0) {
  const long n = q.rows();
  const long me = cs.E.rows();
  const long mi = cs.G.rows();
  VectorXd x = x0;
  const double hscale = mi ? std::max(1.0, cs.h.cwiseAbs().maxCoeff()) : 1.0;

  std::vector<char> active(static_cast<std::size_t>(mi), 0);
  if (mi) {
    VectorXd slack = cs.G * x - cs.h;
    for (long i = 0; i < mi; ++i)
      if (slack[i] <= kActiveTol * hscale) active[static_cast<std::size_t>(i)] = 1;
  }

  const int cap = std::max<long>(100 * n, 200);
  QpSolution sol;
  for (int pivot = 0; pivot <= cap; ++pivot) {
    sol.pivots = pivot;
    std::vector<long> wset;
    for (long i = 0; i < mi; ++i)
      if (active[static_cast<std::size_t>(i)]) wset.push_back(i);
    MatrixXd A_act(me + static_cast<long>(wset.size()), n);
    if (me) A_act.topRows(me) = cs.E;
    for (std::size_t k = 0; k < wset.size(); ++k)
      A_act.row(me + static_cast<long>(k)) = cs.G.row(wset[k]);

    VectorXd grad = 2.0 * (q * x - c);
    VectorXd p = solve_direction(q, grad, A_act);

    if (p.cwiseAbs().maxCoeff() <= kStepTol * (1.0 + x.cwiseAbs().maxCoeff())) {
      VectorXd lambda;
      if (A_act.rows()) {
        Eigen::ColPivHouseholderQR<MatrixXd> qr(A_act.transpose());
        lambda = qr.solve(grad);
      } else {
        lambda.resize(0);
      }
      long worst = -1;
      double worst_val = -kDualTol * (1.0 + grad.cwiseAbs().maxCoeff());
      for (std::size_t k = 0; k < wset.size(); ++k) {
        const double lk = lambda[me + static_cast<long>(k)];
        if (lk < worst_val) {
          worst_val = lk;
          worst = wset[k];
        }
      }
      if (worst < 0) {
        sol.x = x;
        sol.objective = x.dot(q * x) - 2.0 * x.dot(c);
        VectorXd resid = grad;
        if (A_act.rows()) resid -= A_act.transpose() * lambda;
        sol.stationarity = resid.size() ? resid.cwiseAbs().maxCoeff() : 0.0;
        sol.feasibility = max_violation(cs, x);
        double comp = 0.0;
        for (std::size_t k = 0; k < wset.size(); ++k) {
          const double slack = cs.G.row(wset[k]).dot(x) - cs.h[wset[k]];
          comp = std::max(comp, std::fabs(lambda[me + static_cast<long>(k)] * slack));
        }
        sol.complementarity = comp;
        return sol;
      }
      active[static_cast<std::size_t>(worst)] = 0;
      continue;
    }

    double alpha = 1.0;
    long blocker = -1;
    for (long i = 0; i < mi; ++i) {
      if (active[static_cast<std::size_t>(i)]) continue;
      const double gp = cs.G.row(i).dot(p);
      if (gp >= -1e-14) continue;
      const double slack = cs.G.row(i).dot(x) - cs.h[i];
      const double a = std::max(0.0, slack / (-gp));
      if (a < alpha) {  // strict: first (lowest) index wins ties
        alpha = a;
        blocker = i;
      }
    }
    if (!p.allFinite()) fail(Error::Kind::numeric, "qp: non-finite search direction");
    x += alpha * p;
    if (blocker >= 0) active[static_cast<std::size_t>(blocker)] = 1;
  }
  fail(Error::Kind::solver,
       "qp: active-set iteration cap reached; feasibility violation " +
           format_double(max_violation(cs, x)));
}

// Feasible point for equality + bound constraints: least-norm equality
// solution, then (if bounds are violated) a bounds-constrained least-squares
// pass on ||Ex - f||^2.
VectorXd find_feasible(const QpProblem& p, const Constraints& cs) {
  const long n = p.q.rows();
  VectorXd x = VectorXd::Zero(n);
  if (p.lower_bounds) x = x.cwiseMax(*p.lower_bounds);
  if (cs.E.rows()) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(cs.E);
    VectorXd xe = qr.solve(cs.f);
    if ((cs.E * xe - cs.f).cwiseAbs().maxCoeff() >
        1e-8 * (1.0 + cs.f.cwiseAbs().maxCoeff()))
      fail(Error::Kind::feasibility, "qp: equality constraints are inconsistent");
    x = xe;
  }
  if (max_violation(cs, x) <= 1e-9) return x;
  if (p.ineq_lhs.rows())
    fail(Error::Kind::feasibility,
         "qp: problems with general inequality rows need a feasible starting point");
  if (!p.lower_bounds) return x;
  // Phase 1: min ||Ex - f||^2 subject to x >= lb, started at a bound-feasible point.
  QpProblem ph;
  ph.q = cs.E.transpose() * cs.E;
  ph.c = cs.E.transpose() * cs.f;
  ph.lower_bounds = *p.lower_bounds;
  ph.start = x.cwiseMax(*p.lower_bounds);
  QpSolution s = solve_general_qp(ph);
  if ((cs.E * s.x - cs.f).cwiseAbs().maxCoeff() > 1e-7 * (1.0 + cs.f.cwiseAbs().maxCoeff()))
    fail(Error::Kind::feasibility, "qp: feasible set appears empty (phase-1 residual too large)");
  return s.x;
}

}  // namespace

QpSolution solve_general_qp(const QpProblem& p) {
  const long n = p.q.rows();
  if (n == 0 || p.q.cols() != n) fail(Error::Kind::shape, "qp: q must be square and nonempty");
  if (p.c.size() != n) fail(Error::Kind::shape, "qp: c length mismatch");
  const double qs = std::max(1.0, p.q.cwiseAbs().maxCoeff());
  if ((p.q - p.q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * qs)
    fail(Error::Kind::input, "qp: q must be symmetric");
  if (p.eq_lhs.rows() != p.eq_rhs.size())
    fail(Error::Kind::shape, "qp: equality block dimensions mismatch");
  if (p.eq_lhs.rows() && p.eq_lhs.cols() != n)
    fail(Error::Kind::shape, "qp: eq_lhs column count mismatch");

  Constraints cs = assemble(p);
  const double fscale = 1.0 + (cs.f.size() ? cs.f.cwiseAbs().maxCoeff() : 0.0);
  VectorXd x0;
  if (p.start) {
    if (p.start->size() != n) fail(Error::Kind::shape, "qp: start length mismatch");
    x0 = *p.start;
    if (max_violation(cs, x0) > 1e-8 * fscale) x0 = find_feasible(p, cs);
  } else {
    x0 = find_feasible(p, cs);
  }
  return active_set_solve(p.q, p.c, cs, x0);
}

QpSolution solve_simplex_qp_full(const Eigen::Ref<const MatrixXd>& q,
                                 const Eigen::Ref<const VectorXd>& c) {
  const long n = q.rows();
  QpProblem p;
  p.q = q;
  p.c = c;
  p.eq_lhs = MatrixXd::Ones(1, n);
  p.eq_rhs = VectorXd::Ones(1);
  p.lower_bounds = VectorXd::Zero(n);
  p.start = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  return solve_general_qp(p);
}

VectorXd solve_simplex_qp(const Eigen::Ref<const MatrixXd>& q,
                          const Eigen::Ref<const VectorXd>& c) {
  return solve_simplex_qp_full(q, c).x;
}

}  // namespace synthtx

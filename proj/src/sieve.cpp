#include "synthtx/sieve.hpp"

#include <algorithm>
#include <cmath>

namespace synthtx {

BSplineBasis::BSplineBasis(int order, std::vector<double> interior_knots, double lo, double hi)
    : order_(order), lo_(lo), hi_(hi), interior_(std::move(interior_knots)) {
  if (order_ < 1) fail(Error::Kind::domain, "BSplineBasis: order must be >= 1");
  if (!(lo_ < hi_)) fail(Error::Kind::domain, "BSplineBasis: need lo < hi");
  if (!std::is_sorted(interior_.begin(), interior_.end()))
    fail(Error::Kind::domain, "BSplineBasis: interior knots must be sorted");
  for (double t : interior_)
    if (!(t > lo_ && t < hi_))
      fail(Error::Kind::domain, "BSplineBasis: interior knots must lie strictly inside (lo, hi)");
  dim_ = order_ + static_cast<int>(interior_.size());
  knots_.assign(static_cast<std::size_t>(order_), lo_);
  knots_.insert(knots_.end(), interior_.begin(), interior_.end());
  knots_.insert(knots_.end(), static_cast<std::size_t>(order_), hi_);
}

BSplineBasis BSplineBasis::from_quantiles(int order, int n_interior,
                                          const Eigen::Ref<const VectorXd>& sample, double lo,
                                          double hi) {
  std::vector<double> ks;
  if (n_interior > 0) {
    std::vector<double> sorted(sample.data(), sample.data() + sample.size());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.empty()) fail(Error::Kind::input, "BSplineBasis: empty quantile sample");
    for (int k = 1; k <= n_interior; ++k) {
      const double q = static_cast<double>(k) / (n_interior + 1);
      const double pos = q * static_cast<double>(sorted.size() - 1);
      const auto i0 = static_cast<std::size_t>(std::floor(pos));
      const auto i1 = std::min(i0 + 1, sorted.size() - 1);
      double t = sorted[i0] + (pos - static_cast<double>(i0)) * (sorted[i1] - sorted[i0]);
      t = std::min(std::max(t, std::nextafter(lo, hi)), std::nextafter(hi, lo));
      ks.push_back(t);
    }
    std::sort(ks.begin(), ks.end());
  }
  return BSplineBasis(order, std::move(ks), lo, hi);
}

bool BSplineBasis::same_as(const BSplineBasis& other) const {
  return order_ == other.order_ && lo_ == other.lo_ && hi_ == other.hi_ &&
         interior_ == other.interior_;
}

// Cox-de Boor on the clamped knot vector.
VectorXd BSplineBasis::eval(double x) const {
  if (dim_ == 0) fail(Error::Kind::input, "BSplineBasis: not initialized");
  x = std::min(std::max(x, lo_), hi_);
  const int k = order_;
  const auto& t = knots_;
  const int nb = dim_;
  // interval index mu with t[mu] <= x < t[mu+1]; the right endpoint maps to
  // the last nonempty interval.
  int mu = k - 1;
  while (mu + 1 < nb && x >= t[static_cast<std::size_t>(mu + 1)]) ++mu;
  VectorXd b = VectorXd::Zero(nb);
  b[mu] = 1.0;
  for (int deg = 1; deg < k; ++deg) {
    // raise degree over the active window [mu-deg, mu]
    for (int i = std::max(0, mu - deg); i <= mu; ++i) {
      const double ti = t[static_cast<std::size_t>(i)];
      const double ti_d = t[static_cast<std::size_t>(i + deg)];
      const double ti1 = t[static_cast<std::size_t>(i + 1)];
      const double ti1_d = t[static_cast<std::size_t>(i + deg + 1)];
      double left = 0.0, right = 0.0;
      if (ti_d > ti) left = (x - ti) / (ti_d - ti) * b[i];
      if (i + 1 <= mu && ti1_d > ti1) right = (ti1_d - x) / (ti1_d - ti1) * b[i + 1];
      b[i] = left + right;
    }
  }
  return b;
}

MatrixXd BSplineBasis::eval_rows(const Eigen::Ref<const VectorXd>& xs, long* clamped) const {
  MatrixXd out(xs.size(), dim_);
  long nclamp = 0;
  for (long i = 0; i < xs.size(); ++i) {
    if (xs[i] < lo_ || xs[i] > hi_) ++nclamp;
    out.row(i) = eval(xs[i]).transpose();
  }
  if (clamped) *clamped += nclamp;
  return out;
}

VectorXd eval_basis(const BSplineBasis& basis, double x) { return basis.eval(x); }

MatrixXd build_block_design(const std::vector<BSplineBasis>& bases, double x) {
  if (bases.empty()) fail(Error::Kind::input, "build_block_design: no bases");
  long total = 0;
  for (const auto& b : bases) total += b.dim();
  MatrixXd V = MatrixXd::Zero(total, static_cast<long>(bases.size()));
  long off = 0;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    V.block(off, static_cast<long>(i), bases[i].dim(), 1) = bases[i].eval(x);
    off += bases[i].dim();
  }
  return V;
}

VectorXd SieveWeightModel::eval(double x) const {
  VectorXd w(static_cast<long>(bases.size()));
  long off = 0;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    w[static_cast<long>(i)] = bases[i].eval(x).dot(beta_w.segment(off, bases[i].dim()));
    off += bases[i].dim();
  }
  return w;
}

MatrixXd SieveWeightModel::eval_rows(const Eigen::Ref<const VectorXd>& xs) const {
  MatrixXd W(xs.size(), static_cast<long>(bases.size()));
  for (long r = 0; r < xs.size(); ++r) W.row(r) = eval(xs[r]).transpose();
  return W;
}

double SieveRegressionModel::eval(double x) const { return basis.eval(x).dot(beta_g); }

VectorXd SieveRegressionModel::eval_rows(const Eigen::Ref<const VectorXd>& xs) const {
  return basis.eval_rows(xs) * beta_g;
}

double eval_weights_sum(const SieveWeightModel& model, double x) { return model.eval(x).sum(); }

static void aggregate_objective(const CmmdTable& table, const std::vector<BSplineBasis>& bases,
                                MatrixXd& Q, VectorXd& c) {
  const int N = static_cast<int>(bases.size());
  const long np = table.size();
  long total = 0;
  std::vector<long> offs;
  for (const auto& b : bases) {
    offs.push_back(total);
    total += b.dim();
  }
  Q = MatrixXd::Zero(total, total);
  c = VectorXd::Zero(total);
  // per-population basis rows at the table points
  std::vector<MatrixXd> B(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i)
    B[static_cast<std::size_t>(i)] = bases[static_cast<std::size_t>(i)].eval_rows(
        table.points.col(0));
  for (long p = 0; p < np; ++p) {
    const MatrixXd& A = table.a_hat[static_cast<std::size_t>(p)];
    for (int i = 0; i < N; ++i) {
      const auto bi = B[static_cast<std::size_t>(i)].row(p);
      for (int j = 0; j < N; ++j) {
        const auto bj = B[static_cast<std::size_t>(j)].row(p);
        Q.block(offs[static_cast<std::size_t>(i)], offs[static_cast<std::size_t>(j)],
                bi.size(), bj.size())
            .noalias() += A(i, j) * bi.transpose() * bj;
      }
      c.segment(offs[static_cast<std::size_t>(i)], bi.size()).noalias() +=
          table.b_hat(p, i) * bi.transpose();
    }
  }
  Q /= static_cast<double>(np);
  c /= static_cast<double>(np);
  Q = 0.5 * (Q + Q.transpose());
}

SieveWeightModel fit_sieve_weights(const CmmdTable& table, const std::vector<BSplineBasis>& bases,
                                   const SieveWeightOptions& opt) {
  if (table.size() == 0) fail(Error::Kind::input, "fit_sieve_weights: empty point set");
  if (table.points.cols() != 1)
    fail(Error::Kind::input,
         "fit_sieve_weights: sieve weights require a 1-D covariate; use pointwise weights for "
         "multivariate covariates");
  const int N = static_cast<int>(bases.size());
  if (N != table.b_hat.cols())
    fail(Error::Kind::shape, "fit_sieve_weights: one basis per source population required");
  MatrixXd Q;
  VectorXd c;
  aggregate_objective(table, bases, Q, c);
  const long total = Q.rows();

  SieveWeightModel model;
  model.bases = bases;
  model.constrained = opt.constrained;

  if (!opt.constrained) {
    MatrixXd Qr = Q;
    Qr.diagonal().array() += opt.ridge;
    Eigen::LDLT<MatrixXd> ldlt(Qr);
    const double dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-12 * dmax)
      fail(Error::Kind::singular,
           "fit_sieve_weights: aggregate quadratic is rank deficient; set a positive ridge");
    model.beta_w = ldlt.solve(c);
    return model;
  }

  for (int i = 1; i < N; ++i)
    if (!bases[static_cast<std::size_t>(i)].same_as(bases[0]))
      fail(Error::Kind::config,
           "fit_sieve_weights: constrained fit requires identical bases across populations");
  const int s = bases[0].dim();
  MatrixXd Aeq = MatrixXd::Zero(s, total);
  for (int k = 0; k < s; ++k)
    for (int i = 0; i < N; ++i) Aeq(k, static_cast<long>(i) * s + k) = 1.0;

  QpProblem qp;
  qp.q = Q;
  qp.c = c;
  qp.eq_lhs = Aeq;
  qp.eq_rhs = VectorXd::Ones(s);
  qp.start = VectorXd::Constant(total, 1.0 / static_cast<double>(N));
  if (opt.style == SimplexStyle::coefficients) {
    qp.lower_bounds = VectorXd::Zero(total);
  } else {
    // nonnegativity of w_i at each observed point only
    const long np = table.size();
    MatrixXd G = MatrixXd::Zero(static_cast<long>(N) * np, total);
    for (int i = 0; i < N; ++i) {
      const MatrixXd Bi = bases[static_cast<std::size_t>(i)].eval_rows(table.points.col(0));
      G.block(static_cast<long>(i) * np, static_cast<long>(i) * s, np, s) = Bi;
    }
    qp.ineq_lhs = G;
    qp.ineq_rhs = VectorXd::Zero(static_cast<long>(N) * np);
  }
  model.beta_w = solve_general_qp(qp).x;
  return model;
}

SieveWeightModel fit_sieve_weights(const std::vector<const CmeModel*>& sources,
                                   const CmeModel& target,
                                   const Eigen::Ref<const VectorXd>& target_x,
                                   const std::vector<BSplineBasis>& bases, bool constrained) {
  if (target_x.size() == 0) fail(Error::Kind::input, "fit_sieve_weights: empty target point set");
  CmmdTable table = cmmd_components_batch(sources, target, MatrixXd(target_x), 1);
  SieveWeightOptions opt;
  opt.constrained = constrained;
  return fit_sieve_weights(table, bases, opt);
}

double average_cmmd_rows(const CmmdTable& table, const Eigen::Ref<const MatrixXd>& weights_rows) {
  const long np = table.size();
  if (weights_rows.rows() != np)
    fail(Error::Kind::shape, "average_cmmd_rows: weight row count mismatch");
  std::vector<double> vals(static_cast<std::size_t>(np));
  for (long p = 0; p < np; ++p) {
    const VectorXd w = weights_rows.row(p).transpose();
    vals[static_cast<std::size_t>(p)] = w.dot(table.a_hat[static_cast<std::size_t>(p)] * w) -
                                        2.0 * w.dot(table.b_hat.row(p).transpose()) +
                                        table.c_hat[p];
  }
  return pairwise_mean(vals);
}

double average_cmmd(const CmmdTable& table, const SieveWeightModel& model) {
  return average_cmmd_rows(table, model.eval_rows(table.points.col(0)));
}

SieveRegressionModel fit_sieve_regression(const Eigen::Ref<const VectorXd>& x,
                                          const Eigen::Ref<const VectorXd>& y,
                                          const BSplineBasis& basis, int population_id) {
  if (x.size() != y.size()) fail(Error::Kind::shape, "fit_sieve_regression: x/y length mismatch");
  if (x.size() < basis.dim())
    fail(Error::Kind::input,
         "fit_sieve_regression: fewer observations than basis functions (underdetermined)");
  const MatrixXd Qm = basis.eval_rows(x);
  const MatrixXd QtQ = Qm.transpose() * Qm;
  const VectorXd Qty = Qm.transpose() * y;
  Eigen::LLT<MatrixXd> llt;
  spd_factorize(QtQ, llt, "fit_sieve_regression");
  SieveRegressionModel m;
  m.basis = basis;
  m.population_id = population_id;
  m.beta_g = llt.solve(Qty);
  if (!m.beta_g.allFinite()) fail(Error::Kind::numeric, "fit_sieve_regression: non-finite fit");
  return m;
}

}  // namespace synthtx

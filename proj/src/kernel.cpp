#include "synthtx/kernel.hpp"

#include <algorithm>
#include <cmath>

namespace synthtx {

void KernelConfig::validate() const {
  if (!(bandwidth_x > 0.0)) fail(Error::Kind::domain, "bandwidth_x must be > 0");
  if (!(bandwidth_y > 0.0)) fail(Error::Kind::domain, "bandwidth_y must be > 0");
  if (!(lambda > 0.0)) fail(Error::Kind::domain, "lambda must be > 0");
}

double gaussian_kernel(const Eigen::Ref<const VectorXd>& u, const Eigen::Ref<const VectorXd>& v,
                       double h) {
  if (u.size() != v.size()) fail(Error::Kind::shape, "gaussian_kernel: dimension mismatch");
  if (!(h > 0.0)) fail(Error::Kind::domain, "gaussian_kernel: bandwidth must be > 0");
  return std::exp(-(u - v).squaredNorm() / (2.0 * h * h));
}

double gaussian_kernel(double u, double v, double h) {
  if (!(h > 0.0)) fail(Error::Kind::domain, "gaussian_kernel: bandwidth must be > 0");
  const double d = u - v;
  return std::exp(-d * d / (2.0 * h * h));
}

MatrixXd gaussian_cross_gram(const Eigen::Ref<const MatrixXd>& X,
                             const Eigen::Ref<const MatrixXd>& Z, double h) {
  if (X.cols() != Z.cols()) fail(Error::Kind::shape, "gaussian_cross_gram: dimension mismatch");
  if (!(h > 0.0)) fail(Error::Kind::domain, "gaussian_cross_gram: bandwidth must be > 0");
  const double inv = -1.0 / (2.0 * h * h);
  MatrixXd G(X.rows(), Z.rows());
  if (X.cols() == 1) {
    const auto xc = X.col(0);
    for (long j = 0; j < Z.rows(); ++j)
      G.col(j) = ((xc.array() - Z(j, 0)).square() * inv).exp();
  } else {
    for (long j = 0; j < Z.rows(); ++j)
      G.col(j) = ((X.rowwise() - Z.row(j)).rowwise().squaredNorm().array() * inv).exp();
  }
  return G;
}

MatrixXd gaussian_cross_gram(const Eigen::Ref<const VectorXd>& a,
                             const Eigen::Ref<const VectorXd>& b, double h) {
  return gaussian_cross_gram(MatrixXd(a), MatrixXd(b), h);
}

static double median_of_pair_distances(const MatrixXd& P) {
  const long n = P.rows();
  if (n < 2) fail(Error::Kind::input, "median_heuristic: need at least 2 points");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j) d.push_back((P.row(i) - P.row(j)).norm());
  std::vector<double>::iterator mid = d.begin() + static_cast<long>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (d.size() % 2 == 0) {
    // lower middle is the max of the first half after partitioning
    double lower = *std::max_element(d.begin(), mid);
    med = 0.5 * (lower + med);
  }
  if (!(med > 0.0)) fail(Error::Kind::degenerate_data, "median_heuristic: all points identical");
  return med;
}

double median_heuristic(const Eigen::Ref<const MatrixXd>& points_rows) {
  return median_of_pair_distances(points_rows);
}

double median_heuristic(const std::vector<VectorXd>& points) {
  if (points.size() < 2) fail(Error::Kind::input, "median_heuristic: need at least 2 points");
  MatrixXd P(static_cast<long>(points.size()), points[0].size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != P.cols()) fail(Error::Kind::shape, "median_heuristic: mixed dims");
    P.row(static_cast<long>(i)) = points[i].transpose();
  }
  return median_of_pair_distances(P);
}

double median_heuristic_capped(const Eigen::Ref<const MatrixXd>& points_rows, long cap) {
  const long n = points_rows.rows();
  if (n <= cap) return median_of_pair_distances(points_rows);
  MatrixXd sub(cap, points_rows.cols());
  for (long i = 0; i < cap; ++i) {
    const long idx = (i * (n - 1)) / (cap - 1);
    sub.row(i) = points_rows.row(idx);
  }
  return median_of_pair_distances(sub);
}

double spd_factorize(const MatrixXd& A, Eigen::LLT<MatrixXd>& llt, const char* what) {
  if (!A.allFinite()) fail(Error::Kind::numeric, std::string(what) + ": non-finite matrix");
  llt.compute(A);
  if (llt.info() == Eigen::Success) return 0.0;
  const double jitter = 1e-10 * A.trace() / static_cast<double>(A.rows());
  MatrixXd Aj = A;
  Aj.diagonal().array() += jitter;
  llt.compute(Aj);
  if (llt.info() != Eigen::Success)
    fail(Error::Kind::numeric, std::string(what) + ": SPD factorization failed even with jitter");
  return jitter;
}

CmeModel fit_cme(int pop_id, const Eigen::Ref<const MatrixXd>& X,
                 const Eigen::Ref<const VectorXd>& y, const KernelConfig& config) {
  config.validate();
  if (X.rows() < 1) fail(Error::Kind::input, "fit_cme: need at least one observation");
  if (X.rows() != y.size()) fail(Error::Kind::shape, "fit_cme: X/y length mismatch");
  if (!X.allFinite() || !y.allFinite()) fail(Error::Kind::numeric, "fit_cme: non-finite inputs");
  CmeModel m;
  m.pop_id_ = pop_id;
  m.train_x_ = X;
  m.train_y_ = y;
  m.config_ = config;
  m.gram_ = gaussian_cross_gram(X, X, config.bandwidth_x);
  MatrixXd A = m.gram_;
  A.diagonal().array() += config.lambda;
  m.applied_jitter_ = spd_factorize(A, m.llt_, "fit_cme");
  return m;
}

const MatrixXd& CmeModel::m_inv() const {
  std::call_once(lazy_inv_->once, [this] {
    lazy_inv_->value = llt_.solve(MatrixXd::Identity(train_x_.rows(), train_x_.rows()));
  });
  return lazy_inv_->value;
}

VectorXd CmeModel::embedding_coefficients(const Eigen::Ref<const VectorXd>& x) const {
  if (x.size() != train_x_.cols())
    fail(Error::Kind::shape, "embedding_coefficients: covariate dimension mismatch");
  const VectorXd k = gaussian_cross_gram(train_x_, MatrixXd(x.transpose()), config_.bandwidth_x);
  return llt_.solve(k);
}

MatrixXd CmeModel::embedding_coefficients_batch(const Eigen::Ref<const MatrixXd>& points_rows) const {
  if (points_rows.cols() != train_x_.cols())
    fail(Error::Kind::shape, "embedding_coefficients_batch: covariate dimension mismatch");
  const MatrixXd K = gaussian_cross_gram(train_x_, points_rows, config_.bandwidth_x);
  return llt_.solve(K);
}

MatrixXd CmeModel::solve(const Eigen::Ref<const MatrixXd>& B) const { return llt_.solve(B); }

MatrixXd cross_outcome_gram(const CmeModel& model_i, const CmeModel& model_j) {
  if (model_i.config().bandwidth_y != model_j.config().bandwidth_y)
    fail(Error::Kind::config, "cross_outcome_gram: models must share the outcome bandwidth");
  return gaussian_cross_gram(model_i.train_y(), model_j.train_y(), model_i.config().bandwidth_y);
}

const MatrixXd& OutcomeGramCache::get(const CmeModel& model_i, const CmeModel& model_j) {
  const auto key = std::make_pair(model_i.population_id(), model_j.population_id());
  std::lock_guard<std::mutex> lk(mu_);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  auto [ins, ok] = cache_.emplace(key, cross_outcome_gram(model_i, model_j));
  return ins->second;
}

}  // namespace synthtx

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "synthtx/common.hpp"

namespace synthtx {

enum class BandwidthRule { fixed, median_heuristic };

struct KernelConfig {
  double bandwidth_x = 1.0;  // covariate length scale
  double bandwidth_y = 1.0;  // outcome length scale (shared across populations)
  double lambda = 0.01;      // ridge regularizer on the covariate Gram
  BandwidthRule rule = BandwidthRule::median_heuristic;

  void validate() const;
};

// k(u, v) = exp(-||u - v||^2 / (2 h^2))
double gaussian_kernel(const Eigen::Ref<const VectorXd>& u, const Eigen::Ref<const VectorXd>& v,
                       double h);
double gaussian_kernel(double u, double v, double h);

// Gram of the rows of X against the rows of Z. Entry arithmetic matches
// gaussian_kernel exactly.
MatrixXd gaussian_cross_gram(const Eigen::Ref<const MatrixXd>& X,
                             const Eigen::Ref<const MatrixXd>& Z, double h);
MatrixXd gaussian_cross_gram(const Eigen::Ref<const VectorXd>& a,
                             const Eigen::Ref<const VectorXd>& b, double h);

// Median of pairwise Euclidean distances over all unordered pairs.
double median_heuristic(const std::vector<VectorXd>& points);
double median_heuristic(const Eigen::Ref<const MatrixXd>& points_rows);
// Same, but computed on an evenly strided subsample of at most `cap` points
// when the input is larger (the full quadratic sweep is pointless for
// bandwidth selection on tens of thousands of points).
double median_heuristic_capped(const Eigen::Ref<const MatrixXd>& points_rows, long cap = 2000);

// Regularized conditional-mean-embedding model for one population's control
// arm: holds the training sample, the covariate Gram K, and the factorization
// of (K + lambda I). Immutable once fitted; safe to share across threads.
class CmeModel {
 public:
  int population_id() const { return pop_id_; }
  const MatrixXd& train_x() const { return train_x_; }
  const VectorXd& train_y() const { return train_y_; }
  const KernelConfig& config() const { return config_; }
  long size() const { return train_x_.rows(); }

  const MatrixXd& gram() const { return gram_; }
  // (K + lambda I)^{-1}, materialized on first use and cached.
  const MatrixXd& m_inv() const;

  // alpha(x) = (K + lambda I)^{-1} k(x); the embedding is sum_u alpha_u l(Y_u, .)
  VectorXd embedding_coefficients(const Eigen::Ref<const VectorXd>& x) const;
  // Column p holds alpha(points.row(p)).
  MatrixXd embedding_coefficients_batch(const Eigen::Ref<const MatrixXd>& points_rows) const;

  // Applies (K + lambda I)^{-1} to the columns of B.
  MatrixXd solve(const Eigen::Ref<const MatrixXd>& B) const;

  friend CmeModel fit_cme(int pop_id, const Eigen::Ref<const MatrixXd>& X,
                          const Eigen::Ref<const VectorXd>& y, const KernelConfig& config);

 private:
  struct LazyInverse {
    std::once_flag once;
    MatrixXd value;
  };

  int pop_id_ = 0;
  MatrixXd train_x_;
  VectorXd train_y_;
  KernelConfig config_;
  MatrixXd gram_;
  Eigen::LLT<MatrixXd> llt_;
  double applied_jitter_ = 0.0;
  mutable std::unique_ptr<LazyInverse> lazy_inv_ = std::make_unique<LazyInverse>();
};

CmeModel fit_cme(int pop_id, const Eigen::Ref<const MatrixXd>& X,
                 const Eigen::Ref<const VectorXd>& y, const KernelConfig& config);

// Outcome Gram between two fitted models: entry (u, v) = l(Y_iu, Y_jv) with
// the shared outcome bandwidth.
MatrixXd cross_outcome_gram(const CmeModel& model_i, const CmeModel& model_j);

// Cache keyed by ordered (population, population) pairs.
class OutcomeGramCache {
 public:
  const MatrixXd& get(const CmeModel& model_i, const CmeModel& model_j);
  void clear() { cache_.clear(); }

 private:
  std::map<std::pair<int, int>, MatrixXd> cache_;
  std::mutex mu_;
};

// Cholesky of a symmetric positive-definite matrix with a one-shot jitter
// retry (1e-10 * trace/n added to the diagonal). Returns the jitter applied.
double spd_factorize(const MatrixXd& A, Eigen::LLT<MatrixXd>& llt, const char* what);

}  // namespace synthtx

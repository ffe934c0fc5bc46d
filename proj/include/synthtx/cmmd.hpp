#pragma once

#include "synthtx/kernel.hpp"
#include "synthtx/qp.hpp"

namespace synthtx {

// Quadratic form of the estimated discrepancy at one covariate point:
//   d(x, w) = w' a_hat w - 2 w' b_hat + c_hat.
struct CmmdComponents {
  MatrixXd a_hat;  // N x N, symmetric PSD
  VectorXd b_hat;  // N
  double c_hat = 0.0;
  VectorXd x;
};

struct PointwiseWeights {
  VectorXd x;
  VectorXd w;
  bool constrained = false;
  double cmmd_value = 0.0;
};

CmmdComponents cmmd_components(const std::vector<const CmeModel*>& sources, const CmeModel& target,
                               const Eigen::Ref<const VectorXd>& x, OutcomeGramCache& cache);

double cmmd_value(const CmmdComponents& comp, const Eigen::Ref<const VectorXd>& w);

// Default ridge used by the estimation pipeline in both modes.
double default_cmmd_ridge(const CmmdComponents& comp);

// Unconstrained: solves (a_hat + ridge I) w = b_hat.
// Constrained: simplex QP on the same stabilized quadratic.
PointwiseWeights pointwise_weights(const CmmdComponents& comp, bool constrained, double ridge);

// Per-point components for a whole set of covariate points, sharing the
// embedding-coefficient and outcome-Gram work across points. Exact; block
// boundaries and thread count do not change results.
struct CmmdTable {
  std::vector<MatrixXd> a_hat;  // per point
  MatrixXd b_hat;               // n_points x N
  VectorXd c_hat;               // n_points
  MatrixXd points;              // n_points x d

  long size() const { return c_hat.size(); }
  CmmdComponents at(long p) const;
};

CmmdTable cmmd_components_batch(const std::vector<const CmeModel*>& sources,
                                const CmeModel& target,
                                const Eigen::Ref<const MatrixXd>& points_rows, int threads = 1);

}  // namespace synthtx

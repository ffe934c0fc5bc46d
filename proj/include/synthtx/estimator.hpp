#pragma once

#include <map>
#include <optional>
#include <string>

#include "synthtx/sieve.hpp"

namespace synthtx {

enum class Method { sieve, point_constrained, point_unconstrained, uniform, pool };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
};

struct EstimateReport {
  Method method = Method::sieve;
  double theta_hat = 0.0;
  double ate_hat = 0.0;
  std::optional<double> variance;
  std::optional<ConfidenceInterval> ci;
  long n_total = 0;
  std::map<std::string, std::string> diagnostics;
};

// Weight functions over the target points: a sieve model (evaluates
// anywhere), a per-point table aligned with the target covariates, or a
// constant vector.
class WeightModel {
 public:
  static WeightModel from_sieve(SieveWeightModel model);
  static WeightModel from_table(MatrixXd weights_rows);  // n_points x N
  static WeightModel constant(VectorXd w);

  // Weights for target point `index` with covariate value x.
  VectorXd at(long index, double x) const;
  int n_weights() const;
  bool is_sieve() const { return kind_ == Kind::sieve; }
  const SieveWeightModel& sieve() const;

 private:
  enum class Kind { sieve, table, constant };
  Kind kind_ = Kind::constant;
  SieveWeightModel sieve_;
  MatrixXd table_;
  VectorXd constant_;
};

// (1/n0) sum_j sum_i w_i(x_j) g_i(x_j), pairwise-summed over j.
double synthetic_theta(const WeightModel& weights,
                       const std::vector<SieveRegressionModel>& regressions,
                       const Eigen::Ref<const VectorXd>& target_x);

double ate(double theta_hat, const Eigen::Ref<const VectorXd>& target_control_y);

// Single regression on the pooled treated data, averaged over target points.
double pool_baseline(const Eigen::Ref<const VectorXd>& pooled_x,
                     const Eigen::Ref<const VectorXd>& pooled_y, const BSplineBasis& basis,
                     const Eigen::Ref<const VectorXd>& target_x);

double uniform_baseline(const std::vector<SieveRegressionModel>& regressions,
                        const Eigen::Ref<const VectorXd>& target_x);

}  // namespace synthtx

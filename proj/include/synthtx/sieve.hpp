#pragma once

#include "synthtx/cmmd.hpp"

namespace synthtx {

// Clamped B-spline basis on [lo, hi]. `order` follows the classical
// convention: order 1 is piecewise constant, order k has polynomial degree
// k-1. dim = order + #interior knots. The basis is nonnegative and sums to
// one everywhere on the domain; evaluation clamps x to the domain.
class BSplineBasis {
 public:
  BSplineBasis() = default;
  BSplineBasis(int order, std::vector<double> interior_knots, double lo, double hi);

  // Interior knots at evenly spaced quantiles of `sample`.
  static BSplineBasis from_quantiles(int order, int n_interior,
                                     const Eigen::Ref<const VectorXd>& sample, double lo,
                                     double hi);

  int order() const { return order_; }
  int dim() const { return dim_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<double>& interior_knots() const { return interior_; }

  bool same_as(const BSplineBasis& other) const;

  VectorXd eval(double x) const;
  // Rows are basis vectors for each entry of xs. `clamped`, when given,
  // accumulates how many points fell outside the domain.
  MatrixXd eval_rows(const Eigen::Ref<const VectorXd>& xs, long* clamped = nullptr) const;

 private:
  int order_ = 0;
  int dim_ = 0;
  double lo_ = 0.0, hi_ = 1.0;
  std::vector<double> interior_;
  std::vector<double> knots_;  // clamped knot vector
};

VectorXd eval_basis(const BSplineBasis& basis, double x);

// V(x): block-diagonal (sum of dims) x N design; column i carries basis i.
MatrixXd build_block_design(const std::vector<BSplineBasis>& bases, double x);

enum class SimplexStyle {
  coefficients,  // per-basis-index coefficient sums equal 1, coefficients >= 0
  at_points      // sums equal 1, weights nonnegative at the observed points only
};

struct SieveWeightModel {
  std::vector<BSplineBasis> bases;
  VectorXd beta_w;  // stacked per-population coefficients
  bool constrained = false;

  int n_populations() const { return static_cast<int>(bases.size()); }
  VectorXd eval(double x) const;                                   // weights at x
  MatrixXd eval_rows(const Eigen::Ref<const VectorXd>& xs) const;  // n x N
};

struct SieveRegressionModel {
  BSplineBasis basis;
  VectorXd beta_g;
  int population_id = 0;

  double eval(double x) const;
  VectorXd eval_rows(const Eigen::Ref<const VectorXd>& xs) const;
};

struct SieveWeightOptions {
  bool constrained = true;
  SimplexStyle style = SimplexStyle::coefficients;
  double ridge = 0.0;  // stabilizer for the unconstrained aggregate solve
};

SieveWeightModel fit_sieve_weights(const CmmdTable& table,
                                   const std::vector<BSplineBasis>& bases,
                                   const SieveWeightOptions& opt);
// Convenience overload that computes the component table itself.
SieveWeightModel fit_sieve_weights(const std::vector<const CmeModel*>& sources,
                                   const CmeModel& target,
                                   const Eigen::Ref<const VectorXd>& target_x,
                                   const std::vector<BSplineBasis>& bases,
                                   bool constrained);

// Average of d(x_j, w(x_j)) over the table points for a weight model.
double average_cmmd(const CmmdTable& table, const SieveWeightModel& model);
double average_cmmd_rows(const CmmdTable& table, const Eigen::Ref<const MatrixXd>& weights_rows);

SieveRegressionModel fit_sieve_regression(const Eigen::Ref<const VectorXd>& x,
                                          const Eigen::Ref<const VectorXd>& y,
                                          const BSplineBasis& basis, int population_id = 0);

double eval_weights_sum(const SieveWeightModel& model, double x);  // sum_i w_i(x)
inline VectorXd eval_weights(const SieveWeightModel& model, double x) { return model.eval(x); }
inline double eval_regression(const SieveRegressionModel& model, double x) {
  return model.eval(x);
}

}  // namespace synthtx

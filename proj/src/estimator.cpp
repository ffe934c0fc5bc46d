#include "synthtx/estimator.hpp"

#include <cmath>

namespace synthtx {

const char* method_name(Method m) {
  switch (m) {
    case Method::sieve: return "sieve";
    case Method::point_constrained: return "point_constrained";
    case Method::point_unconstrained: return "point_unconstrained";
    case Method::uniform: return "uniform";
    case Method::pool: return "pool";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  for (Method m : {Method::sieve, Method::point_constrained, Method::point_unconstrained,
                   Method::uniform, Method::pool})
    if (name == method_name(m)) return m;
  fail(Error::Kind::config, "unknown method '" + name + "'");
}

WeightModel WeightModel::from_sieve(SieveWeightModel model) {
  WeightModel w;
  w.kind_ = Kind::sieve;
  w.sieve_ = std::move(model);
  return w;
}

WeightModel WeightModel::from_table(MatrixXd weights_rows) {
  WeightModel w;
  w.kind_ = Kind::table;
  w.table_ = std::move(weights_rows);
  return w;
}

WeightModel WeightModel::constant(VectorXd wv) {
  WeightModel w;
  w.kind_ = Kind::constant;
  w.constant_ = std::move(wv);
  return w;
}

VectorXd WeightModel::at(long index, double x) const {
  switch (kind_) {
    case Kind::sieve: return sieve_.eval(x);
    case Kind::table:
      if (index < 0 || index >= table_.rows())
        fail(Error::Kind::input, "WeightModel: point index outside the weight table");
      return table_.row(index).transpose();
    case Kind::constant: return constant_;
  }
  fail(Error::Kind::input, "WeightModel: bad state");
}

int WeightModel::n_weights() const {
  switch (kind_) {
    case Kind::sieve: return sieve_.n_populations();
    case Kind::table: return static_cast<int>(table_.cols());
    case Kind::constant: return static_cast<int>(constant_.size());
  }
  return 0;
}

const SieveWeightModel& WeightModel::sieve() const {
  if (kind_ != Kind::sieve) fail(Error::Kind::input, "WeightModel: not a sieve model");
  return sieve_;
}

double synthetic_theta(const WeightModel& weights,
                       const std::vector<SieveRegressionModel>& regressions,
                       const Eigen::Ref<const VectorXd>& target_x) {
  if (target_x.size() == 0) fail(Error::Kind::input, "synthetic_theta: empty target point set");
  if (weights.n_weights() != static_cast<int>(regressions.size()))
    fail(Error::Kind::shape, "synthetic_theta: weights and regressions disagree on N");
  const long n0 = target_x.size();
  const int N = weights.n_weights();
  std::vector<double> terms(static_cast<std::size_t>(n0));
  for (long j = 0; j < n0; ++j) {
    const VectorXd w = weights.at(j, target_x[j]);
    double m = 0.0;
    for (int i = 0; i < N; ++i)
      m += w[i] * regressions[static_cast<std::size_t>(i)].eval(target_x[j]);
    terms[static_cast<std::size_t>(j)] = m;
  }
  const double theta = pairwise_mean(terms);
  if (!std::isfinite(theta)) fail(Error::Kind::numeric, "synthetic_theta: non-finite estimate");
  return theta;
}

double ate(double theta_hat, const Eigen::Ref<const VectorXd>& target_control_y) {
  if (target_control_y.size() == 0) fail(Error::Kind::input, "ate: empty target control sample");
  std::vector<double> v(target_control_y.data(), target_control_y.data() + target_control_y.size());
  return theta_hat - pairwise_mean(v);
}

double pool_baseline(const Eigen::Ref<const VectorXd>& pooled_x,
                     const Eigen::Ref<const VectorXd>& pooled_y, const BSplineBasis& basis,
                     const Eigen::Ref<const VectorXd>& target_x) {
  const SieveRegressionModel g = fit_sieve_regression(pooled_x, pooled_y, basis, -1);
  const VectorXd pred = g.eval_rows(target_x);
  std::vector<double> v(pred.data(), pred.data() + pred.size());
  return pairwise_mean(v);
}

double uniform_baseline(const std::vector<SieveRegressionModel>& regressions,
                        const Eigen::Ref<const VectorXd>& target_x) {
  if (regressions.empty()) fail(Error::Kind::input, "uniform_baseline: no regressions");
  const int N = static_cast<int>(regressions.size());
  return synthetic_theta(WeightModel::constant(VectorXd::Constant(N, 1.0 / N)), regressions,
                         target_x);
}

}  // namespace synthtx

#pragma once

#include <optional>

#include "synthtx/common.hpp"

namespace synthtx {

// minimize x' q x - 2 x' c
//   subject to eq_lhs x = eq_rhs,
//              x >= lower_bounds          (when given)
//              ineq_lhs x >= ineq_rhs     (when given)
struct QpProblem {
  MatrixXd q;
  VectorXd c;
  MatrixXd eq_lhs;  // 0 x n when absent
  VectorXd eq_rhs;
  std::optional<VectorXd> lower_bounds;
  MatrixXd ineq_lhs;  // general inequality rows, 0 x n when absent
  VectorXd ineq_rhs;
  // Optional feasible starting point. When absent a feasibility phase runs.
  std::optional<VectorXd> start;
};

struct QpSolution {
  VectorXd x;
  double objective = 0.0;
  int pivots = 0;
  double stationarity = 0.0;    // ||grad - active' multipliers||_inf
  double feasibility = 0.0;     // max constraint violation
  double complementarity = 0.0; // max_i multiplier_i * slack_i over inequalities
};

QpSolution solve_general_qp(const QpProblem& p);

// minimize w' q w - 2 w' c over the probability simplex (sum w = 1, w >= 0).
VectorXd solve_simplex_qp(const Eigen::Ref<const MatrixXd>& q,
                          const Eigen::Ref<const VectorXd>& c);
QpSolution solve_simplex_qp_full(const Eigen::Ref<const MatrixXd>& q,
                                 const Eigen::Ref<const VectorXd>& c);

}  // namespace synthtx

#pragma once

#include "synthtx/estimator.hpp"

namespace synthtx {

// First-step correction pieces for the sieve estimator's asymptotic variance.
struct AdjustmentComponents {
  MatrixXd r_w_hat;                       // (N s) x (N s)
  RowVectorXd gamma2_w_hat;               // 1 x (N s)
  std::vector<MatrixXd> r_g_hat;          // per source, t x t
  std::vector<RowVectorXd> gamma2_g_hat;  // per source, 1 x t
  // Precomputed solves gamma R^{-1}, applied to per-observation score pieces.
  VectorXd weight_direction;               // R_w^{-1} gamma2_w'
  std::vector<VectorXd> regression_direction;  // R_gi^{-1} gamma2_gi'
};

struct SieveScores {
  std::vector<double> scores;  // one per observation, every stratum
  double theta_hat = 0.0;
};

// Everything a per-observation score needs: fitted first-step models, the
// component table at the target points, and pooled sample proportions.
struct ScoreContext {
  const SieveWeightModel* weights = nullptr;
  const std::vector<SieveRegressionModel>* regressions = nullptr;
  const CmmdTable* target_table = nullptr;  // components at the target covariates
  double theta_hat = 0.0;
  double prob_target = 0.0;                 // P(D=0) sample proportion
  std::vector<double> prob_treated;         // P(A=1, D=i) sample proportions
  AdjustmentComponents adjustment;
};

AdjustmentComponents adjustment_components(const SieveWeightModel& weights,
                                           const std::vector<SieveRegressionModel>& regressions,
                                           const CmmdTable& target_table,
                                           const std::vector<MatrixXd>& source_treated_x);

// Score of a single observation. Target controls are addressed by their index
// into the target table; source observations carry their covariate/outcome.
double score_target_control(const ScoreContext& ctx, long target_index);
double score_source_treated(const ScoreContext& ctx, int source, double x, double y);
double score_source_control(const ScoreContext& ctx);

// Scores for the whole grouped sample, ordered target, then per source
// (treated then control).
SieveScores compute_scores(const ScoreContext& ctx, const GroupedData& data);

struct VarianceResult {
  double variance = 0.0;
  ConfidenceInterval ci;
};

VarianceResult variance_and_ci(const SieveScores& scores, double alpha);

}  // namespace synthtx

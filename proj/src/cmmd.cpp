#include "synthtx/cmmd.hpp"

#include <cmath>

namespace synthtx {

static void check_bandwidths(const std::vector<const CmeModel*>& sources, const CmeModel& target) {
  if (sources.empty()) fail(Error::Kind::input, "cmmd: need at least one source model");
  const double hy = target.config().bandwidth_y;
  for (const auto* s : sources)
    if (s->config().bandwidth_y != hy)
      fail(Error::Kind::config, "cmmd: all models must share the outcome bandwidth");
}

CmmdComponents cmmd_components(const std::vector<const CmeModel*>& sources, const CmeModel& target,
                               const Eigen::Ref<const VectorXd>& x, OutcomeGramCache& cache) {
  check_bandwidths(sources, target);
  const int N = static_cast<int>(sources.size());
  std::vector<VectorXd> alpha(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) alpha[static_cast<std::size_t>(i)] = sources[static_cast<std::size_t>(i)]->embedding_coefficients(x);
  const VectorXd alpha0 = target.embedding_coefficients(x);

  CmmdComponents comp;
  comp.x = x;
  comp.a_hat.resize(N, N);
  comp.b_hat.resize(N);
  for (int i = 0; i < N; ++i) {
    const CmeModel& mi = *sources[static_cast<std::size_t>(i)];
    for (int j = i; j < N; ++j) {
      const MatrixXd& L = cache.get(mi, *sources[static_cast<std::size_t>(j)]);
      const double v = alpha[static_cast<std::size_t>(i)].dot(L * alpha[static_cast<std::size_t>(j)]);
      comp.a_hat(i, j) = v;
      comp.a_hat(j, i) = v;
    }
    const MatrixXd& Li0 = cache.get(mi, target);
    comp.b_hat[i] = alpha[static_cast<std::size_t>(i)].dot(Li0 * alpha0);
  }
  const MatrixXd& L00 = cache.get(target, target);
  comp.c_hat = alpha0.dot(L00 * alpha0);
  return comp;
}

double cmmd_value(const CmmdComponents& comp, const Eigen::Ref<const VectorXd>& w) {
  if (w.size() != comp.b_hat.size()) fail(Error::Kind::shape, "cmmd_value: weight length mismatch");
  return w.dot(comp.a_hat * w) - 2.0 * w.dot(comp.b_hat) + comp.c_hat;
}

double default_cmmd_ridge(const CmmdComponents& comp) {
  return 1e-8 * comp.a_hat.trace() / static_cast<double>(comp.a_hat.rows());
}

PointwiseWeights pointwise_weights(const CmmdComponents& comp, bool constrained, double ridge) {
  if (ridge < 0.0) fail(Error::Kind::domain, "pointwise_weights: ridge must be >= 0");
  const long N = comp.a_hat.rows();
  MatrixXd A = comp.a_hat;
  A.diagonal().array() += ridge;
  PointwiseWeights out;
  out.x = comp.x;
  out.constrained = constrained;
  if (constrained) {
    out.w = solve_simplex_qp(A, comp.b_hat);
  } else {
    Eigen::LDLT<MatrixXd> ldlt(A);
    const double dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !(dmax > 0.0) ||
        ldlt.vectorD().minCoeff() <= 1e-13 * dmax) {
      if (ridge == 0.0)
        fail(Error::Kind::singular,
             "pointwise_weights: a_hat is singular; pass a positive ridge to stabilize");
      fail(Error::Kind::singular, "pointwise_weights: stabilized system still singular");
    }
    out.w = ldlt.solve(comp.b_hat);
  }
  if (out.w.size() != N || !out.w.allFinite())
    fail(Error::Kind::numeric, "pointwise_weights: non-finite solution");
  out.cmmd_value = cmmd_value(comp, out.w);
  return out;
}

CmmdComponents CmmdTable::at(long p) const {
  CmmdComponents c;
  c.a_hat = a_hat[static_cast<std::size_t>(p)];
  c.b_hat = b_hat.row(p).transpose();
  c.c_hat = c_hat[p];
  c.x = points.row(p).transpose();
  return c;
}

CmmdTable cmmd_components_batch(const std::vector<const CmeModel*>& sources,
                                const CmeModel& target,
                                const Eigen::Ref<const MatrixXd>& points_rows, int threads) {
  check_bandwidths(sources, target);
  const int N = static_cast<int>(sources.size());
  const long np = points_rows.rows();
  if (np == 0) fail(Error::Kind::input, "cmmd_components_batch: no evaluation points");

  // Population list with the target in slot 0; coefficients for all points.
  std::vector<const CmeModel*> pops;
  pops.push_back(&target);
  for (const auto* s : sources) pops.push_back(s);
  const int P = N + 1;

  // Fixed block width keeps per-column arithmetic identical however many
  // threads run.
  constexpr long kBlock = 256;
  const long nblocks = (np + kBlock - 1) / kBlock;

  std::vector<MatrixXd> coef(static_cast<std::size_t>(P));
  for (int pop = 0; pop < P; ++pop)
    coef[static_cast<std::size_t>(pop)].resize(pops[static_cast<std::size_t>(pop)]->size(), np);
  parallel_for_chunks(static_cast<std::size_t>(nblocks) * static_cast<std::size_t>(P), threads,
                      [&](std::size_t b, std::size_t e) {
                        for (std::size_t k = b; k < e; ++k) {
                          const int pop = static_cast<int>(k % static_cast<std::size_t>(P));
                          const long blk = static_cast<long>(k / static_cast<std::size_t>(P));
                          const long lo = blk * kBlock;
                          const long len = std::min(kBlock, np - lo);
                          coef[static_cast<std::size_t>(pop)].middleCols(lo, len) =
                              pops[static_cast<std::size_t>(pop)]->embedding_coefficients_batch(
                                  points_rows.middleRows(lo, len));
                        }
                      });

  CmmdTable table;
  table.points = points_rows;
  table.b_hat.resize(np, N);
  table.c_hat.resize(np);
  table.a_hat.assign(static_cast<std::size_t>(np), MatrixXd(N, N));

  // diag(coef_i' L_ij coef_j) pair by pair; the cross Gram for a pair is
  // materialized once and streamed over point blocks.
  for (int i = 0; i < P; ++i) {
    for (int j = i; j < P; ++j) {
      const MatrixXd L = cross_outcome_gram(*pops[static_cast<std::size_t>(i)],
                                            *pops[static_cast<std::size_t>(j)]);
      VectorXd diag(np);
      parallel_for_chunks(static_cast<std::size_t>(nblocks), threads,
                          [&](std::size_t b, std::size_t e) {
                            for (std::size_t blk = b; blk < e; ++blk) {
                              const long lo = static_cast<long>(blk) * kBlock;
                              const long len = std::min(kBlock, np - lo);
                              const MatrixXd t =
                                  L * coef[static_cast<std::size_t>(j)].middleCols(lo, len);
                              diag.segment(lo, len) =
                                  (coef[static_cast<std::size_t>(i)].middleCols(lo, len).array() *
                                   t.array())
                                      .colwise()
                                      .sum()
                                      .matrix()
                                      .transpose();
                            }
                          });
      if (i == 0 && j == 0) {
        table.c_hat = diag;
      } else if (i == 0) {
        table.b_hat.col(j - 1) = diag;
      } else {
        for (long p = 0; p < np; ++p) {
          table.a_hat[static_cast<std::size_t>(p)](i - 1, j - 1) = diag[p];
          table.a_hat[static_cast<std::size_t>(p)](j - 1, i - 1) = diag[p];
        }
      }
    }
  }
  return table;
}

}  // namespace synthtx

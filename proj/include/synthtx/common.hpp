#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace synthtx {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

// Single error type with a machine-checkable kind. Messages carry the detail;
// the kind is what callers and tests dispatch on.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    shape,
    domain,
    degenerate_data,
    numeric,
    config,
    singular,
    feasibility,
    solver,
    input,
    data,
    metric,
    parse,
    inference,
  };

  Error(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

[[noreturn]] void fail(Error::Kind kind, const std::string& msg);

// One observation: population id (0 = target), arm (0 control / 1 treated),
// outcome and covariate vector.
struct Observation {
  int pop = 0;
  int arm = 0;
  double y = 0.0;
  VectorXd x;
};

struct Dataset {
  std::vector<Observation> rows;
  int dim = 0;  // covariate dimension, fixed across rows

  int n_populations() const;  // 1 + max pop id
  void validate(bool require_both_arms) const;
};

// Dataset regrouped by stratum; covariates stored row-major (n x d).
struct GroupedData {
  MatrixXd target_x;
  VectorXd target_y;
  std::vector<MatrixXd> source_control_x;  // index 0 <-> population 1
  std::vector<VectorXd> source_control_y;
  std::vector<MatrixXd> source_treated_x;
  std::vector<VectorXd> source_treated_y;

  int n_sources() const { return static_cast<int>(source_control_x.size()); }
  long n_total() const;
  int dim() const { return static_cast<int>(target_x.cols()); }
};

GroupedData group_dataset(const Dataset& ds);

// Sum with a fixed pairwise reduction tree; the result does not depend on
// how callers partitioned the work that produced `v`.
double pairwise_sum(std::span<const double> v);
double pairwise_mean(std::span<const double> v);

// Worker cap shared by every parallel loop: min(SYNTHTX_THREADS, hardware).
int max_threads();

// Runs fn(begin, end) over [0, n) split into contiguous chunks, at most
// `threads` at a time. fn must write only to disjoint per-index slots.
void parallel_for_chunks(std::size_t n, int threads,
                         const std::function<void(std::size_t, std::size_t)>& fn);

std::string format_double(double v);  // 17 significant digits, round-trip exact

}  // namespace synthtx

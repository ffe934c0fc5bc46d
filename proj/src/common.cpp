#include "synthtx/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>

namespace synthtx {

void fail(Error::Kind kind, const std::string& msg) { throw Error(kind, msg); }

int Dataset::n_populations() const {
  int max_pop = -1;
  for (const auto& r : rows) max_pop = std::max(max_pop, r.pop);
  return max_pop + 1;
}

void Dataset::validate(bool require_both_arms) const {
  if (rows.empty()) fail(Error::Kind::input, "dataset is empty");
  const int d = dim;
  std::vector<int> treated, control;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string at = " (row " + std::to_string(i) + ")";
    if (r.pop < 0) fail(Error::Kind::data, "population id must be >= 0" + at);
    if (r.arm != 0 && r.arm != 1) fail(Error::Kind::data, "arm must be 0 or 1" + at);
    if (r.pop == 0 && r.arm == 1)
      fail(Error::Kind::data, "target population (pop 0) cannot have treated rows" + at);
    if (r.x.size() != d) fail(Error::Kind::shape, "covariate dimension mismatch" + at);
    if (!std::isfinite(r.y)) fail(Error::Kind::data, "non-finite outcome" + at);
    if (!r.x.allFinite()) fail(Error::Kind::data, "non-finite covariate" + at);
    const int np = r.pop + 1;
    if (static_cast<int>(treated.size()) < np) {
      treated.resize(np, 0);
      control.resize(np, 0);
    }
    (r.arm == 1 ? treated : control)[r.pop]++;
  }
  if (control.empty() || control[0] == 0) fail(Error::Kind::data, "no target control rows (pop 0)");
  if (require_both_arms) {
    if (treated.size() < 2) fail(Error::Kind::data, "no source populations in dataset");
    for (std::size_t p = 1; p < treated.size(); ++p) {
      if (treated[p] == 0)
        fail(Error::Kind::data, "source population " + std::to_string(p) + " has no treated rows");
      if (control[p] == 0)
        fail(Error::Kind::data, "source population " + std::to_string(p) + " has no control rows");
    }
  }
}

long GroupedData::n_total() const {
  long n = target_x.rows();
  for (const auto& m : source_control_x) n += m.rows();
  for (const auto& m : source_treated_x) n += m.rows();
  return n;
}

GroupedData group_dataset(const Dataset& ds) {
  const int npop = ds.n_populations();
  if (npop < 2) fail(Error::Kind::data, "need at least one source population");
  const int ns = npop - 1;
  std::vector<std::vector<const Observation*>> tc(1), sc(ns), st(ns);
  for (const auto& r : ds.rows) {
    if (r.pop == 0)
      tc[0].push_back(&r);
    else if (r.arm == 0)
      sc[r.pop - 1].push_back(&r);
    else
      st[r.pop - 1].push_back(&r);
  }
  auto pack = [&](const std::vector<const Observation*>& obs, MatrixXd& X, VectorXd& y) {
    X.resize(static_cast<long>(obs.size()), ds.dim);
    y.resize(static_cast<long>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
      X.row(static_cast<long>(i)) = obs[i]->x.transpose();
      y[static_cast<long>(i)] = obs[i]->y;
    }
  };
  GroupedData g;
  pack(tc[0], g.target_x, g.target_y);
  g.source_control_x.resize(ns);
  g.source_control_y.resize(ns);
  g.source_treated_x.resize(ns);
  g.source_treated_y.resize(ns);
  for (int i = 0; i < ns; ++i) {
    pack(sc[i], g.source_control_x[i], g.source_control_y[i]);
    pack(st[i], g.source_treated_x[i], g.source_treated_y[i]);
  }
  return g;
}

double pairwise_sum(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

double pairwise_mean(std::span<const double> v) {
  if (v.empty()) fail(Error::Kind::input, "mean of empty list");
  return pairwise_sum(v) / static_cast<double>(v.size());
}

int max_threads() {
  static const int cap = [] {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("SYNTHTX_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) return std::min(v, hw);
    }
    return hw;
  }();
  return cap;
}

void parallel_for_chunks(std::size_t n, int threads,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
  threads = std::min<std::size_t>(std::max(threads, 1), n == 0 ? 1 : n);
  if (threads <= 1 || n == 0) {
    if (n > 0) fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  std::exception_ptr first_error;
  std::mutex err_mu;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::size_t b = static_cast<std::size_t>(t) * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&, b, e] {
      try {
        fn(b, e);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace synthtx

#pragma once

#include <cstdint>
#include <random>

namespace synthtx {

// Standard normal CDF.
double normal_cdf(double x);

// Inverse standard normal CDF (Wichura's rational approximation; absolute
// error well below 1e-8 over (0, 1)).
double normal_quantile(double p);

// Deterministic random source: mt19937_64 (engine output is pinned by the
// standard) with hand-rolled variate transforms, so streams are reproducible
// across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Derives an independent stream for (master, index) pairs; used to give
  // each Monte Carlo replicate its own stream regardless of scheduling.
  static Rng substream(std::uint64_t master, std::uint64_t index);

  double uniform01();                    // strictly inside (0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal(double mean, double sd);
  // Index into a discrete distribution given (unnormalized) nonnegative weights.
  int categorical(const double* w, int n);

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace synthtx

#pragma once

// Streaming moment accumulators for the Monte Carlo harness.
//
// Welford/Chan updates keep mean and variance numerically stable over
// millions of trials, and the pairwise merge is exact enough to make
// blocked (parallel) accumulation match serial accumulation to the last
// bit when blocks are merged in a fixed order.

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace ratenet {

// First two central moments of a stream of values.
struct Welford {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations from the running mean

  void add(double x) {
    ++count;
    const double d1 = x - mean;
    mean += d1 / static_cast<double>(count);
    const double d2 = x - mean;
    m2 += d1 * d2;
  }

  // Chan et al. parallel combine. Merging b into *this equals having fed
  // this-stream then b-stream only up to rounding; determinism comes from
  // always merging blocks in ascending block order.
  void merge(const Welford& b) {
    if (b.count == 0) return;
    if (count == 0) {
      *this = b;
      return;
    }
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(b.count);
    const double delta = b.mean - mean;
    const double n = na + nb;
    mean += delta * (nb / n);
    m2 += b.m2 + delta * delta * (na * nb / n);
    count += b.count;
  }

  double variance() const {
    if (count < 2) return std::nan("");
    return m2 / static_cast<double>(count - 1);
  }

  double stddev() const { return std::sqrt(variance()); }

  // Standard error of the sample mean.
  double se_mean() const {
    if (count < 2) return std::nan("");
    return std::sqrt(variance() / static_cast<double>(count));
  }
};

// Accumulates an estimator's error against a per-trial truth. Tracks the
// estimate stream itself (mean/variance) and the squared-error stream, from
// which the sample RMSE and its standard error follow.
struct ErrorStats {
  Welford value;  // the estimates
  Welford sq_err;  // (estimate - truth)^2

  void add(double estimate, double truth) {
    value.add(estimate);
    const double e = estimate - truth;
    sq_err.add(e * e);
  }

  void merge(const ErrorStats& b) {
    value.merge(b.value);
    sq_err.merge(b.sq_err);
  }

  std::int64_t count() const { return value.count; }

  // sqrt of the mean squared error over trials.
  double rmse() const {
    if (sq_err.count == 0) return std::nan("");
    return std::sqrt(sq_err.mean);
  }

  // Delta-method standard error of the sample RMSE:
  // se(sqrt(q)) ~ se(q) / (2 sqrt(q)) for q = mean squared error.
  double se_rmse() const {
    const double r = rmse();
    if (!(r > 0.0) || sq_err.count < 2) return std::nan("");
    return sq_err.se_mean() / (2.0 * r);
  }
};

}  // namespace ratenet

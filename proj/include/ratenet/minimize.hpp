#pragma once

// Bracketed 1-D scalar minimization (golden-section), plus a log-uniform
// multistart scan for objectives that may carry several local minima.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ratenet {

// Golden-section search on [lo, hi]. Shrinks the bracket until its width
// drops below tol (absolute, in the coordinate of `f`), then returns the
// best interior point. ~48 function calls per decade of accuracy.
template <typename F>
double golden_section(F f, double lo, double hi, double tol,
                      int max_iter = 400) {
  if (!(lo < hi)) throw std::invalid_argument("golden_section: empty bracket");
  constexpr double R = 0.6180339887498949;  // golden ratio conjugate
  constexpr double C = 1.0 - R;
  double x1 = lo + C * (hi - lo);
  double x2 = lo + R * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < max_iter && (hi - lo) > tol; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = lo + C * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + R * (hi - lo);
      f2 = f(x2);
    }
  }
  return f1 < f2 ? x1 : x2;
}

// Evaluate f on `points` log-uniform points over [lo, hi] (all > 0) and
// return the index of the smallest value. Scan points are inclusive of both
// endpoints.
template <typename F>
std::size_t log_grid_argmin(F f, double lo, double hi, std::size_t points,
                            std::vector<double>* grid_out = nullptr) {
  if (!(0.0 < lo && lo < hi) || points < 2)
    throw std::invalid_argument("log_grid_argmin: bad grid");
  const double ulo = std::log(lo), uhi = std::log(hi);
  std::size_t best = 0;
  double fbest = 0.0;
  if (grid_out) grid_out->resize(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double u = ulo + (uhi - ulo) * static_cast<double>(i) /
                               static_cast<double>(points - 1);
    const double x = std::exp(u);
    if (grid_out) (*grid_out)[i] = x;
    const double v = f(x);
    if (i == 0 || v < fbest) {
      fbest = v;
      best = i;
    }
  }
  return best;
}

}  // namespace ratenet

#pragma once

// Gamma-Poisson generative model and the per-node inference primitives.
//
// Each monitor i observes n_i Poisson(lambda_i) counts with total sigma_i,
// where lambda_i ~ Gamma(a, b) (shape a known, scale b unknown). Everything
// downstream consumes only the sufficient statistics (n_i, sigma_i).

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ratenet/minimize.hpp"
#include "ratenet/rng.hpp"

namespace ratenet {

struct HyperParams {
  double a = 10.0;  // prior shape (known)
  double b = 1.0;   // prior scale (ground truth; unknown to the nodes)

  void validate() const {
    if (!(a > 0.0) || !(b > 0.0))
      throw std::invalid_argument("HyperParams: a and b must be positive");
  }
};

struct MonitorData {
  int node_id = 0;                  // 1-based
  std::int64_t n = 0;               // number of measurements
  std::vector<std::int64_t> counts; // raw counts y_{i,l}
  std::int64_t sigma = 0;           // total count, sum of `counts`

  MonitorData() = default;

  MonitorData(int id, std::vector<std::int64_t> ys)
      : node_id(id), n(static_cast<std::int64_t>(ys.size())),
        counts(std::move(ys)) {
    if (n < 1) throw std::invalid_argument("MonitorData: needs >= 1 count");
    for (std::int64_t y : counts) {
      if (y < 0) throw std::invalid_argument("MonitorData: negative count");
      if (__builtin_add_overflow(sigma, y, &sigma))
        throw std::overflow_error("MonitorData: total count overflows int64");
    }
  }

  // Sufficient-statistics constructor for callers that never touch raw
  // counts (theory, synthetic fixtures). Stores no per-measurement data.
  static MonitorData from_stats(int id, std::int64_t n_i, std::int64_t sigma_i) {
    if (n_i < 1 || sigma_i < 0)
      throw std::invalid_argument("MonitorData: bad sufficient statistics");
    MonitorData m;
    m.node_id = id;
    m.n = n_i;
    m.sigma = sigma_i;
    return m;
  }
};

struct NetworkData {
  int N = 0;
  std::vector<MonitorData> monitors;
  std::vector<double> lambdas;  // true rates; harness-visible only
  std::int64_t n_total = 0;
  std::int64_t sigma_total = 0;

  void finalize() {
    N = static_cast<int>(monitors.size());
    n_total = 0;
    sigma_total = 0;
    for (const MonitorData& m : monitors) {
      n_total += m.n;
      if (__builtin_add_overflow(sigma_total, m.sigma, &sigma_total))
        throw std::overflow_error("NetworkData: network count overflows");
    }
  }
};

// Draw lambda_i ~ Gamma(a,b) then y_{i,l} ~ Poisson(lambda_i), node by node
// in ascending order (the draw order is part of the determinism contract).
// Replace one node's drawn rate with a fixed value. The gamma variate is
// still consumed from the stream, so pinned and unpinned runs stay aligned
// draw-for-draw on every other node.
struct PinnedRate {
  int node = 0;  // 1-based
  double lambda = 1.0;
};

inline NetworkData sample_network(const HyperParams& hp,
                                  const std::vector<std::int64_t>& sizes,
                                  std::uint64_t seed,
                                  const PinnedRate* pin = nullptr) {
  hp.validate();
  if (sizes.empty()) throw std::invalid_argument("sample_network: no sizes");
  if (pin != nullptr) {
    if (pin->node < 1 || static_cast<std::size_t>(pin->node) > sizes.size())
      throw std::invalid_argument("sample_network: pinned node out of range");
    if (!(pin->lambda > 0.0))
      throw std::invalid_argument("sample_network: pinned rate must be > 0");
  }
  Rng rng(seed);
  NetworkData data;
  data.monitors.reserve(sizes.size());
  data.lambdas.reserve(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1)
      throw std::invalid_argument("sample_network: sizes must be >= 1");
    double lambda = rng.gamma(hp.a, hp.b);
    if (pin != nullptr && pin->node == static_cast<int>(i) + 1)
      lambda = pin->lambda;
    std::vector<std::int64_t> ys(static_cast<std::size_t>(sizes[i]));
    for (std::int64_t& y : ys) y = rng.poisson(lambda);
    data.monitors.emplace_back(static_cast<int>(i) + 1, std::move(ys));
    data.lambdas.push_back(lambda);
  }
  data.finalize();
  return data;
}

// lambda_hat = sigma_i / n_i: the local empirical mean, optimal when a node
// may use only its own data.
inline double decentralized_estimate(const MonitorData& m) {
  return static_cast<double>(m.sigma) / static_cast<double>(m.n);
}

// Per-node term of the hyperparameter ML cost,
//   f(b) = a*log b - (sigma+a)*log(b/(n b+1)),
// evaluated in the cancellation-free rearrangement
//   f(b) = (sigma+a)*log1p(n b) - sigma*log b.
inline double ml_cost(double b, std::int64_t n_i, std::int64_t sigma_i,
                      double a) {
  if (!(b > 0.0)) throw std::domain_error("ml_cost: b must be positive");
  const double n = static_cast<double>(n_i);
  const double sigma = static_cast<double>(sigma_i);
  return (sigma + a) * std::log1p(n * b) - sigma * std::log(b);
}

// Analytic derivative of ml_cost:
//   f'(b) = (a*n*b - sigma) / (b*(n*b + 1)).
// Zero exactly at the per-node stationary point b = sigma/(a*n).
inline double ml_gradient(double b, std::int64_t n_i, std::int64_t sigma_i,
                          double a) {
  if (!(b > 0.0)) throw std::domain_error("ml_gradient: b must be positive");
  const double n = static_cast<double>(n_i);
  const double sigma = static_cast<double>(sigma_i);
  return (a * n * b - sigma) / (b * (n * b + 1.0));
}

// Log of the node marginal likelihood (a negative-binomial-type form):
//   log p(y_i | b) = lgamma(sigma+a) - lgamma(a) - sum_l lgamma(y_l + 1)
//                    + sigma*log b - (sigma+a)*log(n b + 1).
// Requires raw counts for the y! normalizer; used to cross-validate ml_cost.
inline double log_marginal(const MonitorData& m, double b, double a) {
  if (!(b > 0.0)) throw std::domain_error("log_marginal: b must be positive");
  if (static_cast<std::int64_t>(m.counts.size()) != m.n)
    throw std::invalid_argument("log_marginal: monitor lacks raw counts");
  const double n = static_cast<double>(m.n);
  const double sigma = static_cast<double>(m.sigma);
  double log_fact = 0.0;
  for (std::int64_t y : m.counts)
    log_fact += std::lgamma(static_cast<double>(y) + 1.0);
  return std::lgamma(sigma + a) - std::lgamma(a) - log_fact +
         sigma * std::log(b) - (sigma + a) * std::log1p(n * b);
}

// Posterior of lambda_i given its counts and a scale b is
// Gamma(sigma_i + a, b/(n_i b + 1)).
inline std::pair<double, double> posterior_params(const MonitorData& m,
                                                  double b, double a) {
  if (!(b > 0.0)) throw std::domain_error("posterior_params: b <= 0");
  const double n = static_cast<double>(m.n);
  return {static_cast<double>(m.sigma) + a, b / (n * b + 1.0)};
}

// Posterior-mean (MMSE) rate estimate given a hyperparameter estimate:
//   lambda_hat = b_hat/(b_hat*n_i + 1) * (a + sigma_i).
// Equivalently the shrinkage form rho*sigma/n + (1-rho)*a*b_hat with
// rho = b_hat*n_i/(b_hat*n_i + 1).
inline double mmse_estimate(std::int64_t n_i, std::int64_t sigma_i,
                            double b_hat, double a) {
  if (!(b_hat > 0.0)) throw std::domain_error("mmse_estimate: b_hat <= 0");
  const double n = static_cast<double>(n_i);
  return b_hat / (b_hat * n + 1.0) * (a + static_cast<double>(sigma_i));
}

inline double mmse_estimate(const MonitorData& m, double b_hat, double a) {
  return mmse_estimate(m.n, m.sigma, b_hat, a);
}

// Closed-form network estimate sigma/(a*n): exact ML when all n_i are equal,
// and the consensus limit of the ad-hoc distributed estimator in general.
inline double b_hom(std::int64_t n_total, std::int64_t sigma_total, double a) {
  return static_cast<double>(sigma_total) / (a * static_cast<double>(n_total));
}

inline double b_hom(const NetworkData& data, double a) {
  return b_hom(data.n_total, data.sigma_total, a);
}

// Full-network ML cost: sum of per-node terms.
inline double network_ml_cost(const NetworkData& data, double b, double a) {
  double total = 0.0;
  for (const MonitorData& m : data.monitors)
    total += ml_cost(b, m.n, m.sigma, a);
  return total;
}

// Centralized oracle: global minimizer of the network ML cost over b > 0.
// The cost can carry several local minima, so a 64-point log-uniform scan
// over [1e-6, 1e6]*b_hom picks the basin and golden-section on log b narrows
// it. Comparison-based search stalls on the objective's floating-point
// plateau (~sqrt(eps) relative), so the stationary point is then polished by
// bisecting the sign of the analytic derivative, which stays conditioned all
// the way through the root. Needs at least one arrival network-wide
// (sigma > 0), otherwise the cost has no interior minimizer.
inline double centralized_ml(const NetworkData& data, double a) {
  if (data.sigma_total <= 0)
    throw std::domain_error("centralized_ml: no arrivals in the network");
  const double bh = b_hom(data, a);
  const auto cost = [&](double b) { return network_ml_cost(data, b, a); };
  std::vector<double> grid;
  const std::size_t best =
      log_grid_argmin(cost, bh * 1e-6, bh * 1e6, 64, &grid);
  const double lo = grid[best > 0 ? best - 1 : 0];
  const double hi = grid[best + 1 < grid.size() ? best + 1 : grid.size() - 1];
  // Golden-section on u = log b; an absolute tolerance in u is a relative
  // tolerance in b.
  double u = golden_section([&](double uu) { return cost(std::exp(uu)); },
                            std::log(lo), std::log(hi), 1e-10);

  // Sign of dF/du at u (equals b * F'(b), and b > 0 never flips the sign).
  const auto slope = [&](double uu) {
    const double b = std::exp(uu);
    double g = 0.0;
    for (const MonitorData& m : data.monitors)
      g += ml_gradient(b, m.n, m.sigma, a);
    return g;
  };
  // Widen around the plateau point, but never beyond the basin bracket the
  // grid scan selected, so the bisection cannot wander into another basin.
  const double u_min = std::log(lo);
  const double u_max = std::log(hi);
  double wlo = u - 1e-6 > u_min ? u - 1e-6 : u_min;
  double whi = u + 1e-6 < u_max ? u + 1e-6 : u_max;
  for (int k = 0; k < 40 && !(slope(wlo) < 0.0 && slope(whi) > 0.0); ++k) {
    const double w = whi - wlo;
    wlo = wlo - w > u_min ? wlo - w : u_min;
    whi = whi + w < u_max ? whi + w : u_max;
  }
  if (slope(wlo) < 0.0 && slope(whi) > 0.0) {
    for (int it = 0; it < 200 && whi - wlo > 1e-15; ++it) {
      const double mid = 0.5 * (wlo + whi);
      (slope(mid) < 0.0 ? wlo : whi) = mid;
    }
    const double u_root = 0.5 * (wlo + whi);
    // Accept unless the root is meaningfully worse. Comparing plateau
    // values bitwise would reject on 1-ulp noise, so allow rounding slack.
    const double f_u = cost(std::exp(u));
    const double slack = 64.0 * 2.220446049250313e-16 *
                         (std::abs(f_u) > 1.0 ? std::abs(f_u) : 1.0);
    if (cost(std::exp(u_root)) <= f_u + slack) u = u_root;
  }
  return std::exp(u);
}

}  // namespace ratenet

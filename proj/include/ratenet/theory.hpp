#pragma once

// Closed-form performance engine: CRB, exact steady-state and transient
// variances of the homogeneous hyperparameter estimator, the approximate
// conditional moments of the two rate estimators, the ergodicity-based
// variance-convergence bound, and RMSE composition.
//
// The rate-estimator moments are Taylor forms: second order for the mean,
// first order for the variance. Every function here is pure.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ratenet/graph.hpp"
#include "ratenet/model.hpp"

namespace ratenet {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

// Conditioning inputs for the rate-estimator analysis: the target node j
// holds n_j samples and true rate lambda_j. `participation` records whether
// node j's own counts enter the distributed computation; the excluded model
// is the exactly analyzed one, the included model adds only the mean
// correction of exact_conditional_mean_included.
struct TheoryInputs {
  HyperParams hp;
  std::vector<std::int64_t> sizes;
  int j = 1;               // 1-based target node
  double lambda_j = 1.0;
  enum class Participation { Excluded, Included } participation =
      Participation::Excluded;

  std::int64_t n_j() const {
    if (j < 1 || static_cast<std::size_t>(j) > sizes.size())
      throw std::invalid_argument("TheoryInputs: j out of range");
    return sizes[static_cast<std::size_t>(j - 1)];
  }
};

// Cramer-Rao bound for unbiased estimation of b:
//   CRB(b) = (b/a) / sum_i n_i/(n_i b + 1).
inline double crb(const HyperParams& hp,
                  const std::vector<std::int64_t>& sizes) {
  hp.validate();
  if (sizes.empty()) throw std::invalid_argument("crb: no nodes");
  double denom = 0.0;
  for (std::int64_t n : sizes) {
    const double nd = static_cast<double>(n);
    denom += nd / (nd * hp.b + 1.0);
  }
  return (hp.b / hp.a) / denom;
}

// Upper bound (b/a)(n_max*b + 1)/N, showing CRB -> 0 as N grows.
inline double crb_upper_bound(const HyperParams& hp, std::int64_t n_max,
                              std::size_t N) {
  return (hp.b / hp.a) * (static_cast<double>(n_max) * hp.b + 1.0) /
         static_cast<double>(N);
}

// Exact variance of the consensus value b_hom = sigma/(a*n):
//   VAR[b_hom] = b/(a*n) + (b^2/(a*n^2)) * sum_i n_i^2.
inline double var_bhom(const HyperParams& hp,
                       const std::vector<std::int64_t>& sizes) {
  hp.validate();
  double n = 0.0, sum_sq = 0.0;
  for (std::int64_t ni : sizes) {
    const double nd = static_cast<double>(ni);
    n += nd;
    sum_sq += nd * nd;
  }
  if (!(n > 0.0)) throw std::invalid_argument("var_bhom: n = 0");
  return hp.b / (hp.a * n) + hp.b * hp.b / (hp.a * n * n) * sum_sq;
}

// Exact variance of the local estimate b_hat_i(t), driven by row i of the
// state-transition product Phi(t):
//   VAR = (b/a) * sum_k phi_k^2 n_k / (sum_k phi_k n_k)^2
//       + (b^2/a) * sum_k phi_k^2 n_k^2 / (sum_k phi_k n_k)^2.
inline double var_bhom_transient(const HyperParams& hp,
                                 const std::vector<std::int64_t>& sizes,
                                 const Vec& phi_row) {
  hp.validate();
  if (static_cast<std::size_t>(phi_row.size()) != sizes.size())
    throw std::invalid_argument("var_bhom_transient: dimension mismatch");
  double lin = 0.0, sq_n = 0.0, sq_n2 = 0.0;
  for (Eigen::Index k = 0; k < phi_row.size(); ++k) {
    const double nd = static_cast<double>(sizes[static_cast<std::size_t>(k)]);
    const double phi = phi_row[k];
    lin += phi * nd;
    sq_n += phi * phi * nd;
    sq_n2 += phi * phi * nd * nd;
  }
  if (!(lin > 0.0))
    throw std::domain_error("var_bhom_transient: degenerate zero denominator");
  return (hp.b / hp.a) * sq_n / (lin * lin) +
         (hp.b * hp.b / hp.a) * sq_n2 / (lin * lin);
}

// Ergodicity bound on the transient-to-steady variance gap:
//   |VAR[b_hat_i(t)] - VAR[b_hom]| <= b(1 + 2 b n_max)/(mu a) * delta(Phi(t)).
inline double var_bhom_bound(const HyperParams& hp, std::int64_t n_max,
                             double mu, double delta) {
  hp.validate();
  if (!(mu > 0.0)) throw std::invalid_argument("var_bhom_bound: mu <= 0");
  if (!(delta >= 0.0 && delta <= 1.0))
    throw std::invalid_argument("var_bhom_bound: delta outside [0,1]");
  return hp.b * (1.0 + 2.0 * hp.b * static_cast<double>(n_max)) /
         (mu * hp.a) * delta;
}

// Asymptotic (N -> infinity) conditional moments of the Empirical Bayes rate
// estimator at node j:
//   mean -> b/(1 + n_j b) * (a + n_j lambda_j)        (second order)
//   var  -> (b/(1 + n_j b))^2 * n_j lambda_j          (first order)
inline Moments eb_asymptotic_moments(const TheoryInputs& in) {
  in.hp.validate();
  if (!(in.lambda_j > 0.0))
    throw std::invalid_argument("eb_asymptotic_moments: lambda_j <= 0");
  const double b = in.hp.b, a = in.hp.a;
  const double nj = static_cast<double>(in.n_j());
  const double c1 = b / (1.0 + nj * b);
  return {(a + nj * in.lambda_j) * c1, c1 * c1 * (nj * in.lambda_j)};
}

// Transient conditional moments of the ad-hoc rate estimator at node j,
// driven by the supplied VAR[b_hat_j(t)] (use var_bhom_transient for the
// transient curve or var_bhom for the steady state):
//   mean ~ (a + n_j lambda_j) [ c1 - c3 * V ]
//   var  ~ [ c1 - c3 * V ]^2 n_j lambda_j
//        + (2 c3)^2 V [ (a + n_j lambda_j)^2 + n_j lambda_j ]
// with c1 = b/(1 + n_j b), c3 = n_j/(1 + n_j b)^3. At V = 0 these reduce
// exactly to the asymptotic forms above.
inline Moments adhoc_transient_moments(const TheoryInputs& in, double var_b) {
  in.hp.validate();
  if (!(var_b >= 0.0))
    throw std::invalid_argument("adhoc_transient_moments: var_b < 0");
  const double b = in.hp.b, a = in.hp.a;
  const double nj = static_cast<double>(in.n_j());
  const double c1 = b / (1.0 + nj * b);
  const double denom3 = (1.0 + nj * b) * (1.0 + nj * b) * (1.0 + nj * b);
  const double c3 = nj / denom3;
  const double shrunk = c1 - c3 * var_b;
  const double anl = a + nj * in.lambda_j;
  const double mean = anl * shrunk;
  const double var = shrunk * shrunk * (nj * in.lambda_j) +
                     (2.0 * c3) * (2.0 * c3) * var_b *
                         (anl * anl + nj * in.lambda_j);
  return {mean, var};
}

// Exact conditional mean of b_hat_j(t) when node j's own counts participate
// in the computation:
//   E[b_hat_j(t) | lambda_j] = b - (phi_jj(t) n_j / eta_j(t)) (b - lambda_j/a).
// Quantifies the (vanishing) participation bias of the included mode.
inline double exact_conditional_mean_included(const TheoryInputs& in,
                                              double phi_jj, double eta_j) {
  in.hp.validate();
  if (!(eta_j > 0.0))
    throw std::invalid_argument("exact_conditional_mean_included: eta_j <= 0");
  const double nj = static_cast<double>(in.n_j());
  return in.hp.b - (phi_jj * nj / eta_j) * (in.hp.b - in.lambda_j / in.hp.a);
}

// RMSE of an estimator with the given moments against the true value:
//   rmse = sqrt(var + (mean - truth)^2).
inline double rmse(double mean, double var, double truth) {
  if (!(var >= 0.0)) throw std::invalid_argument("rmse: negative variance");
  const double bias = mean - truth;
  return std::sqrt(var + bias * bias);
}

}  // namespace ratenet

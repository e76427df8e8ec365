#pragma once

// Empirical Bayes distributed estimator: subgradient-push on the network ML
// cost. Each node carries (v, y, x); one synchronous round is
//   v <- W x,   y <- W y,
//   b_hat_i = max(v_i / y_i, b_min),
//   x_i <- v_i - step_i,  step_i = gamma(t) * f'(b_hat_i; n_i, sigma_i)
// with the step magnitude capped at step_cap * |v_i| (see below), and the
// rate readout lambda_hat_i = mmse_estimate(n_i, sigma_i, b_hat_i, a).
//
// Why the cap: the cost's derivative is unbounded near b = 0 (it grows like
// -sigma/b), so one early overshoot of x below zero would evaluate the
// gradient at the clamp floor and produce a step of order sigma/b_min that
// the diminishing schedule can never walk back. Capping each step at a
// fraction of the push-sum numerator keeps every x_i positive by induction
// (x_i >= (1 - step_cap) * v_i > 0), and the cap deactivates as gamma(t)
// shrinks, leaving the tail iteration untouched.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ratenet/adhoc.hpp"  // Readout, TraceRow
#include "ratenet/graph.hpp"
#include "ratenet/model.hpp"

namespace ratenet {

constexpr double kBMin = 1e-9;  // domain floor for gradient evaluation

struct PushState {
  Vec v;           // push-sum numerators
  Vec y;           // push-sum weights
  Vec x;           // optimization states
  Vec b_hat;       // per-node hyperparameter estimates
  Vec lambda_hat;  // per-node rate estimates
  std::int64_t t = 0;
};

// Diminishing step sizes gamma(t) = gamma0 / t^exponent for t >= 1; the
// exponent range (0.5, 1] gives a divergent sum with square-summable terms.
// step_cap in (0, 1) is the relative per-round bound described above.
struct StepSchedule {
  double gamma0 = 1.0;
  double exponent = 1.0;
  double step_cap = 0.5;

  void validate() const {
    if (!(gamma0 > 0.0))
      throw std::invalid_argument("StepSchedule: gamma0 must be positive");
    if (!(exponent > 0.5 && exponent <= 1.0))
      throw std::invalid_argument("StepSchedule: exponent outside (0.5, 1]");
    if (!(step_cap > 0.0 && step_cap < 1.0))
      throw std::invalid_argument("StepSchedule: step_cap outside (0, 1)");
  }

  double gamma(std::int64_t t) const {
    return gamma0 / std::pow(static_cast<double>(t), exponent);
  }
};

inline PushState eb_init(const NetworkData& data, double a) {
  PushState st;
  const int N = data.N;
  st.v.resize(N);
  st.y = Vec::Ones(N);
  st.x.resize(N);
  st.b_hat.resize(N);
  st.lambda_hat.resize(N);
  for (int i = 0; i < N; ++i) {
    const MonitorData& m = data.monitors[static_cast<std::size_t>(i)];
    // Guarded local estimate max(sigma,1)/(a*n): keeps zero-count nodes off
    // the domain boundary while matching sigma/(a*n) whenever sigma > 0.
    const double x0 =
        static_cast<double>(std::max<std::int64_t>(m.sigma, 1)) /
        (a * static_cast<double>(m.n));
    st.x[i] = x0;
    st.v[i] = x0;  // so b_hat(0) = v/y reproduces the declared initialization
    st.b_hat[i] = x0;
    st.lambda_hat[i] = mmse_estimate(m, st.b_hat[i], a);
  }
  st.t = 0;
  return st;
}

inline PushState eb_step(const PushState& st, const Mat& W,
                         const NetworkData& data, double a, double gamma_next,
                         double step_cap = 0.5) {
  if (W.rows() != st.x.size() || W.cols() != st.x.size())
    throw std::invalid_argument("eb_step: dimension mismatch");
  if (gamma_next < 0.0)
    throw std::invalid_argument("eb_step: negative gamma");
  if (!(step_cap > 0.0 && step_cap < 1.0))
    throw std::invalid_argument("eb_step: step_cap outside (0, 1)");
  PushState out;
  out.v = W * st.x;
  out.y = W * st.y;
  out.t = st.t + 1;
  const int N = data.N;
  out.x.resize(N);
  out.b_hat.resize(N);
  out.lambda_hat.resize(N);
  for (int i = 0; i < N; ++i) {
    const MonitorData& m = data.monitors[static_cast<std::size_t>(i)];
    const double b = std::max(out.v[i] / out.y[i], kBMin);
    out.b_hat[i] = b;
    double step = gamma_next * ml_gradient(b, m.n, m.sigma, a);
    const double limit = step_cap * std::abs(out.v[i]);
    step = std::clamp(step, -limit, limit);
    out.x[i] = out.v[i] - step;
    out.lambda_hat[i] = mmse_estimate(m, b, a);
  }
  return out;
}

struct EbRun {
  PushState final_state;
  std::vector<TraceRow> trace;        // b_hat/lambda_hat per recorded row
  double consensus_residual = 0.0;    // max_{i,k} |b_hat_i(T) - b_hat_k(T)|
};

inline double consensus_residual(const Vec& b_hat) {
  return b_hat.maxCoeff() - b_hat.minCoeff();
}

// Observer-based core; `observe` sees the initial state and every round.
inline PushState eb_run(const NetworkData& data, const GraphSchedule& sched,
                        double a, const StepSchedule& steps, std::int64_t T,
                        const std::function<void(const PushState&)>& observe) {
  if (T < 0) throw std::invalid_argument("eb_run: T < 0");
  steps.validate();
  PushState st = eb_init(data, a);
  if (observe) observe(st);
  for (std::int64_t t = 0; t < T; ++t) {
    st = eb_step(st, weights_at(sched, t), data, a, steps.gamma(t + 1),
                 steps.step_cap);
    if (observe) observe(st);
  }
  return st;
}

inline EbRun eb_run(const NetworkData& data, const GraphSchedule& sched,
                    double a, const StepSchedule& steps, std::int64_t T,
                    const Readout& readout) {
  EbRun run;
  run.final_state =
      eb_run(data, sched, a, steps, T, [&](const PushState& st) {
        detail::record_rows(readout, st, T, run.trace);
      });
  run.consensus_residual = consensus_residual(run.final_state.b_hat);
  return run;
}

}  // namespace ratenet

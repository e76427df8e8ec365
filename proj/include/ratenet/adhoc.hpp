#pragma once

// Ad-hoc distributed estimator: synchronized push-sum rounds on the pair
// (s, eta) = (count mass, sample-size mass), with per-node readouts
//   b_hat_i(t)      = s_i(t) / (a * eta_i(t))
//   lambda_hat_i(t) = mmse_estimate(n_i, sigma_i, b_hat_i(t), a).
// Column stochasticity conserves both masses, and the ratio at every node
// converges to sigma/(a*n) under joint connectivity.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ratenet/graph.hpp"
#include "ratenet/model.hpp"

namespace ratenet {

struct AdHocState {
  Vec s;           // diffused total counts
  Vec eta;         // diffused sample sizes
  Vec b_hat;       // per-node hyperparameter estimates
  Vec lambda_hat;  // per-node rate estimates
  std::int64_t t = 0;
};

namespace detail {
// Zero-count guard: a node whose accumulated count mass is still exactly
// zero (possible before any positive-count mass reaches it) substitutes 1 so
// a positive b is always available downstream. Positive masses pass through
// untouched.
inline double guarded_mass(double s) { return s > 0.0 ? s : 1.0; }
}  // namespace detail

inline AdHocState adhoc_init(const NetworkData& data, double a) {
  AdHocState st;
  const int N = data.N;
  st.s.resize(N);
  st.eta.resize(N);
  st.b_hat.resize(N);
  st.lambda_hat.resize(N);
  for (int i = 0; i < N; ++i) {
    const MonitorData& m = data.monitors[static_cast<std::size_t>(i)];
    st.s[i] = static_cast<double>(m.sigma);
    st.eta[i] = static_cast<double>(m.n);
    st.b_hat[i] = detail::guarded_mass(st.s[i]) / (a * st.eta[i]);
    st.lambda_hat[i] = mmse_estimate(m, st.b_hat[i], a);
  }
  st.t = 0;
  return st;
}

inline AdHocState adhoc_step(const AdHocState& st, const Mat& W,
                             const NetworkData& data, double a) {
  if (W.rows() != st.s.size() || W.cols() != st.s.size())
    throw std::invalid_argument("adhoc_step: dimension mismatch");
  AdHocState out;
  out.s = W * st.s;
  out.eta = W * st.eta;
  out.t = st.t + 1;
  const int N = data.N;
  out.b_hat.resize(N);
  out.lambda_hat.resize(N);
  for (int i = 0; i < N; ++i) {
    out.b_hat[i] = detail::guarded_mass(out.s[i]) / (a * out.eta[i]);
    out.lambda_hat[i] = mmse_estimate(data.monitors[static_cast<std::size_t>(i)],
                                      out.b_hat[i], a);
  }
  return out;
}

// Which rounds/nodes a run should materialize.
struct Readout {
  enum class Mode { All, Subset, FinalOnly };
  Mode mode = Mode::All;
  std::vector<int> nodes;  // 1-based; used by Subset

  static Readout all() { return {}; }
  static Readout subset(std::vector<int> nodes) {
    return {Mode::Subset, std::move(nodes)};
  }
  static Readout final_only() { return {Mode::FinalOnly, {}}; }
};

struct TraceRow {
  std::int64_t t;
  int node;  // 1-based
  double b_hat;
  double lambda_hat;
};

struct AdHocRun {
  AdHocState final_state;
  std::vector<TraceRow> trace;
};

namespace detail {
template <typename State>
void record_rows(const Readout& readout, const State& st, std::int64_t T,
                 std::vector<TraceRow>& out) {
  const bool last = st.t == T;
  switch (readout.mode) {
    case Readout::Mode::All:
      for (int i = 0; i < st.b_hat.size(); ++i)
        out.push_back({st.t, i + 1, st.b_hat[i], st.lambda_hat[i]});
      break;
    case Readout::Mode::Subset:
      for (int node : readout.nodes)
        out.push_back({st.t, node, st.b_hat[node - 1], st.lambda_hat[node - 1]});
      break;
    case Readout::Mode::FinalOnly:
      if (last)
        for (int i = 0; i < st.b_hat.size(); ++i)
          out.push_back({st.t, i + 1, st.b_hat[i], st.lambda_hat[i]});
      break;
  }
}
}  // namespace detail

// Observer-based core: `observe` is called on the initial state and after
// every round, so callers can accumulate statistics without materializing
// the full time series.
inline AdHocState adhoc_run(
    const NetworkData& data, const GraphSchedule& sched, double a,
    std::int64_t T, const std::function<void(const AdHocState&)>& observe) {
  if (T < 0) throw std::invalid_argument("adhoc_run: T < 0");
  AdHocState st = adhoc_init(data, a);
  if (observe) observe(st);
  for (std::int64_t t = 0; t < T; ++t) {
    st = adhoc_step(st, weights_at(sched, t), data, a);
    if (observe) observe(st);
  }
  return st;
}

// Materializing wrapper honoring a readout policy.
inline AdHocRun adhoc_run(const NetworkData& data, const GraphSchedule& sched,
                          double a, std::int64_t T,
                          const Readout& readout = Readout::all()) {
  AdHocRun run;
  run.final_state = adhoc_run(data, sched, a, T, [&](const AdHocState& st) {
    detail::record_rows(readout, st, T, run.trace);
  });
  return run;
}

}  // namespace ratenet

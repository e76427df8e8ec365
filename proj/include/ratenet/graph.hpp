#pragma once

// Time-varying directed communication graphs, push-sum weight matrices, and
// exact tracking of the state-transition product Phi(t).
//
// Conventions: node ids are 1-based in every public interface (matching the
// `i>k` text format); matrix storage is 0-based. A directed edge (i,k) means
// "i sends to k". Weights are column-stochastic: column k of W(t) spreads
// node k's mass uniformly over its out-neighbors plus itself,
// w_ik(t) = 1/d_k(t) with d_k counting the self-loop.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ratenet/rng.hpp"

namespace ratenet {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

using EdgeSet = std::vector<std::pair<int, int>>;  // (from, to), 1-based

namespace detail {
inline void validate_edges(int N, const EdgeSet& edges) {
  std::set<std::pair<int, int>> seen;
  for (const auto& [i, k] : edges) {
    if (i < 1 || i > N || k < 1 || k > N)
      throw std::invalid_argument("edge endpoint out of range");
    if (i == k)
      throw std::invalid_argument("explicit self-loops are not allowed; "
                                  "every node already mixes with itself");
    if (!seen.insert({i, k}).second)
      throw std::invalid_argument("duplicate directed edge");
  }
}
}  // namespace detail

struct GraphSchedule {
  enum class Kind { Fixed, ErdosRenyi, Scripted };

  int N = 0;
  Kind kind = Kind::Fixed;
  EdgeSet fixed_edges;                  // Fixed
  double p = 0.0;                       // ErdosRenyi
  std::uint64_t seed = 0;               // ErdosRenyi
  std::vector<EdgeSet> script;          // Scripted; cycles past its length

  static GraphSchedule fixed(int N, EdgeSet edges) {
    if (N < 1) throw std::invalid_argument("GraphSchedule: N < 1");
    detail::validate_edges(N, edges);
    GraphSchedule g;
    g.N = N;
    g.kind = Kind::Fixed;
    g.fixed_edges = std::move(edges);
    return g;
  }

  static GraphSchedule erdos_renyi(int N, double p, std::uint64_t seed) {
    if (N < 1) throw std::invalid_argument("GraphSchedule: N < 1");
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("GraphSchedule: p outside [0,1]");
    GraphSchedule g;
    g.N = N;
    g.kind = Kind::ErdosRenyi;
    g.p = p;
    g.seed = seed;
    return g;
  }

  static GraphSchedule scripted(int N, std::vector<EdgeSet> steps) {
    if (N < 1) throw std::invalid_argument("GraphSchedule: N < 1");
    for (const EdgeSet& e : steps) detail::validate_edges(N, e);
    GraphSchedule g;
    g.N = N;
    g.kind = Kind::Scripted;
    g.script = std::move(steps);
    return g;
  }
};

// The sparse benchmark digraph: a directed cycle 1->2->...->N->1 with four
// extra edges (3,1), (3,2), (4,1), (4,2) that unbalance it.
inline GraphSchedule cycle_with_chords(int N) {
  if (N < 5)
    throw std::invalid_argument("cycle_with_chords: needs N >= 5");
  EdgeSet edges;
  edges.reserve(static_cast<std::size_t>(N) + 4);
  for (int i = 1; i <= N; ++i) edges.push_back({i, i % N + 1});
  edges.push_back({3, 1});
  edges.push_back({3, 2});
  edges.push_back({4, 1});
  edges.push_back({4, 2});
  return GraphSchedule::fixed(N, std::move(edges));
}

// Edge set at time t. Erdos-Renyi schedules re-derive their randomness from
// (seed, t), so any time step can be replayed in isolation; scripted
// schedules repeat cyclically once t passes the script length.
inline EdgeSet edges_at(const GraphSchedule& sched, std::int64_t t) {
  if (t < 0) throw std::invalid_argument("edges_at: t < 0");
  switch (sched.kind) {
    case GraphSchedule::Kind::Fixed:
      return sched.fixed_edges;
    case GraphSchedule::Kind::ErdosRenyi: {
      Rng rng(derive_seed(sched.seed, static_cast<std::uint64_t>(t)));
      EdgeSet edges;
      for (int i = 1; i <= sched.N; ++i)
        for (int k = 1; k <= sched.N; ++k) {
          if (i == k) continue;
          if (rng.uniform01() < sched.p) edges.push_back({i, k});
        }
      return edges;
    }
    case GraphSchedule::Kind::Scripted:
      if (sched.script.empty()) return {};
      return sched.script[static_cast<std::size_t>(
          t % static_cast<std::int64_t>(sched.script.size()))];
  }
  throw std::logic_error("edges_at: unknown schedule kind");
}

// Column-stochastic push-sum weights for the edge set at t. An isolated node
// keeps its mass (identity column).
inline Mat weights_from_edges(int N, const EdgeSet& edges) {
  std::vector<int> outdeg(static_cast<std::size_t>(N), 1);  // self-loop
  for (const auto& [from, to] : edges) {
    (void)to;
    ++outdeg[static_cast<std::size_t>(from - 1)];
  }
  Mat W = Mat::Zero(N, N);
  for (int k = 0; k < N; ++k) W(k, k) = 1.0 / outdeg[static_cast<std::size_t>(k)];
  for (const auto& [from, to] : edges)
    W(to - 1, from - 1) = 1.0 / outdeg[static_cast<std::size_t>(from - 1)];
  return W;
}

inline Mat weights_at(const GraphSchedule& sched, std::int64_t t) {
  return weights_from_edges(sched.N, edges_at(sched, t));
}

// --- Strong connectivity via Tarjan's SCC ---------------------------------

namespace detail {
struct TarjanScc {
  const std::vector<std::vector<int>>& adj;  // 0-based adjacency
  std::vector<int> index, low, stack_;
  std::vector<bool> on_stack;
  int counter = 0, components = 0;

  explicit TarjanScc(const std::vector<std::vector<int>>& a)
      : adj(a), index(a.size(), -1), low(a.size(), 0),
        on_stack(a.size(), false) {}

  // Iterative DFS: recursion depth would scale with N on a cycle.
  void run(int root) {
    struct Frame { int v; std::size_t next; };
    std::vector<Frame> frames{{root, 0}};
    index[root] = low[root] = counter++;
    stack_.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.next < adj[f.v].size()) {
        const int w = adj[f.v][f.next++];
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack_.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
      } else {
        if (low[f.v] == index[f.v]) {
          ++components;
          int w;
          do {
            w = stack_.back();
            stack_.pop_back();
            on_stack[w] = false;
          } while (w != f.v);
        }
        const int v = f.v;
        frames.pop_back();
        if (!frames.empty())
          low[frames.back().v] = std::min(low[frames.back().v], low[v]);
      }
    }
  }
};
}  // namespace detail

// True iff the digraph on N nodes with the given edges is strongly connected
// (single SCC spanning all nodes).
inline bool strongly_connected(int N, const EdgeSet& edges) {
  if (N == 1) return true;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(N));
  for (const auto& [from, to] : edges)
    adj[static_cast<std::size_t>(from - 1)].push_back(to - 1);
  detail::TarjanScc scc(adj);
  for (int v = 0; v < N; ++v)
    if (scc.index[static_cast<std::size_t>(v)] < 0) scc.run(v);
  return scc.components == 1;
}

struct ConnectivityReport {
  bool ok = true;
  std::int64_t first_fail_window = -1;  // window index t of [tQ, (t+1)Q)
};

// Uniform joint strong connectivity check: unions the edge sets over each
// complete window [tQ, (t+1)Q) inside the horizon and verifies the union is
// strongly connected.
inline ConnectivityReport verify_joint_connectivity(const GraphSchedule& sched,
                                                    std::int64_t Q,
                                                    std::int64_t horizon) {
  if (Q < 1) throw std::invalid_argument("verify_joint_connectivity: Q < 1");
  if (horizon < Q)
    throw std::invalid_argument("verify_joint_connectivity: horizon < Q");
  for (std::int64_t w = 0; (w + 1) * Q <= horizon; ++w) {
    std::set<std::pair<int, int>> all;
    for (std::int64_t tau = w * Q; tau < (w + 1) * Q; ++tau)
      for (const auto& e : edges_at(sched, tau)) all.insert(e);
    EdgeSet union_edges(all.begin(), all.end());
    if (!strongly_connected(sched.N, union_edges)) return {false, w};
  }
  return {true, -1};
}

// --- State-transition product tracking -------------------------------------

// Maintains Phi(t) = W(t-1)...W(0) with Phi(0) = I, its row-spread
// ergodicity coefficient delta, and the running minimum row sum mu_hat.
//
// delta(Phi) = max_i (max_k phi_ik - min_k phi_ik): zero exactly when every
// row is internally constant, which is the consensus form the push-sum ratio
// converges to. mu_hat lower-bounds every row sum seen so far; the variance
// convergence bound consumes exactly these two diagnostics.
struct TransitionTracker {
  Mat phi;
  std::int64_t t = 0;
  double delta = 1.0;
  double mu_hat = 1.0;

  static TransitionTracker identity(int N) {
    TransitionTracker tr;
    tr.phi = Mat::Identity(N, N);
    tr.t = 0;
    tr.delta = N >= 2 ? 1.0 : 0.0;
    tr.mu_hat = 1.0;
    return tr;
  }

  void recompute_diagnostics() {
    delta = 0.0;
    double min_row_sum = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < phi.rows(); ++i) {
      const auto row = phi.row(i);
      delta = std::max(delta, row.maxCoeff() - row.minCoeff());
      min_row_sum = std::min(min_row_sum, row.sum());
    }
    mu_hat = std::min(mu_hat, min_row_sum);
  }
};

[[nodiscard]] inline TransitionTracker tracker_step(const TransitionTracker& tr,
                                                    const Mat& W) {
  if (W.rows() != tr.phi.rows() || W.cols() != tr.phi.rows())
    throw std::invalid_argument("tracker_step: dimension mismatch");
  TransitionTracker out;
  out.phi = W * tr.phi;
  out.t = tr.t + 1;
  out.mu_hat = tr.mu_hat;
  out.recompute_diagnostics();
  return out;
}

// --- Scripted-schedule text format -----------------------------------------

// One line per time step with comma-separated `i>k` directed edges; a blank
// line is an empty edge set. Whitespace around tokens is ignored.
inline std::vector<EdgeSet> parse_script(std::istream& in) {
  std::vector<EdgeSet> steps;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    EdgeSet edges;
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) {
      const auto first = token.find_first_not_of(" \t");
      if (first == std::string::npos) continue;
      const auto last = token.find_last_not_of(" \t");
      token = token.substr(first, last - first + 1);
      const auto gt = token.find('>');
      if (gt == std::string::npos)
        throw std::invalid_argument("script line " + std::to_string(lineno) +
                                    ": expected i>k, got '" + token + "'");
      int i = 0, k = 0;
      try {
        i = std::stoi(token.substr(0, gt));
        k = std::stoi(token.substr(gt + 1));
      } catch (const std::exception&) {
        throw std::invalid_argument("script line " + std::to_string(lineno) +
                                    ": bad edge '" + token + "'");
      }
      edges.push_back({i, k});
    }
    steps.push_back(std::move(edges));
  }
  return steps;
}

inline GraphSchedule load_script(int N, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schedule script: " + path);
  return GraphSchedule::scripted(N, parse_script(in));
}

}  // namespace ratenet

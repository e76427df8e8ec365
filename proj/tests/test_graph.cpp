#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <vector>

#include "ratenet/graph.hpp"
#include "ratenet/rng.hpp"

using namespace ratenet;

namespace {

// Reachability-closure oracle for strong connectivity (Floyd-Warshall).
bool oracle_strongly_connected(int N, const EdgeSet& edges) {
  std::vector<std::vector<bool>> reach(
      static_cast<std::size_t>(N), std::vector<bool>(static_cast<std::size_t>(N)));
  for (int v = 0; v < N; ++v) reach[v][v] = true;
  for (const auto& [from, to] : edges) reach[from - 1][to - 1] = true;
  for (int k = 0; k < N; ++k)
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        if (reach[i][k] && reach[k][j]) reach[i][j] = true;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      if (!reach[i][j]) return false;
  return true;
}

}  // namespace

TEST_CASE("ring-with-chords topology") {
  const GraphSchedule sched = cycle_with_chords(20);
  const EdgeSet edges = edges_at(sched, 0);
  REQUIRE(edges.size() == 24);  // 20 ring edges + 4 chords
  REQUIRE(edges_at(sched, 17) == edges);

  const Mat W = weights_at(sched, 0);
  for (int k = 0; k < 20; ++k)
    REQUIRE(W.col(k).sum() == Catch::Approx(1.0).margin(1e-12));

  // Node 3 sends to 4 (ring), 1 and 2 (chords), and itself: weight 1/4 each.
  for (int row = 0; row < 20; ++row) {
    const double expected = row <= 3 ? 0.25 : 0.0;
    REQUIRE(W(row, 2) == Catch::Approx(expected).margin(1e-15));
  }
}

TEST_CASE("weight matrix basics") {
  SECTION("two-node complete graph averages evenly") {
    const Mat W = weights_from_edges(2, {{1, 2}, {2, 1}});
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        REQUIRE(W(i, j) == Catch::Approx(0.5).margin(1e-15));
  }
  SECTION("no edges leaves every node holding its own mass") {
    const Mat W = weights_from_edges(3, {});
    REQUIRE(W.isApprox(Mat::Identity(3, 3)));
  }
  SECTION("isolated sender column stays a unit vector") {
    const Mat W = weights_from_edges(3, {{1, 2}});
    REQUIRE(W(2, 2) == 1.0);
    REQUIRE(W(0, 0) == 0.5);
    REQUIRE(W(1, 0) == 0.5);
  }
}

TEST_CASE("edge validation rejects malformed edge sets") {
  REQUIRE_THROWS_AS(GraphSchedule::fixed(3, {{1, 1}}), std::invalid_argument);
  REQUIRE_THROWS_AS(GraphSchedule::fixed(3, {{1, 2}, {1, 2}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(GraphSchedule::fixed(3, {{0, 2}}), std::invalid_argument);
  REQUIRE_THROWS_AS(GraphSchedule::fixed(3, {{1, 4}}), std::invalid_argument);
  REQUIRE_THROWS_AS(GraphSchedule::scripted(2, {{{1, 3}}}),
                    std::invalid_argument);
}

TEST_CASE("random schedule is deterministic and honors the density") {
  const GraphSchedule s1 = GraphSchedule::erdos_renyi(10, 0.3, 77);
  const GraphSchedule s2 = GraphSchedule::erdos_renyi(10, 0.3, 77);
  const GraphSchedule s3 = GraphSchedule::erdos_renyi(10, 0.3, 78);
  REQUIRE(edges_at(s1, 5) == edges_at(s2, 5));
  REQUIRE(edges_at(s1, 5) != edges_at(s1, 6));
  REQUIRE(edges_at(s1, 5) != edges_at(s3, 5));

  REQUIRE(edges_at(GraphSchedule::erdos_renyi(10, 0.0, 1), 3).empty());
  REQUIRE(edges_at(GraphSchedule::erdos_renyi(10, 1.0, 1), 3).size() == 90);

  std::int64_t total = 0;
  const std::int64_t rounds = 200;
  for (std::int64_t t = 0; t < rounds; ++t)
    total += static_cast<std::int64_t>(edges_at(s1, t).size());
  const double freq = static_cast<double>(total) / (rounds * 90.0);
  REQUIRE(std::abs(freq - 0.3) < 0.02);
}

TEST_CASE("scripted schedule cycles through its steps") {
  const std::vector<EdgeSet> steps = {{{1, 2}}, {}, {{2, 1}, {1, 2}}};
  const GraphSchedule sched = GraphSchedule::scripted(2, steps);
  REQUIRE(edges_at(sched, 0) == steps[0]);
  REQUIRE(edges_at(sched, 1).empty());
  REQUIRE(edges_at(sched, 2) == steps[2]);
  REQUIRE(edges_at(sched, 3) == steps[0]);  // wraps around
  REQUIRE(edges_at(sched, 7) == steps[1]);
  // An empty step produces the identity update.
  REQUIRE(weights_at(sched, 1).isApprox(Mat::Identity(2, 2)));
}

TEST_CASE("schedule text parsing") {
  SECTION("edges, blank lines, whitespace, CRLF") {
    std::istringstream in("1>2, 2>3\n\n 3>1 \r\n");
    const auto steps = parse_script(in);
    REQUIRE(steps.size() == 3);
    REQUIRE(steps[0] == EdgeSet{{1, 2}, {2, 3}});
    REQUIRE(steps[1].empty());
    REQUIRE(steps[2] == EdgeSet{{3, 1}});
  }
  SECTION("missing separator reports the line") {
    std::istringstream in("1>2\n12\n");
    REQUIRE_THROWS_WITH(parse_script(in),
                        Catch::Matchers::ContainsSubstring("line 2"));
  }
  SECTION("non-numeric endpoint reports the token") {
    std::istringstream in("x>2\n");
    REQUIRE_THROWS_WITH(parse_script(in),
                        Catch::Matchers::ContainsSubstring("x>2"));
  }
  SECTION("dangling edge head") {
    std::istringstream in("1>\n");
    REQUIRE_THROWS_AS(parse_script(in), std::invalid_argument);
  }
  SECTION("missing file") {
    REQUIRE_THROWS_AS(load_script(4, "/nonexistent/schedule.txt"),
                      std::runtime_error);
  }
}

TEST_CASE("strong connectivity matches a reachability-closure oracle") {
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    const int N = 2 + static_cast<int>(rng.u64() % 7);  // 2..8
    EdgeSet edges;
    for (int i = 1; i <= N; ++i)
      for (int k = 1; k <= N; ++k)
        if (i != k && rng.uniform01() < 0.25) edges.push_back({i, k});
    REQUIRE(strongly_connected(N, edges) ==
            oracle_strongly_connected(N, edges));
  }
  REQUIRE(strongly_connected(1, {}));
  REQUIRE_FALSE(strongly_connected(2, {}));
  REQUIRE_FALSE(strongly_connected(3, {{1, 2}, {2, 3}}));
  REQUIRE(strongly_connected(3, {{1, 2}, {2, 3}, {3, 1}}));
}

TEST_CASE("joint-connectivity window scan") {
  SECTION("fixed connected topology passes every window") {
    const auto rep = verify_joint_connectivity(cycle_with_chords(20), 1, 10);
    REQUIRE(rep.ok);
    REQUIRE(rep.first_fail_window == -1);
  }
  SECTION("alternating half-rings connect only over a two-step union") {
    const std::vector<EdgeSet> steps = {{{1, 2}, {2, 3}}, {{3, 4}, {4, 1}}};
    const GraphSchedule sched = GraphSchedule::scripted(4, steps);
    const auto rep1 = verify_joint_connectivity(sched, 1, 4);
    REQUIRE_FALSE(rep1.ok);
    REQUIRE(rep1.first_fail_window == 0);
    const auto rep2 = verify_joint_connectivity(sched, 2, 4);
    REQUIRE(rep2.ok);
  }
  SECTION("parameter validation") {
    REQUIRE_THROWS_AS(verify_joint_connectivity(cycle_with_chords(5), 0, 10),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(verify_joint_connectivity(cycle_with_chords(5), 5, 4),
                      std::invalid_argument);
  }
}

TEST_CASE("transition product tracking") {
  SECTION("identity start") {
    const TransitionTracker tr = TransitionTracker::identity(4);
    REQUIRE(tr.t == 0);
    REQUIRE(tr.delta == 1.0);
    REQUIRE(tr.mu_hat == 1.0);
    REQUIRE(TransitionTracker::identity(1).delta == 0.0);
  }
  SECTION("complete graph mixes in one step") {
    EdgeSet edges;
    for (int i = 1; i <= 4; ++i)
      for (int k = 1; k <= 4; ++k)
        if (i != k) edges.push_back({i, k});
    const Mat W = weights_from_edges(4, edges);
    const TransitionTracker tr =
        tracker_step(TransitionTracker::identity(4), W);
    REQUIRE(tr.t == 1);
    REQUIRE(tr.delta == Catch::Approx(0.0).margin(1e-15));
    // This W is doubly stochastic, so row sums stay exactly 1.
    REQUIRE(tr.mu_hat == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("column stochasticity is preserved across many random steps") {
    const GraphSchedule sched = GraphSchedule::erdos_renyi(8, 0.3, 12);
    TransitionTracker tr = TransitionTracker::identity(8);
    for (std::int64_t t = 0; t < 50; ++t)
      tr = tracker_step(tr, weights_at(sched, t));
    for (int k = 0; k < 8; ++k)
      REQUIRE(tr.phi.col(k).sum() == Catch::Approx(1.0).margin(1e-10));
    REQUIRE(tr.mu_hat > 0.0);
    REQUIRE(tr.mu_hat <= 1.0);
    REQUIRE(tr.delta >= 0.0);
  }
  SECTION("dimension mismatch is rejected") {
    REQUIRE_THROWS_AS(
        tracker_step(TransitionTracker::identity(3), Mat::Identity(4, 4)),
        std::invalid_argument);
  }
}

TEST_CASE("ergodicity coefficient decays geometrically on a fixed graph") {
  const GraphSchedule sched = cycle_with_chords(12);
  const Mat W = weights_at(sched, 0);
  TransitionTracker tr = TransitionTracker::identity(12);
  std::vector<double> ts, logs;
  for (std::int64_t t = 0; t < 150; ++t) {
    tr = tracker_step(tr, W);
    if (t >= 10 && tr.delta > 1e-280) {
      ts.push_back(static_cast<double>(t));
      logs.push_back(std::log(tr.delta));
    }
  }
  REQUIRE(ts.size() > 50);
  const auto n = static_cast<double>(ts.size());
  double st = 0, sl = 0, stt = 0, stl = 0, sll = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sl += logs[i];
    stt += ts[i] * ts[i];
    stl += ts[i] * logs[i];
    sll += logs[i] * logs[i];
  }
  const double slope = (n * stl - st * sl) / (n * stt - st * st);
  const double r_num = n * stl - st * sl;
  const double r2 = r_num * r_num / ((n * stt - st * st) * (n * sll - sl * sl));
  REQUIRE(slope < 0.0);
  REQUIRE(r2 > 0.9);
  REQUIRE(tr.delta < 1e-8);
}

// End-to-end acceptance checks, one per command-line argument (1..10).
// Each check prints a single [PASS]/[FAIL] line with its measured margins
// and exits 0 on pass, 1 on fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ratenet/adhoc.hpp"
#include "ratenet/config.hpp"
#include "ratenet/graph.hpp"
#include "ratenet/model.hpp"
#include "ratenet/montecarlo.hpp"
#include "ratenet/rng.hpp"
#include "ratenet/subgradient.hpp"
#include "ratenet/theory.hpp"

using namespace ratenet;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::vector<std::int64_t> split_sizes(int N, std::int64_t n_max) {
  std::vector<std::int64_t> sizes(static_cast<std::size_t>(N), 1);
  for (int i = 0; i < N / 2; ++i) sizes[static_cast<std::size_t>(i)] = n_max;
  return sizes;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 1. Every node's ratio estimate reaches the pooled network value on the
//    fixed 20-node topology, to 1e-8, for 100 independent trials, in < 5 s.
Outcome consensus_limit() {
  const HyperParams hp;
  const auto sizes = split_sizes(20, 50);
  const Mat W = weights_at(cycle_with_chords(20), 0);
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::int64_t m = 0; m < 100; ++m) {
    const TrialSeeds seeds = trial_seeds(1, m, true);
    const NetworkData data = sample_network(hp, sizes, seeds.data);
    AdHocState st = adhoc_init(data, hp.a);
    for (int t = 0; t < 2000; ++t) st = adhoc_step(st, W, data, hp.a);
    const double target = b_hom(data, hp.a);
    worst = std::max(worst, (st.b_hat.array() - target).abs().maxCoeff());
  }
  const double secs = seconds_since(start);
  return {worst < 1e-8 && secs < 5.0,
          "100/100 trials, worst final gap " + fmt(worst) +
              " (require < 1e-8), runtime " + fmt(secs) + " s (require < 5)"};
}

// 2. On an equal-sample-size network the pooled ratio estimate IS the
//    network likelihood optimum: agreement to 1e-8 relative, per trial.
Outcome pooled_equivalence() {
  const HyperParams hp;
  const std::vector<std::int64_t> sizes(20, 5);
  double worst = 0.0;
  for (std::int64_t m = 0; m < 100; ++m) {
    const TrialSeeds seeds = trial_seeds(2, m, true);
    const NetworkData data = sample_network(hp, sizes, seeds.data);
    const double pooled = b_hom(data, hp.a);
    const double ml = centralized_ml(data, hp.a);
    worst = std::max(worst, std::abs(ml - pooled) / pooled);
  }
  return {worst < 1e-8, "100 trials, worst relative gap " + fmt(worst) +
                            " (require < 1e-8)"};
}

// 3. The distributed scale estimate is unbiased at every round: the sample
//    mean over 10^4 trials stays within 3 standard errors of the true scale
//    at rounds 0, 5, 50, and the final round, for all four tracked nodes.
Outcome unbiasedness() {
  ExperimentConfig cfg;
  cfg.trials = 10000;
  cfg.rounds = 200;
  cfg.seed = 3;
  cfg.estimators = {Estimator::AdHoc};
  cfg.validate();
  const MonteCarloResult res = run_montecarlo(cfg);

  double worst_z = 0.0;
  int cells = 0;
  for (const int node : cfg.resolved_tracked_nodes()) {
    for (const std::int64_t t : {std::int64_t{0}, std::int64_t{5},
                                 std::int64_t{50}, cfg.rounds}) {
      const auto it = res.stats.find({"adhoc_b", node, t});
      if (it == res.stats.end())
        return {false, "missing series for node " + std::to_string(node) +
                           " at t=" + std::to_string(t)};
      const Welford& w = it->second.value;
      worst_z = std::max(worst_z,
                         std::abs(w.mean - cfg.hp.b) / w.se_mean());
      ++cells;
    }
  }
  return {worst_z <= 3.0, std::to_string(cells) +
                              " node/round cells, worst |mean-b|/SE = " +
                              fmt(worst_z) + " (require <= 3)"};
}

// 4. The closed-form transient variance predicts the sample RMSE of the
//    distributed scale estimate within 3% at every round for all four
//    tracked nodes on the fixed topology, 10^4 trials, in < 2 min.
Outcome transient_rmse() {
  ExperimentConfig cfg;
  cfg.trials = 10000;
  cfg.seed = 4;
  cfg.estimators = {Estimator::AdHoc};
  const auto start = std::chrono::steady_clock::now();
  const Fig34Result fig = run_fig34(cfg, /*random_graph=*/false);
  const double secs = seconds_since(start);

  double worst = 0.0;
  for (std::size_t k = 0; k < fig.rmse_mc.size(); ++k)
    for (std::size_t t = 0; t < fig.rmse_mc[k].size(); ++t) {
      const double theory = fig.rmse_theory[k][t];
      worst = std::max(worst, std::abs(fig.rmse_mc[k][t] - theory) / theory);
    }
  return {worst <= 0.03 && secs < 120.0,
          fmt(static_cast<double>(fig.T)) + " rounds x " +
              std::to_string(fig.tracked.size()) +
              " nodes, worst relative RMSE gap " + fmt(worst) +
              " (require <= 0.03), runtime " + fmt(secs) +
              " s (require < 120)"};
}

// 5. The variance-deviation bound holds at every round of every schedule
//    tried: fixed, frozen sparse random, and a cyclic script with quiet
//    steps. Zero violations permitted.
Outcome variance_bound() {
  const HyperParams hp;
  double worst = -1.0;
  std::int64_t rounds = 0;

  const TheoryTrace fixed = verify_variance_bound(
      hp, split_sizes(20, 50), cycle_with_chords(20), 2000);
  worst = std::max(worst, fixed.max_bound_excess);
  rounds += fixed.rounds_checked;

  const TheoryTrace sparse = verify_variance_bound(
      hp, split_sizes(20, 50),
      GraphSchedule::erdos_renyi(20, 0.01, derive_seed(5, 0)), 2000);
  worst = std::max(worst, sparse.max_bound_excess);
  rounds += sparse.rounds_checked;

  const std::vector<EdgeSet> steps = {
      {{1, 2}, {2, 3}}, {}, {{3, 4}, {4, 5}}, {{5, 6}, {6, 1}}};
  const TheoryTrace scripted = verify_variance_bound(
      hp, split_sizes(6, 10), GraphSchedule::scripted(6, steps), 600);
  worst = std::max(worst, scripted.max_bound_excess);
  rounds += scripted.rounds_checked;

  return {worst <= 0.0, "3 schedules, " + std::to_string(rounds) +
                            " node-rounds checked, max bound excess " +
                            fmt(worst) + " (require <= 0)"};
}

// 6. Across network sizes the likelihood fit attains the estimation lower
//    bound within 5%, the pooled estimate matches its closed-form RMSE
//    within 3%, and the likelihood fit is never worse than the pooled one.
Outcome lower_bound_attainment() {
  ExperimentConfig cfg;
  cfg.trials = 10000;
  cfg.seed = 6;
  cfg.n_sweep = {8, 16, 32};
  cfg.estimators = {Estimator::BHom, Estimator::CentralizedMl};
  const Fig5Result fig = run_fig5(cfg);

  bool ok = true;
  double worst_ml = 0.0, worst_bhom = 0.0;
  std::string order;
  for (const Fig5Row& row : fig.rows) {
    const double ml_gap = std::abs(row.rmse_mc_ml - row.crb_sqrt) / row.crb_sqrt;
    const double bhom_gap =
        std::abs(row.rmse_mc_bhom - row.rmse_theory_bhom) / row.rmse_theory_bhom;
    worst_ml = std::max(worst_ml, ml_gap);
    worst_bhom = std::max(worst_bhom, bhom_gap);
    ok = ok && ml_gap <= 0.05 && bhom_gap <= 0.03 &&
         row.rmse_mc_ml <= row.rmse_mc_bhom;
    if (row.rmse_mc_ml > row.rmse_mc_bhom)
      order = ", ML worse than pooled at N=" + std::to_string(row.N);
  }
  return {ok, "N in {8,16,32}: worst ML-vs-bound gap " + fmt(worst_ml) +
                  " (<= 0.05), worst pooled-vs-theory gap " + fmt(worst_bhom) +
                  " (<= 0.03)" + order};
}

// 7. Normalized rate-estimation error in the sweep over network size:
//    both distributed estimators decrease in N (one noise-level inversion
//    allowed), the optimized fit is at least as good as the pooled one at
//    every N (within one paired standard error), they coincide within 2%
//    by N=16, and the N=64 value sits within 5% of the closed-form floor.
Outcome sweep_behavior() {
  ExperimentConfig cfg;
  cfg.trials = 10000;
  cfg.seed = 7;
  cfg.estimators = {Estimator::Dec, Estimator::AdHoc, Estimator::Eb};
  const Fig6Result fig = run_fig6(cfg);
  const std::vector<Fig6Row>& rows = fig.rows;

  std::string fails;

  // Monotone decrease with at most one inversion per estimator, and any
  // inversion no larger than twice the combined standard error.
  for (const bool use_eb : {false, true}) {
    int inversions = 0;
    for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
      const double r0 = use_eb ? rows[k].rmse_eb : rows[k].rmse_adhoc;
      const double r1 = use_eb ? rows[k + 1].rmse_eb : rows[k + 1].rmse_adhoc;
      const double se0 = use_eb ? rows[k].se_rmse_eb : rows[k].se_rmse_adhoc;
      const double se1 =
          use_eb ? rows[k + 1].se_rmse_eb : rows[k + 1].se_rmse_adhoc;
      if (r1 > r0) {
        ++inversions;
        if (r1 - r0 > 2.0 * std::sqrt(se0 * se0 + se1 * se1))
          fails += std::string(", ") + (use_eb ? "eb" : "adhoc") +
                   " inversion beyond noise at N=" +
                   std::to_string(rows[k + 1].N);
      }
    }
    if (inversions > 1)
      fails += std::string(", ") + (use_eb ? "eb" : "adhoc") + " has " +
               std::to_string(inversions) + " inversions";
  }

  // Optimized fit no worse than the pooled one, judged on the paired
  // squared-error difference under common random numbers.
  for (const Fig6Row& row : rows)
    if (row.paired_mse_diff > row.paired_mse_diff_se)
      fails += ", eb worse than adhoc beyond 1 SE at N=" +
               std::to_string(row.N);

  double gap16 = -1.0, gap64 = -1.0;
  for (const Fig6Row& row : rows) {
    if (row.N == 16) {
      gap16 = std::abs(row.rmse_adhoc - row.rmse_eb) / row.rmse_eb;
      if (gap16 >= 0.02) fails += ", estimators differ by " + fmt(gap16) +
                                  " at N=16 (require < 0.02)";
    }
    if (row.N == 64) {
      gap64 = std::abs(row.rmse_adhoc - row.rmse_asymptote) /
              row.rmse_asymptote;
      if (gap64 >= 0.05)
        fails += ", N=64 value " + fmt(gap64) +
                 " from the asymptote (require < 0.05)";
    }
  }

  return {fails.empty(),
          fails.empty()
              ? "6 sweep points: coincidence gap " + fmt(gap16) +
                    " at N=16, asymptote gap " + fmt(gap64) + " at N=64"
              : "violations" + fails};
}

// 8. The distributed likelihood optimizer lands on the centralized optimum
//    (within 1e-3, every node) on 20 random inhomogeneous instances.
Outcome optimizer_equivalence() {
  const HyperParams hp;
  const Mat W = weights_at(cycle_with_chords(20), 0);
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    Rng size_rng(derive_seed(8, k));
    std::vector<std::int64_t> sizes(20);
    for (auto& s : sizes)
      s = 1 + static_cast<std::int64_t>(size_rng.u64() % 50);
    const NetworkData data =
        sample_network(hp, sizes, derive_seed(derive_seed(8, k), 1));

    PushState st = eb_init(data, hp.a);
    for (std::int64_t t = 0; t < 100000; ++t)
      st = eb_step(st, W, data, hp.a, 1.0 / static_cast<double>(t + 1));
    const double ml = centralized_ml(data, hp.a);
    worst = std::max(worst, (st.b_hat.array() - ml).abs().maxCoeff());
  }
  return {worst < 1e-3, "20 instances, worst node-vs-optimum gap " +
                            fmt(worst) + " (require < 1e-3)"};
}

// 9. Always-on property suites: analytic gradient vs finite differences,
//    mass conservation, column stochasticity of the mixing products,
//    marginal pmf normalization, the exact zero-variance reduction of the
//    finite-network moments, and the RMSE composition identity.
Outcome property_suites() {
  std::string fails;
  const HyperParams hp;

  {  // gradient vs central finite differences, 1000 random tuples
    Rng rng(901);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const std::int64_t n = 1 + static_cast<std::int64_t>(rng.u64() % 50);
      const std::int64_t sigma = static_cast<std::int64_t>(rng.u64() % 500);
      const double a = 0.5 + 20.0 * rng.uniform01();
      const double b =
          std::exp(std::log(1e-3) + std::log(1e6) * rng.uniform01());
      const double h = 1e-5 * b;
      const double fd =
          (ml_cost(b + h, n, sigma, a) - ml_cost(b - h, n, sigma, a)) /
          (2.0 * h);
      const double g = ml_gradient(b, n, sigma, a);
      worst = std::max(worst,
                       std::abs(g - fd) / std::max(1.0, std::abs(g)));
    }
    if (worst >= 1e-6) fails += ", gradient gap " + fmt(worst);
  }

  {  // mass conservation per round on a changing random graph
    const NetworkData data = sample_network(hp, split_sizes(10, 20), 91);
    const GraphSchedule sched = GraphSchedule::erdos_renyi(10, 0.3, 92);
    AdHocState st = adhoc_init(data, hp.a);
    const double s0 = st.s.sum(), e0 = st.eta.sum();
    double worst = 0.0;
    for (std::int64_t t = 0; t < 200; ++t) {
      st = adhoc_step(st, weights_at(sched, t), data, hp.a);
      worst = std::max(worst, std::abs(st.s.sum() - s0) / s0);
      worst = std::max(worst, std::abs(st.eta.sum() - e0) / e0);
    }
    if (worst >= 1e-8) fails += ", mass drift " + fmt(worst);
  }

  {  // column sums of the weights and their running product
    const GraphSchedule sched = GraphSchedule::erdos_renyi(8, 0.25, 93);
    TransitionTracker tr = TransitionTracker::identity(8);
    double worst = 0.0;
    for (std::int64_t t = 0; t < 300; ++t) {
      const Mat W = weights_at(sched, t);
      for (int c = 0; c < 8; ++c)
        worst = std::max(worst, std::abs(W.col(c).sum() - 1.0));
      tr = tracker_step(tr, W);
      for (int c = 0; c < 8; ++c)
        worst = std::max(worst, std::abs(tr.phi.col(c).sum() - 1.0));
    }
    if (worst >= 1e-10) fails += ", column-sum drift " + fmt(worst);
  }

  {  // marginal pmf sums to one for single-observation monitors
    for (const auto& [a, b] : std::vector<std::pair<double, double>>{
             {10.0, 1.0}, {2.0, 0.5}}) {
      double total = 0.0;
      for (std::int64_t y = 0; y <= 400; ++y)
        total += std::exp(log_marginal(MonitorData(1, {y}), b, a));
      if (std::abs(total - 1.0) >= 1e-6)
        fails += ", pmf mass " + fmt(total) + " at a=" + fmt(a);
    }
  }

  {  // zero scale variance reduces the corrected moments exactly
    Rng rng(94);
    for (int i = 0; i < 200; ++i) {
      TheoryInputs in;
      in.hp.a = 0.5 + 15.0 * rng.uniform01();
      in.hp.b = 0.05 + 5.0 * rng.uniform01();
      in.sizes = {1 + static_cast<std::int64_t>(rng.u64() % 50)};
      in.j = 1;
      in.lambda_j = 0.1 + 20.0 * rng.uniform01();
      const Moments lim = eb_asymptotic_moments(in);
      const Moments fin = adhoc_transient_moments(in, 0.0);
      if (fin.mean != lim.mean || fin.var != lim.var) {
        fails += ", zero-variance reduction is inexact";
        break;
      }
    }
  }

  {  // rmse composition identity at machine precision
    Rng rng(95);
    for (int i = 0; i < 200; ++i) {
      const double mean = -10.0 + 20.0 * rng.uniform01();
      const double var = 10.0 * rng.uniform01();
      const double truth = -10.0 + 20.0 * rng.uniform01();
      const double r = rmse(mean, var, truth);
      const double expanded = var + (mean - truth) * (mean - truth);
      if (std::abs(r * r - expanded) > 8.0 * 2.2e-16 * expanded) {
        fails += ", rmse identity drift";
        break;
      }
    }
  }

  return {fails.empty(),
          fails.empty() ? "6 property suites clean" : "violations" + fails};
}

// 10. Identical configuration and seed give byte-identical CSV artifacts
//     whether the trials run on one worker or four.
Outcome determinism() {
  const std::filesystem::path root =
      std::filesystem::temp_directory_path() /
      ("ratenet-acceptance-" + std::to_string(::getpid()));
  std::filesystem::create_directories(root);

  nlohmann::json base = {
      {"N", 10},
      {"sizes", {{"policy", "half_max_half_one"}, {"n_max", 20}}},
      {"schedule", {{"kind", "erdos_renyi"}, {"p", 0.2}}},
      {"trials", 200},
      {"rounds", 50},
      {"seed", 10},
      {"estimators", {"dec", "bhom", "centralized_ml", "adhoc", "eb"}},
  };

  std::string fails;

  {  // statistics pipeline
    ExperimentConfig serial = parse_config(base);
    serial.jobs = 1;
    serial.out_dir = (root / "serial").string();
    ExperimentConfig parallel = parse_config(base);
    parallel.jobs = 4;
    parallel.out_dir = (root / "parallel").string();
    montecarlo_command(serial);
    montecarlo_command(parallel);
    const std::string a = read_file(root / "serial" / "stats.csv");
    const std::string b = read_file(root / "parallel" / "stats.csv");
    if (a.empty() || a != b) fails += ", stats.csv differs across jobs";
  }

  {  // sweep pipeline
    nlohmann::json sweep = base;
    sweep["trials"] = 128;
    sweep["n_sweep"] = {2, 4};
    ExperimentConfig serial = parse_config(sweep);
    serial.jobs = 1;
    serial.out_dir = (root / "sweep-serial").string();
    ExperimentConfig parallel = parse_config(sweep);
    parallel.jobs = 4;
    parallel.out_dir = (root / "sweep-parallel").string();
    figure_command(serial, "fig6");
    figure_command(parallel, "fig6");
    const std::string a = read_file(root / "sweep-serial" / "fig6.csv");
    const std::string b = read_file(root / "sweep-parallel" / "fig6.csv");
    if (a.empty() || a != b) fails += ", fig6.csv differs across jobs";
  }

  std::filesystem::remove_all(root);
  return {fails.empty(), fails.empty()
                             ? "stats.csv and fig6.csv byte-identical with "
                               "jobs=1 and jobs=4"
                             : "violations" + fails};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <criterion 1..10>\n", argv[0]);
    return 2;
  }
  const int k = std::atoi(argv[1]);
  Outcome out;
  try {
    switch (k) {
      case 1: out = consensus_limit(); break;
      case 2: out = pooled_equivalence(); break;
      case 3: out = unbiasedness(); break;
      case 4: out = transient_rmse(); break;
      case 5: out = variance_bound(); break;
      case 6: out = lower_bound_attainment(); break;
      case 7: out = sweep_behavior(); break;
      case 8: out = optimizer_equivalence(); break;
      case 9: out = property_suites(); break;
      case 10: out = determinism(); break;
      default:
        std::fprintf(stderr, "criterion must be 1..10, got %s\n", argv[1]);
        return 2;
    }
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  std::printf("[%s] criterion %d: %s\n", out.ok ? "PASS" : "FAIL", k,
              out.detail.c_str());
  return out.ok ? 0 : 1;
}

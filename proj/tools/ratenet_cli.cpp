// Command-line front end for the simulator and analysis toolkit.
//
//   simulate            one seeded trial with full per-round readout
//   montecarlo          seeded multi-trial sweep of the configured estimators
//   figure <id>         reproduce one of the four figure data sets
//   theory              print the closed-form report for a configuration
//   check-connectivity  verify uniform joint strong connectivity windows
//
// Every subcommand reads an optional JSON configuration (--config) and
// accepts flag overrides for the common fields. Commands that write
// artifacts also write run-manifest.json with checksums for reproduction.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ratenet/montecarlo.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> trials;
  std::optional<std::int64_t> rounds;
  std::optional<std::string> out_dir;
  std::optional<int> jobs;
  bool freeze_graph = false;
};

void add_common_options(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config_path,
                  "JSON configuration file (defaults apply when omitted)");
  cmd->add_option("--seed", ov.seed, "base seed for all derived randomness");
  cmd->add_option("--trials", ov.trials, "number of Monte Carlo trials (M)");
  cmd->add_option("--rounds", ov.rounds, "number of communication rounds (T)");
  cmd->add_option("--out-dir", ov.out_dir, "directory for CSV artifacts");
  cmd->add_option("--jobs", ov.jobs,
                  "worker threads (results are identical for any value)");
  cmd->add_flag("--freeze-graph", ov.freeze_graph,
                "reuse one random-schedule realization across trials");
}

ratenet::ExperimentConfig make_config(const Overrides& ov) {
  ratenet::ExperimentConfig cfg = ov.config_path.empty()
                                      ? ratenet::ExperimentConfig{}
                                      : ratenet::load_config(ov.config_path);
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.trials) cfg.trials = *ov.trials;
  if (ov.rounds) cfg.rounds = *ov.rounds;
  if (ov.out_dir) cfg.out_dir = *ov.out_dir;
  if (ov.jobs) cfg.jobs = *ov.jobs;
  if (ov.freeze_graph) cfg.freeze_graph = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed rate-estimation simulator and analysis toolkit"};
  app.require_subcommand(1);

  Overrides ov;

  CLI::App* sim = app.add_subcommand(
      "simulate", "Run one seeded trial with full per-round readout");
  add_common_options(sim, ov);

  CLI::App* mc = app.add_subcommand(
      "montecarlo", "Run a seeded Monte Carlo sweep of the estimators");
  add_common_options(mc, ov);

  CLI::App* fig =
      app.add_subcommand("figure", "Reproduce one figure data set");
  std::string which;
  fig->add_option("which", which, "one of fig3|fig4|fig5|fig6")->required();
  add_common_options(fig, ov);

  CLI::App* th = app.add_subcommand(
      "theory", "Print the closed-form report for a configuration");
  add_common_options(th, ov);

  CLI::App* conn = app.add_subcommand(
      "check-connectivity",
      "Verify uniform joint strong connectivity of the schedule");
  add_common_options(conn, ov);
  std::optional<int> q_window;
  bool find_q = false;
  conn->add_option("--q-window", q_window,
                   "window length Q to verify (default: config q_window)");
  conn->add_flag("--find-q", find_q,
                 "search for the smallest window length that verifies");

  CLI11_PARSE(app, argc, argv);

  try {
    const ratenet::ExperimentConfig cfg = make_config(ov);
    if (sim->parsed()) {
      std::cout << ratenet::simulate_command(cfg).summary.dump(2) << "\n";
    } else if (mc->parsed()) {
      std::cout << ratenet::montecarlo_command(cfg).summary.dump(2) << "\n";
    } else if (fig->parsed()) {
      std::cout << ratenet::figure_command(cfg, which).summary.dump(2)
                << "\n";
    } else if (th->parsed()) {
      std::cout << ratenet::theory_report(cfg).dump(2) << "\n";
    } else if (conn->parsed()) {
      cfg.validate();
      const ratenet::GraphSchedule sched = cfg.schedule.build(
          cfg.N, ratenet::derive_seed(cfg.seed, ratenet::kSaltGraph));
      const std::int64_t horizon = cfg.resolved_rounds(0) > 0
                                       ? cfg.rounds
                                       : 64LL * std::max(cfg.q_window, 1);
      nlohmann::json out{{"horizon", horizon}};
      if (find_q) {
        std::optional<int> found;
        for (int q = 1; q <= horizon; ++q) {
          if (ratenet::verify_joint_connectivity(sched, q, horizon).ok) {
            found = q;
            break;
          }
        }
        out["found_q"] = found ? nlohmann::json(*found) : nlohmann::json();
        out["ok"] = found.has_value();
      } else {
        const int q = q_window.value_or(cfg.q_window);
        const ratenet::ConnectivityReport rep =
            ratenet::verify_joint_connectivity(sched, q, horizon);
        out["q_window"] = q;
        out["ok"] = rep.ok;
        if (!rep.ok) out["first_fail_window"] = rep.first_fail_window;
      }
      std::cout << out.dump(2) << "\n";
      return out["ok"].get<bool>() ? 0 : 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

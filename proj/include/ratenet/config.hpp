#pragma once

// Experiment configuration: a JSON-backed description of one run — model
// hyperparameters, network size and sample-size policy, communication
// schedule, trial/round counts, seed, estimator selection, and output
// paths. Every field has a CLI flag override; the resolved configuration is
// echoed verbatim into the run manifest so a run can be reproduced from its
// outputs alone.

#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "ratenet/graph.hpp"
#include "ratenet/model.hpp"
#include "ratenet/subgradient.hpp"

namespace ratenet {

enum class Estimator { Dec, BHom, CentralizedMl, AdHoc, Eb };

inline const char* estimator_name(Estimator e) {
  switch (e) {
    case Estimator::Dec: return "dec";
    case Estimator::BHom: return "bhom";
    case Estimator::CentralizedMl: return "centralized_ml";
    case Estimator::AdHoc: return "adhoc";
    case Estimator::Eb: return "eb";
  }
  throw std::logic_error("estimator_name: unreachable");
}

inline Estimator parse_estimator(const std::string& s) {
  if (s == "dec") return Estimator::Dec;
  if (s == "bhom") return Estimator::BHom;
  if (s == "centralized_ml") return Estimator::CentralizedMl;
  if (s == "adhoc") return Estimator::AdHoc;
  if (s == "eb") return Estimator::Eb;
  throw std::invalid_argument("unknown estimator '" + s +
                              "' (expected dec|bhom|centralized_ml|adhoc|eb)");
}

// How per-node sample sizes are assigned.
struct SizePolicy {
  enum class Kind { HalfMaxHalfOne, Explicit, Homogeneous } kind =
      Kind::HalfMaxHalfOne;
  std::int64_t n_max = 50;        // HalfMaxHalfOne
  std::int64_t n_per_node = 1;    // Homogeneous
  std::vector<std::int64_t> values;  // Explicit

  // Materialize the per-node sizes for a network of N nodes. The split
  // policy gives the first floor(N/2) nodes n_max samples and the rest one.
  std::vector<std::int64_t> resolve(int N) const {
    if (N < 1) throw std::invalid_argument("SizePolicy: N must be >= 1");
    switch (kind) {
      case Kind::HalfMaxHalfOne: {
        if (n_max < 1)
          throw std::invalid_argument("SizePolicy: n_max must be >= 1");
        std::vector<std::int64_t> out(static_cast<std::size_t>(N), 1);
        for (int i = 0; i < N / 2; ++i)
          out[static_cast<std::size_t>(i)] = n_max;
        return out;
      }
      case Kind::Homogeneous: {
        if (n_per_node < 1)
          throw std::invalid_argument("SizePolicy: n_per_node must be >= 1");
        return std::vector<std::int64_t>(static_cast<std::size_t>(N),
                                         n_per_node);
      }
      case Kind::Explicit: {
        if (static_cast<int>(values.size()) != N)
          throw std::invalid_argument(
              "SizePolicy: explicit sizes must list exactly N values");
        for (std::int64_t v : values)
          if (v < 1)
            throw std::invalid_argument("SizePolicy: sizes must be >= 1");
        return values;
      }
    }
    throw std::logic_error("SizePolicy: unreachable");
  }

  std::int64_t max_size(int N) const {
    std::int64_t m = 1;
    for (std::int64_t v : resolve(N)) m = std::max(m, v);
    return m;
  }
};

// Declarative description of the communication schedule; turned into a
// concrete GraphSchedule once N and the seed are known.
struct ScheduleSpec {
  enum class Kind { CycleChords, FixedEdges, ErdosRenyi, Scripted } kind =
      Kind::CycleChords;
  EdgeSet edges;            // FixedEdges
  double p = 0.01;          // ErdosRenyi
  std::string script_path;  // Scripted

  GraphSchedule build(int N, std::uint64_t graph_seed) const {
    switch (kind) {
      case Kind::CycleChords:
        return cycle_with_chords(N);
      case Kind::FixedEdges:
        return GraphSchedule::fixed(N, edges);
      case Kind::ErdosRenyi:
        return GraphSchedule::erdos_renyi(N, p, graph_seed);
      case Kind::Scripted:
        return load_script(N, script_path);
    }
    throw std::logic_error("ScheduleSpec: unreachable");
  }

  bool is_random() const { return kind == Kind::ErdosRenyi; }
};

// The conditioning target for rate-estimator analysis (theory reports and
// the normalized-RMSE sweep): which node, and the true rate value it is
// pinned to. Defaults: the last node and the mode (a-1)b of the prior.
struct TargetSpec {
  std::optional<int> node;       // 1-based; default N
  std::optional<double> lambda;  // default (a-1)*b

  int resolve_node(int N) const { return node.value_or(N); }
  double resolve_lambda(const HyperParams& hp) const {
    return lambda.value_or((hp.a - 1.0) * hp.b);
  }
};

struct ExperimentConfig {
  HyperParams hp;
  int N = 20;
  SizePolicy sizes;
  ScheduleSpec schedule;
  std::int64_t trials = 10000;  // M
  std::int64_t rounds = -1;     // T; -1 = use the subcommand's default
  std::uint64_t seed = 1;
  std::vector<Estimator> estimators = {Estimator::AdHoc};
  std::vector<int> tracked_nodes;  // empty = default {1, 2, N/2+1, N/2+2}
  bool freeze_graph = false;
  StepSchedule step;
  TargetSpec target;
  std::string out_dir = "out";
  int jobs = 1;
  std::vector<int> n_sweep = {2, 4, 8, 16, 32, 64};
  int q_window = 1;

  // Default readout: two nodes from the front half of the size split and
  // the corresponding two from the back half.
  std::vector<int> resolved_tracked_nodes() const {
    if (!tracked_nodes.empty()) return tracked_nodes;
    std::vector<int> nodes;
    for (int cand : {1, 2, N / 2 + 1, N / 2 + 2}) {
      if (cand >= 1 && cand <= N) {
        bool dup = false;
        for (int seen : nodes) dup = dup || seen == cand;
        if (!dup) nodes.push_back(cand);
      }
    }
    return nodes;
  }

  std::vector<std::int64_t> resolved_sizes() const { return sizes.resolve(N); }

  std::int64_t resolved_rounds(std::int64_t command_default) const {
    return rounds >= 0 ? rounds : command_default;
  }

  void validate() const {
    hp.validate();
    step.validate();
    if (N < 2)
      throw std::invalid_argument("config: N must be >= 2 for networked runs");
    if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
    if (q_window < 1)
      throw std::invalid_argument("config: q_window must be >= 1");
    if (estimators.empty())
      throw std::invalid_argument("config: at least one estimator");
    if (schedule.kind == ScheduleSpec::Kind::ErdosRenyi &&
        !(schedule.p >= 0.0 && schedule.p <= 1.0))
      throw std::invalid_argument("config: edge probability outside [0,1]");
    for (int node : tracked_nodes)
      if (node < 1 || node > N)
        throw std::invalid_argument("config: tracked node out of range");
    for (int n : n_sweep)
      if (n < 2) throw std::invalid_argument("config: n_sweep entries >= 2");
    (void)resolved_sizes();  // throws on a bad size policy
  }
};

// ---------------------------------------------------------------------------
// JSON binding. Strict: unknown keys are rejected so typos fail loudly.

namespace detail {

inline void check_keys(const nlohmann::json& j,
                       std::initializer_list<const char*> allowed,
                       const char* where) {
  if (!j.is_object())
    throw std::invalid_argument(std::string("config: ") + where +
                                " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || item.key() == k;
    if (!ok)
      throw std::invalid_argument(std::string("config: unknown key '") +
                                  item.key() + "' in " + where);
  }
}

}  // namespace detail

inline SizePolicy parse_size_policy(const nlohmann::json& j) {
  detail::check_keys(j, {"policy", "n_max", "n_per_node", "values"}, "sizes");
  SizePolicy sp;
  const std::string policy = j.at("policy").get<std::string>();
  if (policy == "half_max_half_one") {
    sp.kind = SizePolicy::Kind::HalfMaxHalfOne;
    if (j.contains("n_max")) sp.n_max = j.at("n_max").get<std::int64_t>();
  } else if (policy == "homogeneous") {
    sp.kind = SizePolicy::Kind::Homogeneous;
    sp.n_per_node = j.at("n_per_node").get<std::int64_t>();
  } else if (policy == "explicit") {
    sp.kind = SizePolicy::Kind::Explicit;
    sp.values = j.at("values").get<std::vector<std::int64_t>>();
  } else {
    throw std::invalid_argument(
        "config: sizes.policy must be half_max_half_one|homogeneous|explicit");
  }
  return sp;
}

inline nlohmann::json size_policy_json(const SizePolicy& sp) {
  switch (sp.kind) {
    case SizePolicy::Kind::HalfMaxHalfOne:
      return {{"policy", "half_max_half_one"}, {"n_max", sp.n_max}};
    case SizePolicy::Kind::Homogeneous:
      return {{"policy", "homogeneous"}, {"n_per_node", sp.n_per_node}};
    case SizePolicy::Kind::Explicit:
      return {{"policy", "explicit"}, {"values", sp.values}};
  }
  throw std::logic_error("size_policy_json: unreachable");
}

inline ScheduleSpec parse_schedule_spec(const nlohmann::json& j) {
  detail::check_keys(j, {"kind", "edges", "p", "path"}, "schedule");
  ScheduleSpec ss;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "cycle_chords") {
    ss.kind = ScheduleSpec::Kind::CycleChords;
  } else if (kind == "fixed") {
    ss.kind = ScheduleSpec::Kind::FixedEdges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2)
        throw std::invalid_argument(
            "config: schedule.edges entries must be [from, to] pairs");
      ss.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
  } else if (kind == "erdos_renyi") {
    ss.kind = ScheduleSpec::Kind::ErdosRenyi;
    ss.p = j.at("p").get<double>();
  } else if (kind == "scripted") {
    ss.kind = ScheduleSpec::Kind::Scripted;
    ss.script_path = j.at("path").get<std::string>();
  } else {
    throw std::invalid_argument(
        "config: schedule.kind must be cycle_chords|fixed|erdos_renyi|"
        "scripted");
  }
  return ss;
}

inline nlohmann::json schedule_spec_json(const ScheduleSpec& ss) {
  switch (ss.kind) {
    case ScheduleSpec::Kind::CycleChords:
      return {{"kind", "cycle_chords"}};
    case ScheduleSpec::Kind::FixedEdges: {
      nlohmann::json edges = nlohmann::json::array();
      for (const auto& [from, to] : ss.edges)
        edges.push_back({from, to});
      return {{"kind", "fixed"}, {"edges", edges}};
    }
    case ScheduleSpec::Kind::ErdosRenyi:
      return {{"kind", "erdos_renyi"}, {"p", ss.p}};
    case ScheduleSpec::Kind::Scripted:
      return {{"kind", "scripted"}, {"path", ss.script_path}};
  }
  throw std::logic_error("schedule_spec_json: unreachable");
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  detail::check_keys(
      j,
      {"a", "b", "N", "sizes", "schedule", "trials", "rounds", "seed",
       "estimators", "tracked_nodes", "freeze_graph", "step", "target",
       "out_dir", "jobs", "n_sweep", "q_window"},
      "configuration");
  ExperimentConfig cfg;
  if (j.contains("a")) cfg.hp.a = j.at("a").get<double>();
  if (j.contains("b")) cfg.hp.b = j.at("b").get<double>();
  if (j.contains("N")) cfg.N = j.at("N").get<int>();
  if (j.contains("sizes")) cfg.sizes = parse_size_policy(j.at("sizes"));
  if (j.contains("schedule"))
    cfg.schedule = parse_schedule_spec(j.at("schedule"));
  if (j.contains("trials")) cfg.trials = j.at("trials").get<std::int64_t>();
  if (j.contains("rounds")) cfg.rounds = j.at("rounds").get<std::int64_t>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("estimators")) {
    cfg.estimators.clear();
    for (const auto& e : j.at("estimators"))
      cfg.estimators.push_back(parse_estimator(e.get<std::string>()));
  }
  if (j.contains("tracked_nodes"))
    cfg.tracked_nodes = j.at("tracked_nodes").get<std::vector<int>>();
  if (j.contains("freeze_graph"))
    cfg.freeze_graph = j.at("freeze_graph").get<bool>();
  if (j.contains("step")) {
    const auto& s = j.at("step");
    detail::check_keys(s, {"gamma0", "exponent", "step_cap"}, "step");
    if (s.contains("gamma0")) cfg.step.gamma0 = s.at("gamma0").get<double>();
    if (s.contains("exponent"))
      cfg.step.exponent = s.at("exponent").get<double>();
    if (s.contains("step_cap"))
      cfg.step.step_cap = s.at("step_cap").get<double>();
  }
  if (j.contains("target")) {
    const auto& t = j.at("target");
    detail::check_keys(t, {"node", "lambda"}, "target");
    if (t.contains("node")) cfg.target.node = t.at("node").get<int>();
    if (t.contains("lambda"))
      cfg.target.lambda = t.at("lambda").get<double>();
  }
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
  if (j.contains("n_sweep"))
    cfg.n_sweep = j.at("n_sweep").get<std::vector<int>>();
  if (j.contains("q_window")) cfg.q_window = j.at("q_window").get<int>();
  cfg.validate();  // cross-field checks fail at parse time, not first use
  return cfg;
}

// Serialize the fully resolved configuration (for the run manifest).
inline nlohmann::json config_json(const ExperimentConfig& cfg) {
  nlohmann::json j{
      {"a", cfg.hp.a},
      {"b", cfg.hp.b},
      {"N", cfg.N},
      {"sizes", size_policy_json(cfg.sizes)},
      {"schedule", schedule_spec_json(cfg.schedule)},
      {"trials", cfg.trials},
      {"rounds", cfg.rounds},
      {"seed", cfg.seed},
      {"tracked_nodes", cfg.resolved_tracked_nodes()},
      {"freeze_graph", cfg.freeze_graph},
      {"step",
       {{"gamma0", cfg.step.gamma0},
        {"exponent", cfg.step.exponent},
        {"step_cap", cfg.step.step_cap}}},
      {"out_dir", cfg.out_dir},
      {"jobs", cfg.jobs},
      {"n_sweep", cfg.n_sweep},
      {"q_window", cfg.q_window},
  };
  nlohmann::json est = nlohmann::json::array();
  for (Estimator e : cfg.estimators) est.push_back(estimator_name(e));
  j["estimators"] = est;
  nlohmann::json target = nlohmann::json::object();
  if (cfg.target.node) target["node"] = *cfg.target.node;
  if (cfg.target.lambda) target["lambda"] = *cfg.target.lambda;
  j["target"] = target;
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: parse error in '" + path +
                             "': " + e.what());
  }
  return parse_config(j);
}

}  // namespace ratenet

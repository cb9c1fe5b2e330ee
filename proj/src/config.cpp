/*
 * Copyright 2026 The HFLSim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "hfl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hfl/errors.hpp"

namespace hfl {

using json = nlohmann::json;

const char* agg_method_name(AggMethod m) noexcept {
  switch (m) {
    case AggMethod::FedAvg:
      return "fedavg";
    case AggMethod::Median:
      return "median";
    case AggMethod::TrimmedMean:
      return "trimmed_mean";
  }
  return "unknown";
}

namespace {

[[noreturn]] void parse_fail(const std::string& where, const std::string& msg) {
  raise(Errc::ParseError, where + ": " + msg);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end()) {
      parse_fail(where, "unknown key '" + key + "'");
    }
  }
}

template <class T>
T get_req(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key)) parse_fail(where, std::string("missing '") + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    parse_fail(where + "." + key, e.what());
  }
}

template <class T>
T get_opt(const json& obj, const std::string& where, const char* key,
          T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    parse_fail(where + "." + key, e.what());
  }
}

NodeKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "root") return NodeKind::Root;
  if (s == "group_server") return NodeKind::GroupServer;
  if (s == "user") return NodeKind::User;
  parse_fail(where, "unknown node kind '" + s + "'");
}

DefensePipeline parse_pipeline(const json& arr, const std::string& where) {
  if (!arr.is_array()) parse_fail(where, "pipeline must be an array of steps");
  DefensePipeline p;
  int i = 0;
  for (const json& step : arr) {
    const std::string sw = where + "[" + std::to_string(i++) + "]";
    if (!step.is_object() || step.size() != 1) {
      parse_fail(sw, "each step is a one-key object");
    }
    if (step.contains("clip")) {
      p.steps.push_back(ClipStep{get_req<double>(step, sw, "clip")});
    } else if (step.contains("gauss_noise")) {
      p.steps.push_back(GaussNoiseStep{get_req<double>(step, sw, "gauss_noise")});
    } else if (step.contains("fraction_share")) {
      p.steps.push_back(
          FractionShareStep{get_req<double>(step, sw, "fraction_share")});
    } else {
      parse_fail(sw, "expected one of clip / gauss_noise / fraction_share");
    }
  }
  return p;
}

AggChoice parse_agg_choice(const json& obj, const std::string& where,
                           double default_beta) {
  AggChoice c;
  const std::string m = get_req<std::string>(obj, where, "method");
  if (m == "fedavg") {
    c.method = AggMethod::FedAvg;
  } else if (m == "median") {
    c.method = AggMethod::Median;
  } else if (m == "trimmed_mean") {
    c.method = AggMethod::TrimmedMean;
  } else {
    parse_fail(where, "unknown aggregator '" + m + "'");
  }
  c.beta = get_opt<double>(obj, where, "beta", default_beta);
  return c;
}

Hyperparams parse_hp(const json& obj, const std::string& where,
                     const Hyperparams& base) {
  Hyperparams hp = base;
  hp.learning_rate = get_opt<double>(obj, where, "learning_rate", hp.learning_rate);
  hp.local_epochs = get_opt<int>(obj, where, "local_epochs", hp.local_epochs);
  hp.batch_size = get_opt<int>(obj, where, "batch_size", hp.batch_size);
  return hp;
}

std::string line_of_offset(const std::string& text, std::size_t offset) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return std::to_string(line);
}

}  // namespace

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::ParseError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    raise(Errc::ParseError, path.string() + " line " +
                                line_of_offset(text, e.byte) + ": " + e.what());
  }
  if (!root.is_object()) raise(Errc::ParseError, "top level must be an object");

  check_keys(root, "config",
             {"seed", "hierarchy", "data", "model", "defenses", "aggregation",
              "detection", "adversaries", "probe", "schedule", "cost_model",
              "output"});

  ScenarioConfig cfg;
  // A missing seed is surfaced as a validation error rather than a parse
  // error so cmd_validate can report it alongside everything else.
  cfg.master_seed_present = root.contains("seed");
  if (cfg.master_seed_present) {
    cfg.master_seed = get_req<std::uint64_t>(root, "config", "seed");
  }

  // hierarchy
  const json& hj = get_req<json>(root, "config", "hierarchy");
  check_keys(hj, "hierarchy", {"nodes", "trust_graph"});
  for (const json& nj : get_req<json>(hj, "hierarchy", "nodes")) {
    const std::string where = "hierarchy.nodes";
    check_keys(nj, where,
               {"id", "kind", "parent", "rounds_before_sync",
                "sampling_fraction"});
    NodeSpecEntry e;
    e.id = get_req<NodeId>(nj, where, "id");
    e.kind = parse_kind(get_req<std::string>(nj, where, "kind"), where);
    if (nj.contains("parent")) e.parent = get_req<NodeId>(nj, where, "parent");
    e.rounds_before_sync = get_opt<int>(nj, where, "rounds_before_sync", 1);
    e.sampling_fraction = get_opt<double>(nj, where, "sampling_fraction", 1.0);
    cfg.hierarchy.nodes.push_back(e);
  }
  if (hj.contains("trust_graph")) {
    const json& tj = hj.at("trust_graph");
    check_keys(tj, "hierarchy.trust_graph", {"users", "edges", "threshold"});
    TrustConfig tc;
    tc.users = get_req<std::vector<NodeId>>(tj, "hierarchy.trust_graph", "users");
    tc.graph.users = tc.users;
    tc.threshold = get_req<double>(tj, "hierarchy.trust_graph", "threshold");
    for (const json& ej : get_opt<json>(tj, "hierarchy.trust_graph", "edges",
                                        json::array())) {
      const std::string where = "hierarchy.trust_graph.edges";
      check_keys(ej, where, {"a", "b", "weight"});
      tc.graph.add_edge(get_req<NodeId>(ej, where, "a"),
                        get_req<NodeId>(ej, where, "b"),
                        get_req<double>(ej, where, "weight"));
    }
    cfg.trust = std::move(tc);
  }

  // data
  if (root.contains("data")) {
    const json& dj = root.at("data");
    check_keys(dj, "data",
               {"generator", "classes", "dim", "n_per_class", "spread", "seed",
                "partition", "alpha", "test_fraction", "export_csv"});
    const std::string gen = get_opt<std::string>(dj, "data", "generator", "blobs");
    if (gen != "blobs") parse_fail("data.generator", "unknown generator '" + gen + "'");
    cfg.data.classes = get_opt<int>(dj, "data", "classes", cfg.data.classes);
    cfg.data.dim = get_opt<int>(dj, "data", "dim", cfg.data.dim);
    cfg.data.n_per_class = get_opt<int>(dj, "data", "n_per_class", cfg.data.n_per_class);
    cfg.data.spread = get_opt<double>(dj, "data", "spread", cfg.data.spread);
    if (dj.contains("seed")) {
      cfg.data.seed = get_req<std::uint64_t>(dj, "data", "seed");
    }
    const std::string part = get_opt<std::string>(dj, "data", "partition", "iid");
    if (part == "iid") {
      cfg.data.partition = PartitionKind::Iid;
    } else if (part == "label_skew") {
      cfg.data.partition = PartitionKind::LabelSkew;
    } else {
      parse_fail("data.partition", "unknown partition '" + part + "'");
    }
    cfg.data.alpha = get_opt<double>(dj, "data", "alpha", cfg.data.alpha);
    cfg.data.test_fraction =
        get_opt<double>(dj, "data", "test_fraction", cfg.data.test_fraction);
    cfg.data.export_csv = get_opt<bool>(dj, "data", "export_csv", false);
  }

  // model
  if (root.contains("model")) {
    const json& mj = root.at("model");
    check_keys(mj, "model",
               {"arch", "hidden", "learning_rate", "local_epochs", "batch_size"});
    const std::string arch = get_opt<std::string>(mj, "model", "arch", "logreg");
    if (arch == "logreg") {
      cfg.model.arch = ArchKind::LogReg;
    } else if (arch == "mlp1") {
      cfg.model.arch = ArchKind::Mlp1;
    } else {
      parse_fail("model.arch", "unknown architecture '" + arch + "'");
    }
    cfg.model.hidden = get_opt<int>(mj, "model", "hidden", cfg.model.hidden);
    cfg.model.hyperparams = parse_hp(mj, "model", cfg.model.hyperparams);
  }

  // defenses
  if (root.contains("defenses")) {
    const json& fj = root.at("defenses");
    check_keys(fj, "defenses", {"user_default", "per_group", "server_pipelines"});
    if (fj.contains("user_default")) {
      cfg.user_default_pipeline =
          parse_pipeline(fj.at("user_default"), "defenses.user_default");
    }
    for (const json& gj : get_opt<json>(fj, "defenses", "per_group", json::array())) {
      const std::string where = "defenses.per_group";
      check_keys(gj, where,
                 {"server", "pipeline", "learning_rate", "local_epochs",
                  "batch_size"});
      GroupOverride g;
      g.server = get_req<NodeId>(gj, where, "server");
      if (gj.contains("pipeline")) {
        g.pipeline = parse_pipeline(gj.at("pipeline"), where + ".pipeline");
      }
      if (gj.contains("learning_rate") || gj.contains("local_epochs") ||
          gj.contains("batch_size")) {
        g.hyperparams = parse_hp(gj, where, cfg.model.hyperparams);
      }
      cfg.group_overrides.push_back(std::move(g));
    }
    for (const json& sj :
         get_opt<json>(fj, "defenses", "server_pipelines", json::array())) {
      const std::string where = "defenses.server_pipelines";
      check_keys(sj, where, {"node", "pipeline"});
      ServerPipelineEntry e;
      e.node = get_req<NodeId>(sj, where, "node");
      e.pipeline = parse_pipeline(sj.at("pipeline"), where + ".pipeline");
      cfg.server_pipelines.push_back(std::move(e));
    }
  }

  // aggregation
  if (root.contains("aggregation")) {
    const json& aj = root.at("aggregation");
    check_keys(aj, "aggregation", {"default", "per_layer", "masking"});
    if (aj.contains("default")) {
      cfg.default_aggregator =
          parse_agg_choice(aj.at("default"), "aggregation.default", 0.1);
    }
    for (const json& lj : get_opt<json>(aj, "aggregation", "per_layer",
                                        json::array())) {
      const std::string where = "aggregation.per_layer";
      check_keys(lj, where, {"layer", "method", "beta"});
      LayerAggregator la;
      la.layer = get_req<int>(lj, where, "layer");
      la.choice = parse_agg_choice(lj, where, cfg.default_aggregator.beta);
      cfg.layer_aggregators.push_back(la);
    }
    if (aj.contains("masking")) {
      const json& mj = aj.at("masking");
      check_keys(mj, "aggregation.masking", {"enabled", "pairwise_seed"});
      cfg.masking.enabled = get_opt<bool>(mj, "aggregation.masking", "enabled", false);
      if (mj.contains("pairwise_seed")) {
        cfg.masking.pairwise_seed =
            get_req<std::uint64_t>(mj, "aggregation.masking", "pairwise_seed");
      }
    }
  }

  // detection
  for (const json& dj : get_opt<json>(root, "config", "detection", json::array())) {
    const std::string where = "detection";
    check_keys(dj, where, {"node", "threshold", "response", "notify_switch_median"});
    DetectionEntry e;
    e.node = get_req<NodeId>(dj, where, "node");
    e.policy.threshold = get_req<double>(dj, where, "threshold");
    const std::string resp = get_opt<std::string>(dj, where, "response", "flag_only");
    if (resp == "flag_only") {
      e.policy.response = DetectionResponse::FlagOnly;
    } else if (resp == "exclude") {
      e.policy.response = DetectionResponse::Exclude;
    } else if (resp == "withhold_broadcast") {
      e.policy.response = DetectionResponse::WithholdBroadcast;
    } else {
      parse_fail(where, "unknown response '" + resp + "'");
    }
    e.policy.notify_switch_median =
        get_opt<bool>(dj, where, "notify_switch_median", false);
    cfg.detection.push_back(e);
  }

  // adversaries
  for (const json& aj : get_opt<json>(root, "config", "adversaries", json::array())) {
    const std::string where = "adversaries";
    check_keys(aj, where,
               {"kind", "at", "id", "gamma", "mode", "from_round", "to_round"});
    AdversarySpec spec;
    const std::string kind = get_req<std::string>(aj, where, "kind");
    if (kind == "passive_observer") {
      spec.kind = PassiveObserver{get_req<NodeId>(aj, where, "at")};
    } else if (kind == "malicious_user") {
      spec.kind = MaliciousUser{get_req<NodeId>(aj, where, "id"),
                                get_opt<double>(aj, where, "gamma", 1.0)};
    } else if (kind == "malicious_server") {
      MaliciousServer ms;
      ms.id = get_req<NodeId>(aj, where, "id");
      ms.gamma = get_opt<double>(aj, where, "gamma", 1.0);
      const std::string mode = get_opt<std::string>(aj, where, "mode", "scale_up");
      if (mode == "scale_up") {
        ms.mode = ServerAttackMode::ScaleUp;
      } else if (mode == "scale_down_broadcast") {
        ms.mode = ServerAttackMode::ScaleDownBroadcast;
      } else {
        parse_fail(where, "unknown mode '" + mode + "'");
      }
      spec.kind = ms;
    } else {
      parse_fail(where, "unknown adversary kind '" + kind + "'");
    }
    spec.active_from_round = get_opt<int>(aj, where, "from_round", 1);
    spec.active_to_round = get_opt<int>(aj, where, "to_round", 1 << 30);
    cfg.adversaries.push_back(spec);
  }

  // probe
  if (root.contains("probe")) {
    const json& pj = root.at("probe");
    check_keys(pj, "probe", {"user", "round"});
    ProbeConfig p;
    p.user = get_req<NodeId>(pj, "probe", "user");
    p.round = get_opt<int>(pj, "probe", "round", 1);
    cfg.probe = p;
  }

  // schedule
  if (root.contains("schedule")) {
    const json& sj = root.at("schedule");
    check_keys(sj, "schedule", {"global_rounds", "churn"});
    cfg.global_rounds = get_opt<int>(sj, "schedule", "global_rounds", 1);
    for (const json& cj : get_opt<json>(sj, "schedule", "churn", json::array())) {
      const std::string where = "schedule.churn";
      check_keys(cj, where, {"round", "remove"});
      ChurnEvent ev;
      ev.round = get_req<int>(cj, where, "round");
      ev.remove = get_req<NodeId>(cj, where, "remove");
      cfg.churn.push_back(ev);
    }
  }

  // cost model
  if (root.contains("cost_model")) {
    const json& cj = root.at("cost_model");
    check_keys(cj, "cost_model", {"verification", "base", "k"});
    const std::string v = get_opt<std::string>(cj, "cost_model", "verification", "linear");
    if (v == "linear") {
      cfg.cost.kind = VerifyKind::Linear;
    } else if (v == "poly") {
      cfg.cost.kind = VerifyKind::Poly;
    } else if (v == "exp") {
      cfg.cost.kind = VerifyKind::Exp;
    } else {
      parse_fail("cost_model.verification", "unknown kind '" + v + "'");
    }
    cfg.cost.base = get_opt<double>(cj, "cost_model", "base", 2.0);
    cfg.cost.exponent = get_opt<double>(cj, "cost_model", "k", 1.0);
  }

  // output
  if (root.contains("output")) {
    const json& oj = root.at("output");
    check_keys(oj, "output",
               {"directory", "trace_jsonl", "per_branch_eval", "dump_params_csv"});
    cfg.output.directory =
        get_opt<std::string>(oj, "output", "directory", cfg.output.directory);
    cfg.output.trace_jsonl = get_opt<bool>(oj, "output", "trace_jsonl", false);
    cfg.output.per_branch_eval = get_opt<bool>(oj, "output", "per_branch_eval", false);
    cfg.output.dump_params_csv =
        get_opt<bool>(oj, "output", "dump_params_csv", false);
  }

  return cfg;
}

Hierarchy resolve_topology(const ScenarioConfig& cfg) {
  if (!cfg.trust) return build_hierarchy(cfg.hierarchy);
  const auto groups = cluster_by_trust(cfg.trust->graph, cfg.trust->threshold);
  return build_hierarchy(attach_groups(cfg.hierarchy, groups));
}

namespace {

void check_pipeline_issue(const DefensePipeline& p, const std::string& where,
                          std::vector<ValidationIssue>& issues) {
  try {
    validate_pipeline(p);
  } catch (const Error& e) {
    issues.push_back({where, e.what()});
  }
}

}  // namespace

std::vector<ValidationIssue> validate_scenario(const ScenarioConfig& cfg) {
  std::vector<ValidationIssue> issues;
  auto add = [&](const std::string& where, const std::string& msg) {
    issues.push_back({where, msg});
  };

  if (!cfg.master_seed_present) {
    add("seed", "master seed is mandatory; no implicit entropy");
  }
  if (cfg.global_rounds < 0) add("schedule.global_rounds", "must be >= 0");

  // Topology (including trust clustering, when configured).
  std::optional<Hierarchy> h;
  try {
    h = resolve_topology(cfg);
  } catch (const Error& e) {
    add("hierarchy", e.what());
  }
  if (cfg.trust) {
    if (cfg.trust->users.empty()) add("hierarchy.trust_graph.users", "empty");
    if (cfg.trust->threshold < 0.0 || cfg.trust->threshold > 1.0) {
      add("hierarchy.trust_graph.threshold", "must lie in [0,1]");
    }
    std::set<NodeId> tu(cfg.trust->users.begin(), cfg.trust->users.end());
    for (const auto& [key, w] : cfg.trust->graph.edges) {
      (void)w;
      if (!tu.count(key.first) || !tu.count(key.second)) {
        add("hierarchy.trust_graph.edges",
            "edge endpoint not in the trust user list");
      }
    }
  }

  // Data.
  if (cfg.data.classes < 2) add("data.classes", "need at least 2 classes");
  if (cfg.data.dim < 1) add("data.dim", "must be >= 1");
  if (cfg.data.n_per_class < 1) add("data.n_per_class", "must be >= 1");
  if (cfg.data.spread < 0.0) add("data.spread", "must be non-negative");
  if (!(cfg.data.test_fraction > 0.0 && cfg.data.test_fraction < 1.0)) {
    add("data.test_fraction", "must lie in (0,1)");
  }
  if (cfg.data.partition == PartitionKind::LabelSkew && cfg.data.alpha <= 0.0) {
    add("data.alpha", "must be positive");
  }

  // Model.
  if (cfg.model.hyperparams.learning_rate <= 0.0) {
    add("model.learning_rate", "must be positive");
  }
  if (cfg.model.hyperparams.local_epochs < 1) add("model.local_epochs", "must be >= 1");
  if (cfg.model.hyperparams.batch_size < 1) add("model.batch_size", "must be >= 1");
  if (cfg.model.arch == ArchKind::Mlp1 && cfg.model.hidden < 1) {
    add("model.hidden", "must be >= 1 for mlp1");
  }

  // Pipelines.
  check_pipeline_issue(cfg.user_default_pipeline, "defenses.user_default", issues);
  for (const GroupOverride& g : cfg.group_overrides) {
    if (g.pipeline) {
      check_pipeline_issue(*g.pipeline, "defenses.per_group", issues);
    }
    if (g.hyperparams) {
      if (g.hyperparams->learning_rate <= 0.0 || g.hyperparams->local_epochs < 1 ||
          g.hyperparams->batch_size < 1) {
        add("defenses.per_group", "invalid hyperparameter override for server " +
                                      std::to_string(g.server));
      }
    }
  }
  for (const ServerPipelineEntry& e : cfg.server_pipelines) {
    check_pipeline_issue(e.pipeline, "defenses.server_pipelines", issues);
  }

  // Aggregators.
  auto check_beta = [&](const AggChoice& c, const std::string& where) {
    if (c.method == AggMethod::TrimmedMean && !(c.beta >= 0.0 && c.beta < 0.5)) {
      add(where, "trimmed-mean beta must lie in [0, 0.5)");
    }
  };
  check_beta(cfg.default_aggregator, "aggregation.default");
  for (const LayerAggregator& la : cfg.layer_aggregators) {
    if (la.layer < 0) add("aggregation.per_layer", "layer must be >= 0");
    check_beta(la.choice, "aggregation.per_layer");
  }

  // Cost model.
  if (cfg.cost.kind == VerifyKind::Exp && cfg.cost.base <= 1.0) {
    add("cost_model.base", "exponential base must be > 1");
  }
  if (cfg.cost.kind == VerifyKind::Poly && cfg.cost.exponent < 1.0) {
    add("cost_model.k", "polynomial exponent must be >= 1");
  }

  // Everything below needs a valid hierarchy.
  if (!h) return issues;
  const Hierarchy& hier = *h;

  const std::vector<NodeId> users = hier.users();
  if (users.empty()) add("hierarchy", "no users in the hierarchy");

  // Homogeneous children keep layer semantics (masking, aggregation) crisp.
  for (const auto& [id, n] : hier.nodes()) {
    if (n.children.empty()) continue;
    bool any_user = false;
    bool any_server = false;
    for (NodeId c : n.children) {
      (hier.node(c).kind == NodeKind::User ? any_user : any_server) = true;
    }
    if (any_user && any_server) {
      add("hierarchy", "node " + std::to_string(id) +
                           " mixes user and group-server children");
    }
  }

  const int n_total = cfg.data.classes * cfg.data.n_per_class;
  const int n_test = static_cast<int>(std::floor(n_total * cfg.data.test_fraction));
  const int n_train = n_total - n_test;
  if (!users.empty() && static_cast<int>(users.size()) > n_train) {
    add("data", "more users (" + std::to_string(users.size()) +
                    ") than training samples (" + std::to_string(n_train) + ")");
  }

  const std::vector<NodeId> leaf_servers = hier.leaf_servers();
  const std::set<NodeId> leaf_set(leaf_servers.begin(), leaf_servers.end());

  auto effective_agg = [&](NodeId v) {
    const int depth = hier.depth(v);
    for (const LayerAggregator& la : cfg.layer_aggregators) {
      if (la.layer == depth) return la.choice;
    }
    return cfg.default_aggregator;
  };

  // Masking conflicts: robust aggregation and anomaly detection both need
  // plain per-member inputs, which masking removes.
  if (cfg.masking.enabled) {
    for (NodeId s : leaf_servers) {
      if (effective_agg(s).method != AggMethod::FedAvg) {
        add("aggregation",
            "node " + std::to_string(s) + " uses a robust aggregator (" +
                agg_method_name(effective_agg(s).method) +
                ") but its inputs are masked; configure one or the other");
      }
    }
    for (const DetectionEntry& d : cfg.detection) {
      if (leaf_set.count(d.node)) {
        add("detection", "node " + std::to_string(d.node) +
                             " cannot detect anomalies over masked inputs");
      }
    }
  }

  for (const GroupOverride& g : cfg.group_overrides) {
    if (!leaf_set.count(g.server)) {
      add("defenses.per_group", "server " + std::to_string(g.server) +
                                    " is not a lowest-layer group server");
    }
  }
  for (const ServerPipelineEntry& e : cfg.server_pipelines) {
    if (!hier.contains(e.node) || hier.node(e.node).kind == NodeKind::User) {
      add("defenses.server_pipelines",
          "node " + std::to_string(e.node) + " is not an aggregating node");
    }
  }
  std::set<NodeId> det_nodes;
  for (const DetectionEntry& d : cfg.detection) {
    if (!hier.contains(d.node) || hier.node(d.node).kind == NodeKind::User) {
      add("detection", "node " + std::to_string(d.node) + " cannot detect");
    }
    if (!det_nodes.insert(d.node).second) {
      add("detection", "duplicate policy for node " + std::to_string(d.node));
    }
    if (d.policy.threshold <= 0.0) {
      add("detection", "threshold must be positive for node " +
                           std::to_string(d.node));
    }
  }

  for (const AdversarySpec& a : cfg.adversaries) {
    if (a.active_from_round < 1) add("adversaries", "from_round must be >= 1");
    if (a.active_from_round > a.active_to_round) {
      add("adversaries", "from_round exceeds to_round");
    }
    if (const auto* po = std::get_if<PassiveObserver>(&a.kind)) {
      if (!hier.contains(po->at)) {
        add("adversaries", "observer node " + std::to_string(po->at) +
                               " does not exist");
      }
    } else if (const auto* mu = std::get_if<MaliciousUser>(&a.kind)) {
      if (!hier.contains(mu->id) || hier.node(mu->id).kind != NodeKind::User) {
        add("adversaries", "malicious user " + std::to_string(mu->id) +
                               " is not a user");
      }
      if (!std::isfinite(mu->gamma)) add("adversaries", "gamma must be finite");
    } else {
      const auto& ms = std::get<MaliciousServer>(a.kind);
      if (!hier.contains(ms.id) ||
          hier.node(ms.id).kind != NodeKind::GroupServer) {
        add("adversaries", "malicious server " + std::to_string(ms.id) +
                               " is not a group server");
      }
      if (!std::isfinite(ms.gamma)) add("adversaries", "gamma must be finite");
    }
  }

  if (cfg.probe) {
    const ProbeConfig& p = *cfg.probe;
    if (!hier.contains(p.user) || hier.node(p.user).kind != NodeKind::User) {
      add("probe", "probe target " + std::to_string(p.user) + " is not a user");
    } else {
      if (cfg.model.arch != ArchKind::LogReg) {
        add("probe", "gradient inversion probe requires the logreg arch");
      }
      if (p.round < 1 || p.round > cfg.global_rounds) {
        add("probe", "probe round outside [1, global_rounds]");
      }
      // The probe must actually reach the target: every ancestor samples all
      // of its children, and an observer sits at the target's parent.
      NodeId cur = p.user;
      while (auto par = hier.parent(cur)) {
        if (hier.node(*par).sampling_fraction < 1.0) {
          add("probe", "ancestor " + std::to_string(*par) +
                           " samples children; the probe round may miss the target");
        }
        cur = *par;
      }
      const auto parent = hier.parent(p.user);
      bool observed = false;
      for (const AdversarySpec& a : cfg.adversaries) {
        if (const auto* po = std::get_if<PassiveObserver>(&a.kind)) {
          if (parent && po->at == *parent && a.active(p.round)) observed = true;
        }
      }
      if (!observed) {
        add("probe", "no active passive_observer at the probe user's parent");
      }
      if (cfg.masking.enabled && parent && leaf_set.count(*parent)) {
        add("probe", "probe update would be masked; reconstruction impossible");
      }
    }
  }

  for (const ChurnEvent& ev : cfg.churn) {
    if (ev.round < 1 || ev.round > cfg.global_rounds) {
      add("schedule.churn", "round " + std::to_string(ev.round) +
                                " outside [1, global_rounds]");
    }
    if (!hier.contains(ev.remove)) {
      add("schedule.churn", "node " + std::to_string(ev.remove) + " does not exist");
    } else if (ev.remove == hier.root()) {
      add("schedule.churn", "cannot remove the root");
    }
  }

  return issues;
}

ScenarioConfig load_and_validate(const std::filesystem::path& path) {
  ScenarioConfig cfg = load_scenario(path);
  const std::vector<ValidationIssue> issues = validate_scenario(cfg);
  if (!issues.empty()) {
    std::string msg = path.string() + " failed validation:";
    for (const ValidationIssue& i : issues) {
      msg += "\n  [" + i.where + "] " + i.message;
    }
    raise(Errc::ValidationFailed, msg);
  }
  return cfg;
}

}  // namespace hfl

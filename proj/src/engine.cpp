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

#include "hfl/engine.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "hfl/errors.hpp"
#include "hfl/privacy.hpp"

namespace hfl {

std::uint64_t node_stream_seed(std::uint64_t master, StreamTag tag, NodeId node,
                               std::uint64_t occurrence) {
  return derive_seed(master, tag,
                     {static_cast<std::uint64_t>(node), occurrence});
}

std::vector<NodeId> sample_children(const std::vector<NodeId>& children,
                                    double fraction, Rng& rng) {
  if (children.empty()) raise(Errc::EmptyInput, "node has no children");
  const std::size_t n = children.size();
  const std::size_t k = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::floor(fraction * static_cast<double>(n) + 0.5)));
  std::vector<NodeId> pool = children;  // already sorted ascending
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

double verification_cost(const CostConfig& cost, int children) {
  switch (cost.kind) {
    case VerifyKind::Exp:
      return std::pow(cost.base, children);
    case VerifyKind::Poly:
      return std::pow(static_cast<double>(children), cost.exponent);
    case VerifyKind::Linear:
      return static_cast<double>(children);
  }
  return 0.0;
}

double message_bytes(Eigen::Index param_count) {
  return 8.0 * static_cast<double>(param_count) + 64.0;
}

std::map<int, PerRoundCosts> account_costs(const Trace& trace,
                                           const CostConfig& cost) {
  std::map<int, PerRoundCosts> out;
  for (const TraceEvent& e : trace.events) {
    switch (e.kind) {
      case TraceKind::UpDelivery:
        out[e.round].up_bytes += message_bytes(e.param_count);
        break;
      case TraceKind::DownDelivery:
        out[e.round].down_bytes += message_bytes(e.param_count);
        break;
      case TraceKind::Verify:
        out[e.round].verify_units += verification_cost(cost, e.verified_children);
        break;
      default:
        break;
    }
  }
  return out;
}

EngineSetup prepare_setup(const ScenarioConfig& cfg) {
  EngineSetup s;
  s.master_seed = cfg.master_seed;
  s.hierarchy = resolve_topology(cfg);

  const std::uint64_t data_seed =
      cfg.data.seed.value_or(derive_seed(cfg.master_seed, StreamTag::DataGen));
  const Dataset full = gen_blobs(cfg.data.classes, cfg.data.dim,
                                 cfg.data.n_per_class, cfg.data.spread,
                                 data_seed);
  std::tie(s.train, s.test) = train_test_split(
      full, cfg.data.test_fraction, derive_seed(cfg.master_seed, StreamTag::Split));

  const std::vector<NodeId> users = s.hierarchy.users();
  const std::uint64_t part_seed =
      derive_seed(cfg.master_seed, StreamTag::Partition);
  s.shards = cfg.data.partition == PartitionKind::Iid
                 ? partition_iid(s.train, users, part_seed)
                 : partition_label_skew(s.train, users, cfg.data.alpha, part_seed);

  s.arch.kind = cfg.model.arch;
  s.arch.input_dim = cfg.data.dim;
  s.arch.num_classes = cfg.data.classes;
  s.arch.hidden = cfg.model.arch == ArchKind::Mlp1 ? cfg.model.hidden : 0;
  s.init_values =
      init_params(s.arch, derive_seed(cfg.master_seed, StreamTag::Init)).values;

  for (NodeId u : users) {
    s.user_hp[u] = cfg.model.hyperparams;
    s.user_pipeline[u] = cfg.user_default_pipeline;
  }
  for (const GroupOverride& g : cfg.group_overrides) {
    for (NodeId u : s.hierarchy.node(g.server).children) {
      if (g.hyperparams) s.user_hp[u] = *g.hyperparams;
      if (g.pipeline) s.user_pipeline[u] = *g.pipeline;
    }
  }
  for (const ServerPipelineEntry& e : cfg.server_pipelines) {
    s.server_pipeline[e.node] = e.pipeline;
  }

  for (const auto& [id, n] : s.hierarchy.nodes()) {
    if (n.kind == NodeKind::User) continue;
    AggChoice choice = cfg.default_aggregator;
    const int depth = s.hierarchy.depth(id);
    for (const LayerAggregator& la : cfg.layer_aggregators) {
      if (la.layer == depth) choice = la.choice;
    }
    s.aggregator[id] = choice;
  }

  s.masking = cfg.masking.enabled;
  s.mask_seed = cfg.masking.pairwise_seed.value_or(
      derive_seed(cfg.master_seed, StreamTag::Mask));

  for (const DetectionEntry& d : cfg.detection) s.detection[d.node] = d.policy;
  s.adversaries = cfg.adversaries;
  for (const AdversarySpec& a : cfg.adversaries) {
    if (const auto* ms = std::get_if<MaliciousServer>(&a.kind)) {
      Rng rng(derive_seed(cfg.master_seed, StreamTag::Adversary,
                          {static_cast<std::uint64_t>(ms->id)}));
      s.poison_perturbation[ms->id] = rng.normal_vector(s.arch.param_count());
    }
  }

  s.probe = cfg.probe;
  s.global_rounds = cfg.global_rounds;
  s.churn = cfg.churn;
  s.cost = cfg.cost;
  s.per_branch_eval = cfg.output.per_branch_eval;
  return s;
}

EngineSetup flatten_setup(const EngineSetup& setup) {
  EngineSetup flat = setup;
  const NodeId root = setup.hierarchy.root();

  HierarchySpec spec;
  NodeSpecEntry re;
  re.id = root;
  re.kind = NodeKind::Root;
  re.rounds_before_sync = 1;
  re.sampling_fraction = 1.0;
  spec.nodes.push_back(re);
  for (NodeId u : setup.hierarchy.users()) {
    NodeSpecEntry ue;
    ue.id = u;
    ue.kind = NodeKind::User;
    ue.parent = root;
    spec.nodes.push_back(ue);
  }
  flat.hierarchy = build_hierarchy(spec);

  // The flat baseline is plain FL: the coordinating server receives every
  // individual update unmasked.
  flat.masking = false;
  flat.aggregator.clear();
  flat.aggregator[root] = setup.aggregator.at(root);

  std::map<NodeId, DefensePipeline> sp;
  if (auto it = setup.server_pipeline.find(root); it != setup.server_pipeline.end()) {
    sp[root] = it->second;
  }
  flat.server_pipeline = std::move(sp);

  std::map<NodeId, DetectionPolicy> det;
  if (auto it = setup.detection.find(root); it != setup.detection.end()) {
    det[root] = it->second;
  }
  flat.detection = std::move(det);

  std::vector<AdversarySpec> adv;
  bool observer_at_root = false;
  for (const AdversarySpec& a : setup.adversaries) {
    if (const auto* po = std::get_if<PassiveObserver>(&a.kind)) {
      if (flat.hierarchy.contains(po->at)) {
        adv.push_back(a);
        if (po->at == root) observer_at_root = true;
      }
    } else if (const auto* mu = std::get_if<MaliciousUser>(&a.kind)) {
      if (flat.hierarchy.contains(mu->id)) adv.push_back(a);
    }
    // Malicious group servers have no flat counterpart.
  }
  flat.adversaries = std::move(adv);
  flat.poison_perturbation.clear();

  if (flat.probe && !observer_at_root) flat.probe.reset();

  std::vector<ChurnEvent> churn;
  for (const ChurnEvent& ev : setup.churn) {
    if (flat.hierarchy.contains(ev.remove)) churn.push_back(ev);
  }
  flat.churn = std::move(churn);
  flat.per_branch_eval = false;
  return flat;
}

namespace {

struct SimState {
  const EngineSetup* setup = nullptr;
  Hierarchy h;
  std::map<NodeId, Vector> version;
  std::map<std::pair<int, NodeId>, std::uint64_t> counters;
  Trace trace;
  AdversaryLog adv_log;
  std::vector<Notification> notifications;
  std::set<NodeId> withheld;
  std::map<NodeId, int> participation;
  std::set<NodeId> trained_this_round;
  std::set<std::pair<NodeId, NodeId>> seen_links;
  int new_links_this_round = 0;
  std::map<NodeId, int> median_switch_round;  // node -> first round it applies
  std::optional<ProbeOutcome> probe_outcome;
  std::set<NodeId> empty_shard_noted;
  int round = 0;
};

// Draws the next seed of the (purpose, node) stream. Each purpose owns an
// independent occurrence counter, so enabling one mechanism never shifts the
// draws another consumes.
std::uint64_t next_stream_seed(SimState& s, StreamTag tag, NodeId node) {
  const auto key = std::make_pair(static_cast<int>(tag), node);
  const std::uint64_t occurrence = s.counters[key]++;
  return node_stream_seed(s.setup->master_seed, tag, node, occurrence);
}

Rng node_rng(SimState& s, StreamTag tag, NodeId node) {
  return Rng(next_stream_seed(s, tag, node));
}

bool is_user(const SimState& s, NodeId id) {
  return s.h.contains(id) && s.h.node(id).kind == NodeKind::User;
}

void note(SimState& s, NodeId detector, NodeId subject, double z,
          const std::string& text) {
  Notification n;
  n.detector = detector;
  n.flagged = subject;
  n.round = s.round;
  n.zscore = z;
  n.note = text;
  s.notifications.push_back(n);
}

const MaliciousUser* malicious_user_at(const SimState& s, NodeId id) {
  for (const AdversarySpec& a : s.setup->adversaries) {
    if (const auto* mu = std::get_if<MaliciousUser>(&a.kind)) {
      if (mu->id == id && a.active(s.round)) return mu;
    }
  }
  return nullptr;
}

const MaliciousServer* malicious_server_at(const SimState& s, NodeId id,
                                           ServerAttackMode mode) {
  for (const AdversarySpec& a : s.setup->adversaries) {
    if (const auto* ms = std::get_if<MaliciousServer>(&a.kind)) {
      if (ms->id == id && ms->mode == mode && a.active(s.round)) return ms;
    }
  }
  return nullptr;
}

void observe_at(SimState& s, NodeId node, const Update& u) {
  for (const AdversarySpec& a : s.setup->adversaries) {
    if (const auto* po = std::get_if<PassiveObserver>(&a.kind)) {
      if (po->at == node && a.active(s.round)) {
        s.adv_log.push_back({s.round, node, u});
        break;  // one log entry per delivered message
      }
    }
  }
}

void trace_up_delivery(SimState& s, NodeId receiver, const Update& u) {
  TraceEvent e;
  e.kind = TraceKind::UpDelivery;
  e.round = s.round;
  e.receiver = receiver;
  e.receiver_depth = s.h.depth(receiver);
  e.origin = u.origin;
  e.origin_is_user = is_user(s, u.origin);
  e.masked = u.masked;
  e.weight = u.weight;
  e.norm = u.delta.norm();
  e.param_count = u.delta.size();
  s.trace.push(e);
  if (e.origin_is_user && !e.masked) {
    if (s.seen_links.insert({receiver, u.origin}).second) {
      s.new_links_this_round += 1;
    }
  }
  observe_at(s, receiver, u);
}

void trace_down_delivery(SimState& s, NodeId from, NodeId to,
                         Eigen::Index params) {
  TraceEvent e;
  e.kind = TraceKind::DownDelivery;
  e.round = s.round;
  e.receiver = to;
  e.receiver_depth = s.h.depth(to);
  e.origin = from;
  e.param_count = params;
  s.trace.push(e);
}

AggChoice effective_aggregator(const SimState& s, NodeId v) {
  AggChoice choice = s.setup->aggregator.count(v)
                         ? s.setup->aggregator.at(v)
                         : AggChoice{};
  // A notified server runs median from the round after the notification.
  auto it = s.median_switch_round.find(v);
  if (it != s.median_switch_round.end() && s.round >= it->second) {
    choice.method = AggMethod::Median;
  }
  return choice;
}

Update aggregate_updates(const SimState& s, NodeId v, bool masked_round,
                         std::span<const Update> updates) {
  if (masked_round) {
    // Masks cancel in the weighted sum, so plain fedavg recovers the true
    // aggregate; robust aggregation over masked inputs is a config error.
    return fedavg(updates, v, s.round);
  }
  const AggChoice choice = effective_aggregator(s, v);
  switch (choice.method) {
    case AggMethod::Median:
      return median_aggregate(updates, v, s.round);
    case AggMethod::TrimmedMean:
      return trimmed_mean_aggregate(updates, choice.beta, v, s.round);
    case AggMethod::FedAvg:
      break;
  }
  return fedavg(updates, v, s.round);
}

// One user's contribution for the current local round of its parent.
std::optional<Update> train_user(SimState& s, NodeId u, const Vector& model) {
  const auto shard_it = s.setup->shards.find(u);
  if (shard_it == s.setup->shards.end() || shard_it->second.empty()) {
    if (s.empty_shard_noted.insert(u).second) {
      note(s, -1, u, 0.0, "empty_shard");
    }
    return std::nullopt;
  }
  const std::vector<int>& shard = shard_it->second;
  ModelParams base{model, s.setup->arch};

  Update out;
  out.origin = u;
  out.round = s.round;

  const bool probe_now = s.setup->probe && s.round == s.setup->probe->round &&
                         s.setup->probe->user == u && !s.probe_outcome;
  if (probe_now) {
    // Exactly one SGD step on exactly one sample: the configuration the
    // gradient-inversion attack needs.
    const int row = shard.front();
    Matrix x(1, s.setup->train.d());
    x.row(0) = s.setup->train.features.row(row);
    Eigen::VectorXi y(1);
    y[0] = s.setup->train.labels[row];
    const auto [loss, grad] = loss_and_grad(base, x, y);
    (void)loss;
    const double lr = s.setup->user_hp.at(u).learning_rate;
    out.delta = -lr * grad;
    out.weight = 1.0;
    s.version[u] = model + out.delta;

    ProbeOutcome po;
    po.user = u;
    po.round = s.round;
    po.true_features = x.row(0).transpose();
    po.true_label = y[0];
    s.probe_outcome = po;
  } else {
    const std::uint64_t seed = next_stream_seed(s, StreamTag::Train, u);
    auto [trained, weight] =
        local_train(base, s.setup->train, shard, s.setup->user_hp.at(u), seed);
    out.delta = trained.values - model;
    out.weight = static_cast<double>(weight);
    s.version[u] = trained.values;
  }

  Rng nrng = node_rng(s, StreamTag::UserNoise, u);
  out = apply_pipeline(out, s.setup->user_pipeline.at(u), nrng);
  if (const MaliciousUser* mu = malicious_user_at(s, u)) {
    out = malicious_scale(out, mu->gamma);
  }
  s.participation[u] += 1;
  s.trained_this_round.insert(u);
  return out;
}

std::optional<Update> run_node_round(SimState& s, NodeId v);

// Gathers one local round's updates from the sampled children of v.
std::vector<Update> collect_updates(SimState& s, NodeId v,
                                    const std::vector<NodeId>& sampled,
                                    const Vector& push_model) {
  std::vector<Update> updates;
  for (NodeId c : sampled) {
    if (!s.h.contains(c)) continue;  // excluded by a sibling's detection
    s.version[c] = push_model;
    trace_down_delivery(s, v, c, push_model.size());
    if (s.h.node(c).kind == NodeKind::User) {
      if (auto u = train_user(s, c, push_model)) updates.push_back(std::move(*u));
      continue;
    }
    auto child_update = run_node_round(s, c);
    if (!child_update) continue;
    if (const MaliciousServer* ms =
            malicious_server_at(s, c, ServerAttackMode::ScaleUp)) {
      *child_update = malicious_scale(*child_update, ms->gamma);
    }
    updates.push_back(std::move(*child_update));
  }
  return updates;
}

void run_detection(SimState& s, NodeId v, std::vector<Update>& updates,
                   bool masked_round) {
  const auto pol_it = s.setup->detection.find(v);
  if (pol_it == s.setup->detection.end()) return;
  if (masked_round) return;  // rejected at validation; belt and braces
  const DetectionPolicy& policy = pol_it->second;

  const DetectionOutcome outcome = detect_anomalies(updates, policy);
  if (outcome.undetectable) {
    note(s, v, -1, 0.0, "undetectable");
    return;
  }
  for (const auto& [child, z] : outcome.flagged) {
    switch (policy.response) {
      case DetectionResponse::Exclude:
        s.h = remove_subtree(s.h, child);
        updates.erase(std::remove_if(updates.begin(), updates.end(),
                                     [&](const Update& u) {
                                       return u.origin == child;
                                     }),
                      updates.end());
        note(s, v, child, z, "excluded");
        break;
      case DetectionResponse::WithholdBroadcast:
        s.withheld.insert(child);
        note(s, v, child, z, "withheld");
        break;
      case DetectionResponse::FlagOnly:
        note(s, v, child, z, "flagged");
        break;
    }
    if (policy.notify_switch_median && s.h.contains(child) &&
        s.h.node(child).kind == NodeKind::GroupServer) {
      s.median_switch_round.emplace(child, s.round + 1);
    }
  }
}

void try_probe_reconstruction(SimState& s, NodeId v,
                              std::span<const Update> updates) {
  if (!s.setup->probe || !s.probe_outcome) return;
  ProbeOutcome& po = *s.probe_outcome;
  if (po.round != s.round || po.reconstructed || !po.failure.empty()) return;
  const auto parent = s.h.parent(po.user);
  if (!parent || *parent != v) return;

  const Update* target = nullptr;
  for (const Update& u : updates) {
    if (u.origin == po.user) target = &u;
  }
  if (!target) return;
  try {
    const Reconstruction rec = reconstruct_from_gradient(*target, s.setup->arch);
    po.reconstructed = true;
    po.rec_features = rec.features;
    po.rec_label = rec.label;
    po.max_abs_error =
        (rec.features - po.true_features).cwiseAbs().maxCoeff();
  } catch (const Error& e) {
    po.failure = e.what();
    note(s, v, po.user, 0.0, "not_reconstructible");
  }
}

// The model v disseminates this round; a malicious server in broadcast mode
// hands down a poisoned version and keeps building on it.
Vector downward_model(SimState& s, NodeId v) {
  const Vector& current = s.version.at(v);
  const MaliciousServer* ms =
      malicious_server_at(s, v, ServerAttackMode::ScaleDownBroadcast);
  if (!ms) return current;
  const ModelParams poisoned = poison_broadcast(
      {current, s.setup->arch}, ms->gamma, s.setup->poison_perturbation.at(v));
  s.version[v] = poisoned.values;
  return poisoned.values;
}

// Executes the staged schedule at node v: repeat rounds_before_sync times
// {sample children, obtain their updates, detect, aggregate, advance}, then
// report the total movement against the incoming model.
std::optional<Update> run_node_round(SimState& s, NodeId v) {
  const Vector incoming = s.version.at(v);
  const int local_rounds = s.h.node(v).rounds_before_sync;
  double last_weight = 0.0;
  bool advanced = false;

  for (int lr = 0; lr < local_rounds; ++lr) {
    if (!s.h.contains(v)) break;
    const Node node_now = s.h.node(v);  // copy: the tree may shrink below
    if (node_now.children.empty()) break;

    Rng srng = node_rng(s, StreamTag::Sample, v);
    const std::vector<NodeId> sampled =
        sample_children(node_now.children, node_now.sampling_fraction, srng);
    // Children are homogeneous (validated), so one look tells the layer.
    const bool leaf_parent =
        s.h.node(sampled.front()).kind == NodeKind::User;

    const Vector push_model = downward_model(s, v);
    std::vector<Update> updates = collect_updates(s, v, sampled, push_model);
    if (updates.empty()) continue;

    bool masked_round = false;
    if (s.setup->masking && leaf_parent) {
      if (updates.size() >= 2) {
        MaskGroup group;
        for (const Update& u : updates) group.members.push_back(u.origin);
        const auto key = std::make_pair(static_cast<int>(StreamTag::Mask), v);
        group.pairwise_seed =
            derive_seed(s.setup->mask_seed, StreamTag::Mask,
                        {static_cast<std::uint64_t>(v), s.counters[key]++});
        updates = mask_updates(updates, group);
        masked_round = true;
      } else {
        // A lone participant cannot hide behind pairwise masks; the update
        // travels in the clear and the exposure is auditable.
        TraceEvent e;
        e.kind = TraceKind::Exposure;
        e.round = s.round;
        e.receiver = v;
        e.receiver_depth = s.h.depth(v);
        e.origin = updates.front().origin;
        e.origin_is_user = true;
        e.param_count = updates.front().delta.size();
        s.trace.push(e);
        note(s, v, updates.front().origin, 0.0, "mask_exposure");
      }
    }

    for (const Update& u : updates) trace_up_delivery(s, v, u);
    try_probe_reconstruction(s, v, updates);

    TraceEvent verify;
    verify.kind = TraceKind::Verify;
    verify.round = s.round;
    verify.receiver = v;
    verify.receiver_depth = s.h.depth(v);
    verify.verified_children = static_cast<int>(updates.size());
    s.trace.push(verify);

    run_detection(s, v, updates, masked_round);
    if (updates.empty()) continue;

    Update agg = aggregate_updates(s, v, masked_round, updates);
    if (auto sp = s.setup->server_pipeline.find(v);
        sp != s.setup->server_pipeline.end()) {
      Rng prng = node_rng(s, StreamTag::ServerNoise, v);
      agg = apply_pipeline(agg, sp->second, prng);
    }
    s.version[v] += agg.delta;
    last_weight = agg.weight;
    advanced = true;
  }

  if (!advanced) return std::nullopt;
  Update out;
  out.delta = s.version.at(v) - incoming;
  out.weight = last_weight;
  out.origin = v;
  out.round = s.round;
  return out;
}

void broadcast_down(SimState& s, NodeId v, const Vector& model) {
  s.version[v] = model;
  Vector push = model;
  if (const MaliciousServer* ms =
          malicious_server_at(s, v, ServerAttackMode::ScaleDownBroadcast)) {
    push = poison_broadcast({model, s.setup->arch}, ms->gamma,
                            s.setup->poison_perturbation.at(v))
               .values;
  }
  for (NodeId c : s.h.node(v).children) {
    if (s.withheld.count(c)) continue;  // the whole subtree stays stale
    trace_down_delivery(s, v, c, push.size());
    broadcast_down(s, c, push);
  }
}

}  // namespace

RunResult run_prepared(const EngineSetup& setup) {
  SimState s;
  s.setup = &setup;
  s.h = setup.hierarchy;
  for (const auto& [id, n] : s.h.nodes()) {
    (void)n;
    s.version[id] = setup.init_values;
  }

  RunResult result;
  const NodeId root = s.h.root();

  for (int round = 1; round <= setup.global_rounds; ++round) {
    s.round = round;
    s.new_links_this_round = 0;
    s.trained_this_round.clear();

    for (const ChurnEvent& ev : setup.churn) {
      if (ev.round != round) continue;
      if (!s.h.contains(ev.remove)) {
        note(s, -1, ev.remove, 0.0, "churn_noop");
        continue;
      }
      if (ev.remove == root) {
        note(s, -1, ev.remove, 0.0, "churn_noop");
        continue;
      }
      s.h = remove_subtree(s.h, ev.remove);
      note(s, -1, ev.remove, 0.0, "churn");
    }

    TraceEvent begin;
    begin.kind = TraceKind::RoundBegin;
    begin.round = round;
    s.trace.push(begin);

    run_node_round(s, root);

    // Branch models are evaluated before the broadcast overwrites them.
    std::vector<MetricsRecord> branch_rows;
    if (setup.per_branch_eval) {
      for (const auto& [id, n] : s.h.nodes()) {
        if (n.kind != NodeKind::GroupServer) continue;
        const auto [acc, loss] = evaluate({s.version.at(id), setup.arch},
                                          setup.test);
        MetricsRecord row;
        row.round = round;
        row.node = id;
        row.test_accuracy = acc;
        row.test_loss = loss;
        branch_rows.push_back(row);
      }
    }

    broadcast_down(s, root, s.version.at(root));
    s.withheld.clear();

    const auto [acc, loss] = evaluate({s.version.at(root), setup.arch},
                                      setup.test);
    MetricsRecord row;
    row.round = round;
    row.node = root;
    row.test_accuracy = acc;
    row.test_loss = loss;
    for (const Notification& n : s.notifications) {
      if (n.round != round) continue;
      if (n.note == "excluded" || n.note == "withheld" || n.note == "flagged") {
        row.detections += 1;
      }
      if (n.note == "excluded") row.exclusions += 1;
    }
    if (s.probe_outcome && s.probe_outcome->round == round &&
        s.probe_outcome->reconstructed) {
      row.recon_err = s.probe_outcome->max_abs_error;
    }
    row.new_links = s.new_links_this_round;
    row.participants = static_cast<int>(s.trained_this_round.size());
    result.metrics.push_back(row);
    for (MetricsRecord& br : branch_rows) {
      br.new_links = 0;
      result.metrics.push_back(br);
    }

    TraceEvent end;
    end.kind = TraceKind::RoundEnd;
    end.round = round;
    s.trace.push(end);
  }

  // Per-round costs come from the trace so that account_costs stays usable
  // on its own.
  const auto costs = account_costs(s.trace, setup.cost);
  for (MetricsRecord& row : result.metrics) {
    if (row.node != root) continue;
    auto it = costs.find(row.round);
    if (it == costs.end()) continue;
    row.comm_up_bytes = it->second.up_bytes;
    row.comm_down_bytes = it->second.down_bytes;
    row.verify_units = it->second.verify_units;
  }

  result.final_model = ModelParams{s.version.at(root), setup.arch};
  std::tie(result.final_accuracy, result.final_loss) =
      evaluate(result.final_model, setup.test);
  result.trace = std::move(s.trace);
  result.adversary_log = std::move(s.adv_log);
  result.notifications = std::move(s.notifications);
  result.linkability =
      audit_linkability(result.trace, setup.global_rounds, root);
  result.probe = std::move(s.probe_outcome);
  result.final_hierarchy = s.h;
  for (const auto& [id, n] : s.h.nodes()) {
    (void)n;
    result.node_versions[id] = s.version.at(id);
  }

  for (const auto& [u, pipeline] : setup.user_pipeline) {
    const double sigma = pipeline.noise_sigma();
    const double clip = pipeline.clip_norm();
    if (sigma > 0.0 && clip > 0.0) {
      const int rounds = s.participation.count(u) ? s.participation.at(u) : 0;
      const PrivacyAccount acc_row = privacy_accounting(sigma, clip, rounds);
      result.privacy.push_back({u, acc_row.noise_multiplier, acc_row.rounds});
    }
  }
  return result;
}

RunResult run_simulation(const ScenarioConfig& cfg) {
  return run_prepared(prepare_setup(cfg));
}

Vector flat_reference_model(const EngineSetup& setup) {
  Vector params = setup.init_values;
  const std::vector<NodeId> users = setup.hierarchy.users();
  for (int round = 1; round <= setup.global_rounds; ++round) {
    Vector sum = Vector::Zero(params.size());
    double total_weight = 0.0;
    for (NodeId u : users) {
      const auto it = setup.shards.find(u);
      if (it == setup.shards.end() || it->second.empty()) continue;
      const std::uint64_t seed = node_stream_seed(
          setup.master_seed, StreamTag::Train, u,
          static_cast<std::uint64_t>(round - 1));
      auto [trained, weight] = local_train({params, setup.arch}, setup.train,
                                           it->second, setup.user_hp.at(u),
                                           seed);
      sum += static_cast<double>(weight) * (trained.values - params);
      total_weight += static_cast<double>(weight);
    }
    if (total_weight > 0.0) params += sum / total_weight;
  }
  return params;
}

}  // namespace hfl

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

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hfl/adversary.hpp"
#include "hfl/config.hpp"
#include "hfl/defense.hpp"
#include "hfl/trace.hpp"

namespace hfl {

// Everything a run needs, resolved from a validated ScenarioConfig:
// generated data, per-user shards, and per-node knob tables. Flattening for
// the hierarchy-vs-flat comparison operates at this level so per-group
// settings survive the loss of the group servers.
struct EngineSetup {
  std::uint64_t master_seed = 0;
  Hierarchy hierarchy;
  Dataset train;
  Dataset test;
  Partition shards;
  ModelArch arch;
  Vector init_values;
  std::map<NodeId, Hyperparams> user_hp;
  std::map<NodeId, DefensePipeline> user_pipeline;
  std::map<NodeId, DefensePipeline> server_pipeline;
  std::map<NodeId, AggChoice> aggregator;  // per aggregating node
  bool masking = false;
  std::uint64_t mask_seed = 0;
  std::map<NodeId, DetectionPolicy> detection;
  std::vector<AdversarySpec> adversaries;
  std::map<NodeId, Vector> poison_perturbation;  // per malicious server
  std::optional<ProbeConfig> probe;
  int global_rounds = 0;
  std::vector<ChurnEvent> churn;
  CostConfig cost;
  bool per_branch_eval = false;
};

// One CSV row. Cost fields are per round; recon_err appears only on rounds
// where the probe fired and reconstruction succeeded.
struct MetricsRecord {
  int round = 0;
  NodeId node = -1;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
  double comm_up_bytes = 0.0;
  double comm_down_bytes = 0.0;
  double verify_units = 0.0;
  int detections = 0;
  int exclusions = 0;
  std::optional<double> recon_err;
  int new_links = 0;     // first-seen unmasked user-update exposures
  int participants = 0;  // distinct users trained this round
};

struct ProbeOutcome {
  NodeId user = -1;
  int round = 0;
  Vector true_features;
  int true_label = -1;
  bool reconstructed = false;
  Vector rec_features;
  int rec_label = -1;
  double max_abs_error = 0.0;
  std::string failure;
};

struct PrivacyAccountRow {
  NodeId user = -1;
  double noise_multiplier = 0.0;
  int rounds = 0;
};

struct RunResult {
  ModelParams final_model;
  double final_accuracy = 0.0;
  double final_loss = 0.0;
  std::vector<MetricsRecord> metrics;
  Trace trace;
  AdversaryLog adversary_log;
  LinkabilityReport linkability;
  std::vector<Notification> notifications;
  std::vector<PrivacyAccountRow> privacy;
  std::optional<ProbeOutcome> probe;
  Hierarchy final_hierarchy;
  std::map<NodeId, Vector> node_versions;  // model each node ended up with
};

// k = max(1, round-half-up(fraction * |children|)) children drawn without
// replacement; the result is sorted ascending by id.
std::vector<NodeId> sample_children(const std::vector<NodeId>& children,
                                    double fraction, Rng& rng);

EngineSetup prepare_setup(const ScenarioConfig& cfg);

// Same users directly under the root with a trivial schedule and no leaf
// masking; everything keyed per user carries over.
EngineSetup flatten_setup(const EngineSetup& setup);

RunResult run_prepared(const EngineSetup& setup);

// load -> prepare -> run.
RunResult run_simulation(const ScenarioConfig& cfg);

// Straight-line FedAvg over all users with the same per-user seed streams;
// the reference the hierarchical engine must reproduce under a trivial
// schedule.
Vector flat_reference_model(const EngineSetup& setup);

// Cost model evaluation.
double verification_cost(const CostConfig& cost, int children);
double message_bytes(Eigen::Index param_count);

struct PerRoundCosts {
  double up_bytes = 0.0;
  double down_bytes = 0.0;
  double verify_units = 0.0;
};

// Folds a complete run trace into per-round communication and verification
// totals.
std::map<int, PerRoundCosts> account_costs(const Trace& trace,
                                           const CostConfig& cost);

// Seed streams, exposed so reference paths replay the exact draws.
std::uint64_t node_stream_seed(std::uint64_t master, StreamTag tag, NodeId node,
                               std::uint64_t occurrence);

}  // namespace hfl

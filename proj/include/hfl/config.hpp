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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hfl/adversary.hpp"
#include "hfl/defense.hpp"
#include "hfl/model.hpp"
#include "hfl/privacy.hpp"
#include "hfl/topology.hpp"

namespace hfl {

enum class AggMethod { FedAvg, Median, TrimmedMean };

const char* agg_method_name(AggMethod m) noexcept;

struct AggChoice {
  AggMethod method = AggMethod::FedAvg;
  double beta = 0.1;  // trimmed mean only
};

enum class PartitionKind { Iid, LabelSkew };

struct TrustConfig {
  std::vector<NodeId> users;
  TrustGraph graph;  // carries the same user list plus the edge set
  double threshold = 0.5;
};

struct DataConfig {
  int classes = 2;
  int dim = 2;
  int n_per_class = 50;
  double spread = 0.1;
  std::optional<std::uint64_t> seed;  // defaults to a stream off the master
  PartitionKind partition = PartitionKind::Iid;
  double alpha = 1.0;  // label-skew concentration
  double test_fraction = 0.2;
  bool export_csv = false;
};

struct ModelConfig {
  ArchKind arch = ArchKind::LogReg;
  int hidden = 16;  // mlp1 only
  Hyperparams hyperparams;
};

// Per-group knobs, keyed by the group's (lowest-layer) server.
struct GroupOverride {
  NodeId server = -1;
  std::optional<DefensePipeline> pipeline;
  std::optional<Hyperparams> hyperparams;
};

struct ServerPipelineEntry {
  NodeId node = -1;
  DefensePipeline pipeline;
};

struct LayerAggregator {
  int layer = 0;  // depth from the root
  AggChoice choice;
};

struct MaskingConfig {
  bool enabled = false;
  std::optional<std::uint64_t> pairwise_seed;
};

struct DetectionEntry {
  NodeId node = -1;
  DetectionPolicy policy;
};

struct ProbeConfig {
  NodeId user = -1;
  int round = 1;
};

enum class VerifyKind { Linear, Poly, Exp };

struct CostConfig {
  VerifyKind kind = VerifyKind::Linear;
  double base = 2.0;    // Exp
  double exponent = 1.0;  // Poly
};

struct ChurnEvent {
  int round = 0;
  NodeId remove = -1;
};

struct OutputConfig {
  std::string directory = "out";
  bool trace_jsonl = false;
  bool per_branch_eval = false;
  bool dump_params_csv = false;
};

// Complete declarative description of one experiment. All randomness is
// derived from the mandatory master seed.
struct ScenarioConfig {
  std::uint64_t master_seed = 0;
  bool master_seed_present = true;  // seeds are mandatory; no implicit entropy
  HierarchySpec hierarchy;
  std::optional<TrustConfig> trust;
  DataConfig data;
  ModelConfig model;
  DefensePipeline user_default_pipeline;
  std::vector<GroupOverride> group_overrides;
  std::vector<ServerPipelineEntry> server_pipelines;
  AggChoice default_aggregator;
  std::vector<LayerAggregator> layer_aggregators;
  MaskingConfig masking;
  std::vector<DetectionEntry> detection;
  std::vector<AdversarySpec> adversaries;
  std::optional<ProbeConfig> probe;
  int global_rounds = 1;
  std::vector<ChurnEvent> churn;
  CostConfig cost;
  OutputConfig output;
};

struct ValidationIssue {
  std::string where;    // config path, e.g. "aggregation.masking"
  std::string message;
};

// Parses the JSON config document. Structural problems (malformed JSON,
// wrong value types, unknown keys) raise ParseError with line information.
ScenarioConfig load_scenario(const std::filesystem::path& path);

// Cross-validates a parsed config and returns every problem found, not just
// the first one.
std::vector<ValidationIssue> validate_scenario(const ScenarioConfig& cfg);

// Convenience: load, validate, and raise ValidationFailed listing all
// issues if any were found.
ScenarioConfig load_and_validate(const std::filesystem::path& path);

// The hierarchy actually simulated: trust-graph clustering (when present)
// attaches user groups to the childless group servers before the build.
Hierarchy resolve_topology(const ScenarioConfig& cfg);

}  // namespace hfl

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

#include <filesystem>
#include <optional>
#include <string>

#include "hfl/engine.hpp"

namespace hfl {

// All documents are written atomically (temp file + rename).
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

// Columns, in order: round, node, test_accuracy, test_loss, comm_up_bytes,
// comm_down_bytes, verify_units, detections, exclusions, recon_err.
std::string metrics_csv(const std::vector<MetricsRecord>& metrics);

std::string results_json(const ScenarioConfig& cfg, const RunResult& result);
std::string linkability_json(const LinkabilityReport& report);

// One JSON object per observation; carries the full delta so the log alone
// suffices to mount the reconstruction attack offline.
std::string adversary_jsonl(const AdversaryLog& log);

// The projection of a delivered update an observer writes down; the replay
// check renders trace deliveries through the same function.
std::string observation_record(int round, NodeId observer, NodeId origin,
                               double weight, bool masked, double norm,
                               Eigen::Index params);

std::string trace_jsonl(const Trace& trace);

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> rounds;
  std::optional<std::string> out_dir;
};

// Exit codes: 0 success, 2 config/validation failure, 1 runtime error.
int cmd_run(const std::filesystem::path& config_path, const RunOverrides& ov);
int cmd_validate(const std::filesystem::path& config_path);
int cmd_compare_flat(const std::filesystem::path& config_path,
                     const RunOverrides& ov);

}  // namespace hfl

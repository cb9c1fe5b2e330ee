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
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hfl/aggregation.hpp"
#include "hfl/topology.hpp"
#include "hfl/trace.hpp"
#include "hfl/types.hpp"

namespace hfl {

enum class DetectionResponse { FlagOnly, Exclude, WithholdBroadcast };

const char* detection_response_name(DetectionResponse r) noexcept;

// Update-norm outlier detection via robust z-scores.
struct DetectionPolicy {
  double threshold = 3.0;
  DetectionResponse response = DetectionResponse::FlagOnly;
  // Optional countermeasure: a notified (flagged) group server switches its
  // own aggregator to median from the next round.
  bool notify_switch_median = false;
};

struct DetectionOutcome {
  std::vector<std::pair<NodeId, double>> flagged;  // (origin, z), id-ascending
  bool undetectable = false;                       // fewer than 3 updates
};

// Robust z-score of each update's L2 norm:
//   z = |norm - median| / (1.4826 * MAD + 1e-9)
// Origins with z > threshold are flagged. With fewer than 3 updates the
// outcome is empty and marked undetectable.
DetectionOutcome detect_anomalies(std::span<const Update> updates,
                                  const DetectionPolicy& policy);

struct Notification {
  NodeId detector = -1;
  NodeId flagged = -1;
  int round = 0;
  double zscore = 0.0;
  std::string note;  // e.g. "excluded", "withheld", "flagged", "undetectable"
};

struct RespondOutcome {
  Hierarchy hierarchy;
  std::set<NodeId> withheld;  // children whose downward push is gated
  std::vector<Notification> notifications;
};

// Applies the policy's response to the flagged children of `detector`.
// Exclude removes each flagged subtree (weights renormalize implicitly in
// the weighted aggregate); WithholdBroadcast gates the downward push.
RespondOutcome respond(const Hierarchy& h, NodeId detector,
                       std::span<const std::pair<NodeId, double>> flagged,
                       const DetectionPolicy& policy, int round);

// Who could attribute an individual update to a specific user.
struct LinkabilityReport {
  std::map<NodeId, std::set<NodeId>> links;  // observer -> linked users
  std::map<int, int> per_layer_counts;       // observer depth -> pair count
  int total_links = 0;
  int root_links = 0;  // pairs whose observer is the root

  bool linked(NodeId observer, NodeId user) const;
};

// Scans a complete run trace: (observer, user) is marked iff the observer
// received an unmasked update originating from that individual user (or an
// all-but-one dropout exposed it). Nodes that only ever receive aggregates
// are never marked.
LinkabilityReport audit_linkability(const Trace& trace, int global_rounds,
                                    NodeId root);

}  // namespace hfl

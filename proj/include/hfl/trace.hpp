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

#include <vector>

#include "hfl/types.hpp"

namespace hfl {

enum class TraceKind {
  RoundBegin,
  RoundEnd,
  UpDelivery,    // update delivered child -> parent
  DownDelivery,  // model pushed parent -> child
  Verify,        // node verified its children's inputs
  Exposure,      // masking degenerated to a single visible contribution
};

// One record of the simulated message schedule. The complete trace is the
// ground truth that cost accounting, the linkability audit, and the
// adversary-log replay check all consume.
struct TraceEvent {
  TraceKind kind = TraceKind::UpDelivery;
  int round = 0;              // global round stamp
  NodeId receiver = -1;       // delivery target / verifying node
  int receiver_depth = 0;     // depth of receiver at delivery time
  NodeId origin = -1;         // update origin, or push source for DownDelivery
  bool origin_is_user = false;
  bool masked = false;
  double weight = 0.0;
  double norm = 0.0;  // delta L2 norm for UpDelivery (replay checks)
  Eigen::Index param_count = 0;
  int verified_children = 0;  // Verify events only
};

struct Trace {
  std::vector<TraceEvent> events;

  void push(TraceEvent e) { events.push_back(e); }
};

}  // namespace hfl

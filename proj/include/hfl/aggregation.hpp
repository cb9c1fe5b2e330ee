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
#include <span>
#include <vector>

#include "hfl/types.hpp"

namespace hfl {

// The unit of everything aggregated: a parameter delta plus its sample
// weight, stamped with where and when it was produced.
struct Update {
  Vector delta;
  double weight = 1.0;
  NodeId origin = -1;
  int round = 0;
  bool masked = false;
};

// Sample-count-weighted average; summation runs in input order (the engine
// supplies id-sorted input, making the result order-canonical).
Update fedavg(std::span<const Update> updates, NodeId origin, int round);

// Coordinate-wise median (even count: mean of the middle two). Weights are
// ignored in the statistic but still summed into the result weight.
Update median_aggregate(std::span<const Update> updates, NodeId origin,
                        int round);

// Per coordinate, drops floor(beta*m) values from each end and averages the
// rest, unweighted.
Update trimmed_mean_aggregate(std::span<const Update> updates, double beta,
                              NodeId origin, int round);

struct MaskGroup {
  std::vector<NodeId> members;  // >= 2 for masking to hide anything
  std::uint64_t pairwise_seed = 0;
};

// Pairwise-canceling masks, applied to the weighted contribution w*delta and
// divided back by w, so fedavg over a complete group reproduces the plain
// aggregate regardless of weights. Each mask coordinate is uniform in
// [-10, 10], drawn from a stream seeded by (pairwise_seed, i, j).
std::vector<Update> mask_updates(std::span<const Update> updates,
                                 const MaskGroup& group);

// Sum of the masks shared between survivors and dropped members, signed as
// they appear in the survivors' masked deltas. Subtracting it from the
// survivors' weighted sum cancels the leftover masks.
Vector unmask_on_dropout(const MaskGroup& group,
                         const std::vector<NodeId>& surviving,
                         Eigen::Index dim);

// fedavg over the surviving masked updates with the dropout correction
// applied; equals fedavg of the survivors' unmasked updates within 1e-9.
Update fedavg_with_dropout(std::span<const Update> masked_survivors,
                           const MaskGroup& group, NodeId origin, int round);

}  // namespace hfl

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

#include "hfl/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "hfl/errors.hpp"
#include "hfl/rng.hpp"

namespace hfl {

namespace {

Eigen::Index checked_dim(std::span<const Update> updates) {
  if (updates.empty()) raise(Errc::EmptyInput, "no updates to aggregate");
  const Eigen::Index dim = updates.front().delta.size();
  for (const Update& u : updates) {
    if (u.delta.size() != dim) {
      raise(Errc::LengthMismatch,
            "update from node " + std::to_string(u.origin) +
                " has length " + std::to_string(u.delta.size()) + ", expected " +
                std::to_string(dim));
    }
    if (u.weight <= 0.0) {
      raise(Errc::InvalidSize,
            "update from node " + std::to_string(u.origin) +
                " has non-positive weight");
    }
  }
  return dim;
}

Vector pair_mask(const MaskGroup& group, NodeId i, NodeId j, Eigen::Index dim) {
  Rng rng(derive_seed(group.pairwise_seed, StreamTag::Mask,
                      {static_cast<std::uint64_t>(i),
                       static_cast<std::uint64_t>(j)}));
  // Bounded masks keep the floating-point cancellation error well under the
  // 1e-9 budget at the scales this simulator runs at.
  return rng.uniform_vector(dim, -10.0, 10.0);
}

}  // namespace

Update fedavg(std::span<const Update> updates, NodeId origin, int round) {
  const Eigen::Index dim = checked_dim(updates);
  Vector sum = Vector::Zero(dim);
  double total_weight = 0.0;
  for (const Update& u : updates) {
    sum += u.weight * u.delta;
    total_weight += u.weight;
  }
  Update out;
  out.delta = sum / total_weight;
  out.weight = total_weight;
  out.origin = origin;
  out.round = round;
  return out;
}

Update median_aggregate(std::span<const Update> updates, NodeId origin,
                        int round) {
  const Eigen::Index dim = checked_dim(updates);
  const std::size_t m = updates.size();
  Update out;
  out.delta.resize(dim);
  std::vector<double> column(m);
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (std::size_t i = 0; i < m; ++i) column[i] = updates[i].delta[c];
    std::sort(column.begin(), column.end());
    out.delta[c] = (m % 2 == 1)
                       ? column[m / 2]
                       : 0.5 * (column[m / 2 - 1] + column[m / 2]);
  }
  out.weight = 0.0;
  for (const Update& u : updates) out.weight += u.weight;
  out.origin = origin;
  out.round = round;
  return out;
}

Update trimmed_mean_aggregate(std::span<const Update> updates, double beta,
                              NodeId origin, int round) {
  const Eigen::Index dim = checked_dim(updates);
  if (!(beta >= 0.0 && beta < 0.5)) {
    raise(Errc::InvalidSize, "beta must lie in [0, 0.5)");
  }
  const std::size_t m = updates.size();
  const std::size_t trim = static_cast<std::size_t>(
      std::floor(beta * static_cast<double>(m)));
  if (2 * trim >= m) {
    raise(Errc::OverTrimmed, "trimming " + std::to_string(trim) +
                                 " from each end of " + std::to_string(m) +
                                 " leaves nothing");
  }
  Update out;
  out.delta.resize(dim);
  std::vector<double> column(m);
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (std::size_t i = 0; i < m; ++i) column[i] = updates[i].delta[c];
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (std::size_t i = trim; i < m - trim; ++i) sum += column[i];
    out.delta[c] = sum / static_cast<double>(m - 2 * trim);
  }
  out.weight = 0.0;
  for (const Update& u : updates) out.weight += u.weight;
  out.origin = origin;
  out.round = round;
  return out;
}

std::vector<Update> mask_updates(std::span<const Update> updates,
                                 const MaskGroup& group) {
  if (group.members.size() < 2) {
    raise(Errc::MemberMismatch, "mask group needs at least 2 members");
  }
  std::vector<NodeId> origins;
  for (const Update& u : updates) origins.push_back(u.origin);
  std::sort(origins.begin(), origins.end());
  std::vector<NodeId> members = group.members;
  std::sort(members.begin(), members.end());
  if (origins != members) {
    raise(Errc::MemberMismatch, "update origins do not match mask group");
  }
  const Eigen::Index dim = checked_dim(updates);

  std::vector<Update> out(updates.begin(), updates.end());
  for (Update& u : out) {
    Vector weighted = u.weight * u.delta;
    for (NodeId other : members) {
      if (other == u.origin) continue;
      if (u.origin < other) {
        weighted += pair_mask(group, u.origin, other, dim);
      } else {
        weighted -= pair_mask(group, other, u.origin, dim);
      }
    }
    u.delta = weighted / u.weight;
    u.masked = true;
  }
  return out;
}

Vector unmask_on_dropout(const MaskGroup& group,
                         const std::vector<NodeId>& surviving,
                         Eigen::Index dim) {
  if (surviving.empty()) raise(Errc::NoSurvivors, "no surviving members");
  std::vector<NodeId> members = group.members;
  std::sort(members.begin(), members.end());
  for (NodeId s : surviving) {
    if (!std::binary_search(members.begin(), members.end(), s)) {
      raise(Errc::MemberMismatch,
            "survivor " + std::to_string(s) + " not in mask group");
    }
  }
  std::vector<NodeId> dropped;
  for (NodeId m : members) {
    if (std::find(surviving.begin(), surviving.end(), m) == surviving.end()) {
      dropped.push_back(m);
    }
  }
  Vector correction = Vector::Zero(dim);
  for (NodeId s : surviving) {
    for (NodeId d : dropped) {
      if (s < d) {
        correction += pair_mask(group, s, d, dim);
      } else {
        correction -= pair_mask(group, d, s, dim);
      }
    }
  }
  return correction;
}

Update fedavg_with_dropout(std::span<const Update> masked_survivors,
                           const MaskGroup& group, NodeId origin, int round) {
  const Eigen::Index dim = checked_dim(masked_survivors);
  std::vector<NodeId> surviving;
  for (const Update& u : masked_survivors) surviving.push_back(u.origin);
  const Vector correction = unmask_on_dropout(group, surviving, dim);

  Vector sum = Vector::Zero(dim);
  double total_weight = 0.0;
  for (const Update& u : masked_survivors) {
    sum += u.weight * u.delta;
    total_weight += u.weight;
  }
  sum -= correction;

  Update out;
  out.delta = sum / total_weight;
  out.weight = total_weight;
  out.origin = origin;
  out.round = round;
  return out;
}

}  // namespace hfl

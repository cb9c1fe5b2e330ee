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
#include <utility>
#include <vector>

#include "hfl/types.hpp"

namespace hfl {

enum class NodeKind { Root, GroupServer, User };

const char* node_kind_name(NodeKind kind) noexcept;

// One record of the declarative hierarchy section of a scenario config.
struct NodeSpecEntry {
  NodeId id = 0;
  NodeKind kind = NodeKind::User;
  std::optional<NodeId> parent;
  int rounds_before_sync = 1;     // local aggregation rounds before pushing up
  double sampling_fraction = 1.0; // fraction of children sampled per round
};

struct HierarchySpec {
  std::vector<NodeSpecEntry> nodes;
};

struct Node {
  NodeId id = 0;
  NodeKind kind = NodeKind::User;
  std::vector<NodeId> children;  // kept sorted ascending
  int rounds_before_sync = 1;
  double sampling_fraction = 1.0;
};

// Validated tree of root / group servers / users. Immutable after build;
// mutations return new values, so read-only sharing across workers is safe.
class Hierarchy {
 public:
  Hierarchy() = default;

  const std::map<NodeId, Node>& nodes() const { return nodes_; }
  bool contains(NodeId id) const { return nodes_.count(id) > 0; }
  const Node& node(NodeId id) const;
  NodeId root() const { return root_; }
  std::optional<NodeId> parent(NodeId id) const;

  std::vector<NodeId> users() const;               // sorted ascending
  std::vector<NodeId> users_under(NodeId id) const;
  std::vector<NodeId> subtree(NodeId id) const;    // id plus all descendants
  // Group servers whose children are all users, sorted ascending.
  std::vector<NodeId> leaf_servers() const;
  int depth(NodeId id) const;  // root has depth 0
  int max_depth() const;
  std::size_t size() const { return nodes_.size(); }

  friend Hierarchy build_hierarchy(const HierarchySpec& spec);
  friend Hierarchy remove_subtree(const Hierarchy& h, NodeId id);

 private:
  std::map<NodeId, Node> nodes_;
  std::map<NodeId, NodeId> parent_;
  NodeId root_ = -1;

  void validate() const;
};

Hierarchy build_hierarchy(const HierarchySpec& spec);

// Removes id and its descendants. Group servers emptied by the removal are
// pruned recursively upward; the root always stays.
Hierarchy remove_subtree(const Hierarchy& h, NodeId id);

// Symmetric weighted trust between users; used to form user groups.
struct TrustGraph {
  std::vector<NodeId> users;
  // Keyed with the smaller id first.
  std::map<std::pair<NodeId, NodeId>, double> edges;

  void add_edge(NodeId a, NodeId b, double weight);
};

// Drops edges below the threshold and returns the connected components,
// ordered by smallest member id. Isolated users become singleton groups.
std::vector<std::vector<NodeId>> cluster_by_trust(const TrustGraph& graph,
                                                  double threshold);

// Attaches group k's users as children of the k-th childless group server
// (group order and server order both ascending by id).
HierarchySpec attach_groups(const HierarchySpec& spec,
                            const std::vector<std::vector<NodeId>>& groups);

}  // namespace hfl

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

#include "hfl/topology.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "hfl/errors.hpp"

namespace hfl {

namespace {

std::string id_str(NodeId id) { return "node " + std::to_string(id); }

}  // namespace

const char* node_kind_name(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::Root:
      return "root";
    case NodeKind::GroupServer:
      return "group_server";
    case NodeKind::User:
      return "user";
  }
  return "unknown";
}

const Node& Hierarchy::node(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) raise(Errc::NodeNotFound, id_str(id));
  return it->second;
}

std::optional<NodeId> Hierarchy::parent(NodeId id) const {
  auto it = parent_.find(id);
  if (it == parent_.end()) return std::nullopt;
  return it->second;
}

std::vector<NodeId> Hierarchy::users() const {
  std::vector<NodeId> out;
  for (const auto& [id, n] : nodes_) {
    if (n.kind == NodeKind::User) out.push_back(id);
  }
  return out;
}

std::vector<NodeId> Hierarchy::subtree(NodeId id) const {
  const Node& n = node(id);
  std::vector<NodeId> out{n.id};
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (NodeId c : node(out[i]).children) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<NodeId> Hierarchy::users_under(NodeId id) const {
  std::vector<NodeId> out;
  for (NodeId v : subtree(id)) {
    if (node(v).kind == NodeKind::User) out.push_back(v);
  }
  return out;
}

std::vector<NodeId> Hierarchy::leaf_servers() const {
  std::vector<NodeId> out;
  for (const auto& [id, n] : nodes_) {
    if (n.kind == NodeKind::User || n.children.empty()) continue;
    bool all_users = true;
    for (NodeId c : n.children) {
      if (node(c).kind != NodeKind::User) {
        all_users = false;
        break;
      }
    }
    if (all_users) out.push_back(id);
  }
  return out;
}

int Hierarchy::depth(NodeId id) const {
  node(id);  // existence check
  int d = 0;
  NodeId cur = id;
  while (true) {
    auto it = parent_.find(cur);
    if (it == parent_.end()) break;
    cur = it->second;
    ++d;
  }
  return d;
}

int Hierarchy::max_depth() const {
  int m = 0;
  for (const auto& [id, n] : nodes_) m = std::max(m, depth(id));
  return m;
}

void Hierarchy::validate() const {
  if (root_ < 0 || !contains(root_)) raise(Errc::NoRoot, "hierarchy has no root");
  // Edge count: every non-root node has exactly one parent.
  if (parent_.size() != nodes_.size() - 1) {
    raise(Errc::CycleDetected, "edge count does not match node count - 1");
  }
  for (const auto& [id, n] : nodes_) {
    if (n.kind == NodeKind::User && !n.children.empty()) {
      raise(Errc::UserWithChildren, id_str(id));
    }
    if (n.kind == NodeKind::GroupServer && n.children.empty()) {
      raise(Errc::EmptyGroupServer, id_str(id));
    }
    if (n.rounds_before_sync < 1) {
      raise(Errc::InvalidSize, id_str(id) + " rounds_before_sync must be >= 1");
    }
    if (!(n.sampling_fraction > 0.0 && n.sampling_fraction <= 1.0)) {
      raise(Errc::InvalidSize, id_str(id) + " sampling_fraction must be in (0,1]");
    }
  }
  // Reachability from the root covers every node (connected, acyclic).
  std::set<NodeId> seen;
  std::vector<NodeId> stack{root_};
  while (!stack.empty()) {
    NodeId v = stack.back();
    stack.pop_back();
    if (!seen.insert(v).second) raise(Errc::CycleDetected, id_str(v));
    for (NodeId c : node(v).children) stack.push_back(c);
  }
  if (seen.size() != nodes_.size()) {
    for (const auto& [id, n] : nodes_) {
      if (!seen.count(id)) raise(Errc::CycleDetected, id_str(id));
    }
  }
}

Hierarchy build_hierarchy(const HierarchySpec& spec) {
  Hierarchy h;
  for (const NodeSpecEntry& e : spec.nodes) {
    if (e.id < 0) raise(Errc::InvalidSize, id_str(e.id) + " id must be non-negative");
    Node n;
    n.id = e.id;
    n.kind = e.kind;
    n.rounds_before_sync = e.rounds_before_sync;
    n.sampling_fraction = e.sampling_fraction;
    if (!h.nodes_.emplace(e.id, n).second) raise(Errc::DuplicateNode, id_str(e.id));
  }
  for (const NodeSpecEntry& e : spec.nodes) {
    if (e.kind == NodeKind::Root) {
      if (e.parent) raise(Errc::RootHasParent, id_str(e.id));
      if (h.root_ >= 0) raise(Errc::MultipleRoots, id_str(e.id));
      h.root_ = e.id;
      continue;
    }
    if (!e.parent) raise(Errc::OrphanNode, id_str(e.id));
    if (!h.contains(*e.parent)) raise(Errc::DanglingParent, id_str(e.id));
    h.parent_[e.id] = *e.parent;
    h.nodes_[*e.parent].children.push_back(e.id);
  }
  for (auto& [id, n] : h.nodes_) {
    std::sort(n.children.begin(), n.children.end());
  }
  h.validate();
  return h;
}

Hierarchy remove_subtree(const Hierarchy& h, NodeId id) {
  if (!h.contains(id)) raise(Errc::NodeNotFound, id_str(id));
  if (id == h.root()) raise(Errc::CannotRemoveRoot, id_str(id));

  Hierarchy out = h;
  NodeId victim = id;
  while (true) {
    const auto doomed = out.subtree(victim);
    const NodeId parent = out.parent_.at(victim);
    for (NodeId v : doomed) {
      out.nodes_.erase(v);
      out.parent_.erase(v);
    }
    auto& siblings = out.nodes_.at(parent).children;
    siblings.erase(std::remove(siblings.begin(), siblings.end(), victim),
                   siblings.end());
    // A group server emptied by the removal is pruned as well; the root stays.
    if (parent != out.root() && out.nodes_.at(parent).children.empty()) {
      victim = parent;
      continue;
    }
    break;
  }
  out.validate();
  return out;
}

void TrustGraph::add_edge(NodeId a, NodeId b, double weight) {
  if (a == b) raise(Errc::InvalidSize, "trust graph forbids self-edges");
  if (weight < 0.0 || weight > 1.0) {
    raise(Errc::InvalidSize, "trust weight must lie in [0,1]");
  }
  edges[{std::min(a, b), std::max(a, b)}] = weight;
}

std::vector<std::vector<NodeId>> cluster_by_trust(const TrustGraph& graph,
                                                  double threshold) {
  std::map<NodeId, NodeId> rep;  // union-find parent
  for (NodeId u : graph.users) rep[u] = u;

  auto find = [&](NodeId v) {
    while (rep.at(v) != v) {
      rep[v] = rep.at(rep.at(v));
      v = rep.at(v);
    }
    return v;
  };

  for (const auto& [key, w] : graph.edges) {
    if (w < threshold) continue;
    if (!rep.count(key.first) || !rep.count(key.second)) continue;
    NodeId a = find(key.first);
    NodeId b = find(key.second);
    if (a != b) rep[std::max(a, b)] = std::min(a, b);
  }

  std::map<NodeId, std::vector<NodeId>> by_rep;
  for (NodeId u : graph.users) by_rep[find(u)].push_back(u);

  std::vector<std::vector<NodeId>> groups;
  for (auto& [r, members] : by_rep) {
    std::sort(members.begin(), members.end());
    groups.push_back(std::move(members));
  }
  // by_rep is keyed by the smallest member, so groups are already ordered.
  return groups;
}

HierarchySpec attach_groups(const HierarchySpec& spec,
                            const std::vector<std::vector<NodeId>>& groups) {
  std::set<NodeId> has_child;
  std::set<NodeId> present;
  for (const NodeSpecEntry& e : spec.nodes) {
    if (e.parent) has_child.insert(*e.parent);
    present.insert(e.id);
  }
  std::vector<NodeId> slots;
  for (const NodeSpecEntry& e : spec.nodes) {
    if (e.kind == NodeKind::GroupServer && !has_child.count(e.id)) {
      slots.push_back(e.id);
    }
  }
  std::sort(slots.begin(), slots.end());
  if (slots.size() != groups.size()) {
    raise(Errc::GroupCountMismatch,
          std::to_string(groups.size()) + " groups vs " +
              std::to_string(slots.size()) + " childless group servers");
  }

  HierarchySpec out = spec;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    for (NodeId u : groups[k]) {
      if (present.count(u)) {
        raise(Errc::DuplicateNode, id_str(u) + " already present in spec");
      }
      NodeSpecEntry e;
      e.id = u;
      e.kind = NodeKind::User;
      e.parent = slots[k];
      out.nodes.push_back(e);
    }
  }
  return out;
}

}  // namespace hfl

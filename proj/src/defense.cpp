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

#include "hfl/defense.hpp"

#include <algorithm>
#include <cmath>

#include "hfl/errors.hpp"

namespace hfl {

const char* detection_response_name(DetectionResponse r) noexcept {
  switch (r) {
    case DetectionResponse::FlagOnly:
      return "flag_only";
    case DetectionResponse::Exclude:
      return "exclude";
    case DetectionResponse::WithholdBroadcast:
      return "withhold_broadcast";
  }
  return "unknown";
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return (m % 2 == 1) ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace

DetectionOutcome detect_anomalies(std::span<const Update> updates,
                                  const DetectionPolicy& policy) {
  if (policy.threshold <= 0.0) {
    raise(Errc::InvalidSize, "detection threshold must be positive");
  }
  DetectionOutcome out;
  if (updates.size() < 3) {
    out.undetectable = true;
    return out;
  }
  std::vector<double> norms;
  norms.reserve(updates.size());
  for (const Update& u : updates) norms.push_back(u.delta.norm());

  const double med = median_of(norms);
  std::vector<double> dev;
  dev.reserve(norms.size());
  for (double n : norms) dev.push_back(std::abs(n - med));
  const double mad = median_of(dev);
  // The epsilon floor turns the identical-norms-plus-one-outlier case into a
  // guaranteed detection instead of a division by zero.
  const double scale = 1.4826 * mad + 1e-9;

  for (std::size_t i = 0; i < updates.size(); ++i) {
    const double z = std::abs(norms[i] - med) / scale;
    if (z > policy.threshold) out.flagged.emplace_back(updates[i].origin, z);
  }
  std::sort(out.flagged.begin(), out.flagged.end());
  return out;
}

RespondOutcome respond(const Hierarchy& h, NodeId detector,
                       std::span<const std::pair<NodeId, double>> flagged,
                       const DetectionPolicy& policy, int round) {
  RespondOutcome out;
  out.hierarchy = h;
  for (const auto& [child, z] : flagged) {
    Notification note;
    note.detector = detector;
    note.flagged = child;
    note.round = round;
    note.zscore = z;
    switch (policy.response) {
      case DetectionResponse::Exclude:
        out.hierarchy = remove_subtree(out.hierarchy, child);
        note.note = "excluded";
        break;
      case DetectionResponse::WithholdBroadcast:
        out.withheld.insert(child);
        note.note = "withheld";
        break;
      case DetectionResponse::FlagOnly:
        note.note = "flagged";
        break;
    }
    out.notifications.push_back(note);
  }
  return out;
}

bool LinkabilityReport::linked(NodeId observer, NodeId user) const {
  auto it = links.find(observer);
  return it != links.end() && it->second.count(user) > 0;
}

LinkabilityReport audit_linkability(const Trace& trace, int global_rounds,
                                    NodeId root) {
  std::set<int> begins;
  std::set<int> ends;
  for (const TraceEvent& e : trace.events) {
    if (e.kind == TraceKind::RoundBegin) begins.insert(e.round);
    if (e.kind == TraceKind::RoundEnd) ends.insert(e.round);
  }
  for (int r = 1; r <= global_rounds; ++r) {
    if (!begins.count(r) || !ends.count(r)) {
      raise(Errc::IncompleteTrace, "round " + std::to_string(r) +
                                       " missing from the message trace");
    }
  }

  LinkabilityReport report;
  for (const TraceEvent& e : trace.events) {
    const bool exposes =
        (e.kind == TraceKind::UpDelivery && e.origin_is_user && !e.masked) ||
        (e.kind == TraceKind::Exposure && e.origin_is_user);
    if (!exposes) continue;
    auto [it, fresh] = report.links[e.receiver].insert(e.origin);
    (void)it;
    if (fresh) {
      report.total_links += 1;
      report.per_layer_counts[e.receiver_depth] += 1;
      if (e.receiver == root) report.root_links += 1;
    }
  }
  return report;
}

}  // namespace hfl

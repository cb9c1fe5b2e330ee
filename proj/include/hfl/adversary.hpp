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

#include <string>
#include <variant>
#include <vector>

#include "hfl/aggregation.hpp"
#include "hfl/model.hpp"
#include "hfl/types.hpp"

namespace hfl {

struct PassiveObserver {
  NodeId at = -1;  // logs exactly what this node legitimately receives
};

struct MaliciousUser {
  NodeId id = -1;
  double gamma = 1.0;  // update-scaling factor
};

enum class ServerAttackMode { ScaleUp, ScaleDownBroadcast };

struct MaliciousServer {
  NodeId id = -1;
  double gamma = 1.0;
  ServerAttackMode mode = ServerAttackMode::ScaleUp;
};

struct AdversarySpec {
  std::variant<PassiveObserver, MaliciousUser, MaliciousServer> kind;
  int active_from_round = 1;
  int active_to_round = 1 << 30;

  bool active(int round) const {
    return round >= active_from_round && round <= active_to_round;
  }
};

// What a passive observer wrote down: one record per update it received.
struct Observation {
  int round = 0;
  NodeId observer = -1;
  Update update;
};

using AdversaryLog = std::vector<Observation>;

struct Reconstruction {
  Vector features;
  int label = -1;
};

// Inverts a single-sample, single-step logistic-regression update. With
// delta = -lr * grad, each weight row is (softmax - onehot)_c * x and each
// bias residual is (softmax - onehot)_c, so x falls out of the row/bias
// ratio for any class with a non-vanishing residual and the learning rate
// cancels. The label is the class with the most negative residual.
Reconstruction reconstruct_from_gradient(const Update& u,
                                         const ModelArch& arch,
                                         bool multi_sample_hint = false);

// delta <- gamma * delta; the attacker lies only in content, not count.
Update malicious_scale(const Update& u, double gamma);

// values <- gamma * values + perturbation (drawn once from the adversary's
// seeded stream).
ModelParams poison_broadcast(const ModelParams& m, double gamma,
                             const Vector& perturbation);

}  // namespace hfl

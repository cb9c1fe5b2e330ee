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

#include <variant>
#include <vector>

#include "hfl/aggregation.hpp"
#include "hfl/rng.hpp"
#include "hfl/types.hpp"

namespace hfl {

struct ClipStep {
  double max_norm = 1.0;
};

struct GaussNoiseStep {
  double sigma = 0.0;
};

struct FractionShareStep {
  double keep_fraction = 1.0;
};

using DefenseStep = std::variant<ClipStep, GaussNoiseStep, FractionShareStep>;

// Ordered perturbation steps applied to an update before it travels up.
// At most one Clip; Clip, if present, precedes GaussNoise.
struct DefensePipeline {
  std::vector<DefenseStep> steps;

  bool empty() const { return steps.empty(); }
  double noise_sigma() const;  // 0 when no GaussNoise step
  double clip_norm() const;    // 0 when no Clip step
};

// Throws InvalidPipeline on parameter or ordering violations.
void validate_pipeline(const DefensePipeline& pipeline);

// Scales delta by min(1, max_norm / ||delta||2); weight and origin unchanged.
Update clip_update(const Update& u, double max_norm);

// Adds independent N(0, sigma^2) per coordinate from the supplied stream.
Update add_gauss_noise(const Update& u, double sigma, Rng& rng);

// Keeps the ceil(k * len) coordinates of largest magnitude, zeroes the rest;
// ties break toward the lower coordinate index.
Update fraction_share(const Update& u, double keep_fraction);

Update apply_pipeline(const Update& u, const DefensePipeline& pipeline,
                      Rng& rng);

// Reported per user in metrics; no epsilon computation.
struct PrivacyAccount {
  double noise_multiplier = 0.0;  // sigma / clip
  int rounds = 0;                 // participation count
};

PrivacyAccount privacy_accounting(double sigma, double clip, int rounds);

}  // namespace hfl

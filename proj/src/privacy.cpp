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

#include "hfl/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hfl/errors.hpp"

namespace hfl {

double DefensePipeline::noise_sigma() const {
  for (const DefenseStep& s : steps) {
    if (const auto* g = std::get_if<GaussNoiseStep>(&s)) return g->sigma;
  }
  return 0.0;
}

double DefensePipeline::clip_norm() const {
  for (const DefenseStep& s : steps) {
    if (const auto* c = std::get_if<ClipStep>(&s)) return c->max_norm;
  }
  return 0.0;
}

void validate_pipeline(const DefensePipeline& pipeline) {
  int clips = 0;
  bool noise_seen = false;
  for (const DefenseStep& s : pipeline.steps) {
    if (const auto* c = std::get_if<ClipStep>(&s)) {
      ++clips;
      if (c->max_norm <= 0.0) {
        raise(Errc::InvalidPipeline, "clip norm must be positive");
      }
      if (noise_seen) {
        raise(Errc::InvalidPipeline, "Clip must precede GaussNoise");
      }
    } else if (const auto* g = std::get_if<GaussNoiseStep>(&s)) {
      noise_seen = true;
      if (g->sigma < 0.0) {
        raise(Errc::InvalidPipeline, "noise sigma must be non-negative");
      }
    } else {
      const auto& f = std::get<FractionShareStep>(s);
      if (!(f.keep_fraction > 0.0 && f.keep_fraction <= 1.0)) {
        raise(Errc::InvalidPipeline, "share fraction must lie in (0,1]");
      }
    }
  }
  if (clips > 1) raise(Errc::InvalidPipeline, "at most one Clip step");
}

Update clip_update(const Update& u, double max_norm) {
  if (max_norm <= 0.0) raise(Errc::InvalidPipeline, "clip norm must be positive");
  Update out = u;
  const double norm = u.delta.norm();
  if (norm > max_norm) out.delta *= max_norm / norm;
  return out;
}

Update add_gauss_noise(const Update& u, double sigma, Rng& rng) {
  if (sigma < 0.0) raise(Errc::InvalidPipeline, "sigma must be non-negative");
  Update out = u;
  if (sigma == 0.0) return out;
  out.delta += rng.normal_vector(u.delta.size(), 0.0, sigma);
  return out;
}

Update fraction_share(const Update& u, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    raise(Errc::InvalidPipeline, "share fraction must lie in (0,1]");
  }
  const Eigen::Index len = u.delta.size();
  const Eigen::Index keep = static_cast<Eigen::Index>(
      std::ceil(keep_fraction * static_cast<double>(len)));
  if (keep >= len) return u;

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(len));
  std::iota(idx.begin(), idx.end(), 0);
  // Stable sort on descending magnitude keeps ties at lower indices first.
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(u.delta[a]) > std::abs(u.delta[b]);
  });
  Update out = u;
  out.delta.setZero();
  for (Eigen::Index i = 0; i < keep; ++i) {
    out.delta[idx[static_cast<std::size_t>(i)]] =
        u.delta[idx[static_cast<std::size_t>(i)]];
  }
  return out;
}

Update apply_pipeline(const Update& u, const DefensePipeline& pipeline,
                      Rng& rng) {
  validate_pipeline(pipeline);
  Update out = u;
  for (const DefenseStep& s : pipeline.steps) {
    if (const auto* c = std::get_if<ClipStep>(&s)) {
      out = clip_update(out, c->max_norm);
    } else if (const auto* g = std::get_if<GaussNoiseStep>(&s)) {
      out = add_gauss_noise(out, g->sigma, rng);
    } else {
      out = fraction_share(out, std::get<FractionShareStep>(s).keep_fraction);
    }
  }
  return out;
}

PrivacyAccount privacy_accounting(double sigma, double clip, int rounds) {
  if (sigma <= 0.0 || clip <= 0.0) {
    raise(Errc::InvalidSize, "sigma and clip must be positive");
  }
  return {sigma / clip, rounds};
}

}  // namespace hfl

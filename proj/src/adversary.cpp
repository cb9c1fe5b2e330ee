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

#include "hfl/adversary.hpp"

#include <cmath>

#include "hfl/errors.hpp"

namespace hfl {

Reconstruction reconstruct_from_gradient(const Update& u,
                                         const ModelArch& arch,
                                         bool multi_sample_hint) {
  if (arch.kind != ArchKind::LogReg) {
    raise(Errc::NotReconstructible, "closed form only exists for LogReg");
  }
  if (u.masked) raise(Errc::NotReconstructible, "update is masked");
  if (multi_sample_hint) {
    raise(Errc::NotReconstructible, "update aggregates multiple samples");
  }
  if (u.delta.size() != arch.param_count()) {
    raise(Errc::DimensionMismatch, "update length does not match architecture");
  }
  const int classes = arch.num_classes;
  const int d = arch.input_dim;
  // delta = -lr * grad, so the bias block of delta is -lr * residual. The
  // sign flip and the unknown positive learning rate cancel in both the
  // ratio and the argmin below.
  const auto bias_delta = u.delta.tail(classes);

  int best = -1;
  double best_abs = 0.0;
  for (int c = 0; c < classes; ++c) {
    const double a = std::abs(bias_delta[c]);
    if (a > best_abs) {
      best_abs = a;
      best = c;
    }
  }
  if (best < 0 || best_abs <= 1e-12) {
    raise(Errc::NotReconstructible, "all bias residuals vanish");
  }

  Reconstruction rec;
  rec.features = u.delta.segment(static_cast<Eigen::Index>(best) * d, d) /
                 bias_delta[best];
  // residual_y = softmax_y - 1 < 0 is the most negative entry; with the
  // -lr factor it becomes the largest entry of the bias delta.
  int label = 0;
  for (int c = 1; c < classes; ++c) {
    if (bias_delta[c] > bias_delta[label]) label = c;
  }
  rec.label = label;
  return rec;
}

Update malicious_scale(const Update& u, double gamma) {
  if (!std::isfinite(gamma)) raise(Errc::InvalidSize, "gamma must be finite");
  Update out = u;
  out.delta *= gamma;
  return out;
}

ModelParams poison_broadcast(const ModelParams& m, double gamma,
                             const Vector& perturbation) {
  if (!std::isfinite(gamma)) raise(Errc::InvalidSize, "gamma must be finite");
  if (perturbation.size() != m.values.size()) {
    raise(Errc::DimensionMismatch, "perturbation length mismatch");
  }
  ModelParams out = m;
  out.values = gamma * m.values + perturbation;
  return out;
}

}  // namespace hfl

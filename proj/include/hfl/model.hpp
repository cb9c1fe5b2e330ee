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
#include <filesystem>
#include <span>
#include <utility>

#include "hfl/data.hpp"
#include "hfl/types.hpp"

namespace hfl {

enum class ArchKind { LogReg, Mlp1 };

struct ModelArch {
  ArchKind kind = ArchKind::LogReg;
  int input_dim = 0;
  int num_classes = 0;
  int hidden = 0;  // Mlp1 only

  Eigen::Index param_count() const;
  bool operator==(const ModelArch&) const = default;
};

// Flat 64-bit parameter vector. LogReg layout: W (C x d, row-major) then
// b (C). Mlp1 layout: W1 (h x d), b1 (h), W2 (C x h), b2 (C).
struct ModelParams {
  Vector values;
  ModelArch arch;
};

struct Hyperparams {
  double learning_rate = 0.1;
  int local_epochs = 1;
  int batch_size = 32;
};

// LogReg starts at zero; Mlp1 draws uniformly from [-1/sqrt(d), 1/sqrt(d)].
ModelParams init_params(const ModelArch& arch, std::uint64_t seed);

// Mean softmax cross-entropy over the batch and its exact gradient.
std::pair<double, Vector> loss_and_grad(const ModelParams& params,
                                        const Matrix& x,
                                        const Eigen::VectorXi& y);

// Row-wise softmax probabilities (numerically stable via max subtraction).
Matrix predict_proba(const ModelParams& params, const Matrix& x);

// Argmax predictions; ties break toward the smaller class index.
Eigen::VectorXi predict(const ModelParams& params, const Matrix& x);

// Mini-batch SGD over the user's shard: local_epochs passes, batches formed
// by a seeded shuffle each epoch, last short batch kept. Returns the trained
// params and the sample weight (= shard size).
std::pair<ModelParams, int> local_train(const ModelParams& params,
                                        const Dataset& data,
                                        std::span<const int> shard,
                                        const Hyperparams& hp,
                                        std::uint64_t seed);

// (accuracy, mean loss) on the given set.
std::pair<double, double> evaluate(const ModelParams& params,
                                   const Dataset& test);

void save_params_csv(const ModelParams& params,
                     const std::filesystem::path& path);

}  // namespace hfl

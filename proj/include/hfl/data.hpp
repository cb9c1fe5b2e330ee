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
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "hfl/types.hpp"

namespace hfl {

struct Dataset {
  Matrix features;         // n x d, one row per sample
  Eigen::VectorXi labels;  // values in [0, num_classes)
  int num_classes = 0;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index d() const { return features.cols(); }
};

// User -> row indices into the training set. Index lists are disjoint and
// together cover every row.
using Partition = std::map<NodeId, std::vector<int>>;

// Gaussian blob per class. Class means sit on the coordinate axes at
// distance 2 from the origin (positive axes first, then negative), so means
// are distinct whenever classes <= 2*dim.
Dataset gen_blobs(int classes, int dim, int n_per_class, double spread,
                  std::uint64_t seed);

// Seeded shuffle, then contiguous near-equal splits (sizes differ by <= 1,
// earlier users take the remainder).
Partition partition_iid(const Dataset& ds, const std::vector<NodeId>& users,
                        std::uint64_t seed);

// Per class, user shares drawn from a symmetric Dirichlet(alpha); rows are
// dealt out by largest-remainder rounding so the cover is exact.
Partition partition_label_skew(const Dataset& ds,
                               const std::vector<NodeId>& users, double alpha,
                               std::uint64_t seed);

// Deterministic shuffle split; test gets floor(n * test_fraction) rows.
std::pair<Dataset, Dataset> train_test_split(const Dataset& ds,
                                             double test_fraction,
                                             std::uint64_t seed);

Dataset take_rows(const Dataset& ds, std::span<const int> rows);

// Headered CSV, one row per sample: d feature floats then the label.
void save_dataset_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset_csv(const std::filesystem::path& path);

}  // namespace hfl

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

#include "hfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "hfl/errors.hpp"
#include "hfl/rng.hpp"

namespace hfl {

Dataset gen_blobs(int classes, int dim, int n_per_class, double spread,
                  std::uint64_t seed) {
  if (classes < 2) raise(Errc::InvalidSize, "need at least 2 classes");
  if (dim < 1) raise(Errc::InvalidSize, "dimension must be >= 1");
  if (n_per_class < 1) raise(Errc::InvalidSize, "n_per_class must be >= 1");
  if (spread < 0.0) raise(Errc::InvalidSize, "spread must be non-negative");

  const Eigen::Index n = static_cast<Eigen::Index>(classes) * n_per_class;
  Dataset ds;
  ds.features.resize(n, dim);
  ds.labels.resize(n);
  ds.num_classes = classes;

  Rng rng(derive_seed(seed, StreamTag::DataGen));
  Eigen::Index row = 0;
  for (int c = 0; c < classes; ++c) {
    Vector mean = Vector::Zero(dim);
    const int axis = c % dim;
    const double sign = ((c / dim) % 2 == 0) ? 1.0 : -1.0;
    mean[axis] = 2.0 * sign;
    for (int i = 0; i < n_per_class; ++i, ++row) {
      for (int j = 0; j < dim; ++j) {
        ds.features(row, j) = mean[j] + rng.normal(0.0, spread);
      }
      ds.labels[row] = c;
    }
  }
  return ds;
}

Partition partition_iid(const Dataset& ds, const std::vector<NodeId>& users,
                        std::uint64_t seed) {
  if (users.empty()) raise(Errc::InvalidSize, "no users to partition over");
  const std::size_t n = static_cast<std::size_t>(ds.n());
  if (users.size() > n) {
    raise(Errc::MoreUsersThanSamples,
          std::to_string(users.size()) + " users, " + std::to_string(n) +
              " samples");
  }
  Rng rng(derive_seed(seed, StreamTag::Partition));
  std::vector<int> order = rng.permutation(static_cast<int>(n));

  Partition part;
  const std::size_t k = users.size();
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t pos = 0;
  for (std::size_t u = 0; u < k; ++u) {
    const std::size_t take = base + (u < extra ? 1 : 0);
    std::vector<int> rows(order.begin() + static_cast<std::ptrdiff_t>(pos),
                          order.begin() + static_cast<std::ptrdiff_t>(pos + take));
    pos += take;
    part[users[u]] = std::move(rows);
  }
  return part;
}

namespace {

// Largest-remainder apportionment of m items to the given shares.
std::vector<int> largest_remainder_counts(const std::vector<double>& shares,
                                          int m) {
  const std::size_t k = shares.size();
  std::vector<int> counts(k, 0);
  std::vector<std::pair<double, std::size_t>> rem(k);
  int assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double exact = shares[i] * m;
    counts[i] = static_cast<int>(std::floor(exact));
    assigned += counts[i];
    rem[i] = {exact - counts[i], i};
  }
  // Ties break toward the lower user index.
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;
  });
  for (int r = 0; r < m - assigned; ++r) {
    counts[rem[static_cast<std::size_t>(r) % k].second] += 1;
  }
  return counts;
}

}  // namespace

Partition partition_label_skew(const Dataset& ds,
                               const std::vector<NodeId>& users, double alpha,
                               std::uint64_t seed) {
  if (users.empty()) raise(Errc::InvalidSize, "no users to partition over");
  if (alpha <= 0.0) raise(Errc::InvalidSize, "alpha must be positive");

  Rng rng(derive_seed(seed, StreamTag::Partition));
  Partition part;
  for (NodeId u : users) part[u] = {};

  for (int c = 0; c < ds.num_classes; ++c) {
    std::vector<int> rows;
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      if (ds.labels[i] == c) rows.push_back(static_cast<int>(i));
    }
    if (rows.empty()) continue;

    std::vector<double> shares(users.size());
    double total = 0.0;
    for (double& s : shares) {
      s = rng.gamma(alpha);
      total += s;
    }
    for (double& s : shares) s /= total;

    const std::vector<int> counts =
        largest_remainder_counts(shares, static_cast<int>(rows.size()));
    std::size_t pos = 0;
    for (std::size_t u = 0; u < users.size(); ++u) {
      auto& shard = part[users[u]];
      shard.insert(shard.end(), rows.begin() + static_cast<std::ptrdiff_t>(pos),
                   rows.begin() + static_cast<std::ptrdiff_t>(pos + counts[u]));
      pos += static_cast<std::size_t>(counts[u]);
    }
  }
  return part;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds,
                                             double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    raise(Errc::InvalidSize, "test_fraction must lie in (0,1)");
  }
  const int n = static_cast<int>(ds.n());
  const int n_test = static_cast<int>(std::floor(n * test_fraction));
  const int n_train = n - n_test;
  if (n_test == 0 || n_train == 0) {
    raise(Errc::DegenerateSplit, "split leaves an empty side (n=" +
                                     std::to_string(n) + ")");
  }
  Rng rng(derive_seed(seed, StreamTag::Split));
  std::vector<int> order = rng.permutation(n);
  std::vector<int> train_rows(order.begin(), order.begin() + n_train);
  std::vector<int> test_rows(order.begin() + n_train, order.end());
  return {take_rows(ds, train_rows), take_rows(ds, test_rows)};
}

Dataset take_rows(const Dataset& ds, std::span<const int> rows) {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), ds.d());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  out.num_classes = ds.num_classes;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(rows[i]);
    out.labels[static_cast<Eigen::Index>(i)] = ds.labels[rows[i]];
  }
  return out;
}

void save_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) raise(Errc::IoError, "cannot open " + path.string());
  for (Eigen::Index j = 0; j < ds.d(); ++j) out << "f" << j << ",";
  out << "label\n";
  char buf[64];
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < ds.d(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.features(i, j));
      out << buf << ",";
    }
    out << ds.labels[i] << "\n";
  }
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) raise(Errc::ParseError, "empty file");
  const auto cols = static_cast<Eigen::Index>(
      std::count(line.begin(), line.end(), ',') + 1);
  const Eigen::Index d = cols - 1;

  std::vector<double> feats;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!std::getline(ss, cell, ',')) raise(Errc::ParseError, "short row");
      feats.push_back(std::stod(cell));
    }
    if (!std::getline(ss, cell, ',')) raise(Errc::ParseError, "missing label");
    labels.push_back(std::stoi(cell));
  }
  Dataset ds;
  const auto n = static_cast<Eigen::Index>(labels.size());
  ds.features.resize(n, d);
  ds.labels.resize(n);
  int max_label = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      ds.features(i, j) = feats[static_cast<std::size_t>(i * d + j)];
    }
    ds.labels[i] = labels[static_cast<std::size_t>(i)];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = max_label + 1;
  return ds;
}

}  // namespace hfl

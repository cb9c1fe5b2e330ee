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

#include <filesystem>
#include <functional>
#include <set>

#include <doctest.h>

#include "hfl/data.hpp"
#include "hfl/errors.hpp"
#include "hfl/model.hpp"
#include "hfl/rng.hpp"

using namespace hfl;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an hfl::Error");
  return Errc::IoError;
}

// Full-batch gradient descent to (near) convergence; the independent check
// that the generated blobs are linearly separable with margin.
ModelParams train_to_convergence(const Dataset& ds, int iters, double lr) {
  ModelArch arch{ArchKind::LogReg, static_cast<int>(ds.d()), ds.num_classes, 0};
  ModelParams p = init_params(arch, 0);
  for (int i = 0; i < iters; ++i) {
    const auto [loss, grad] = loss_and_grad(p, ds.features, ds.labels);
    (void)loss;
    p.values -= lr * grad;
  }
  return p;
}

void check_full_cover(const Partition& part, Eigen::Index n) {
  std::set<int> seen;
  for (const auto& [user, rows] : part) {
    (void)user;
    for (int r : rows) {
      CHECK(r >= 0);
      CHECK(r < n);
      CHECK(seen.insert(r).second);  // disjoint
    }
  }
  CHECK(seen.size() == static_cast<std::size_t>(n));  // cover
}

}  // namespace

TEST_CASE("blobs are reproducible bit for bit") {
  const Dataset a = gen_blobs(2, 2, 50, 0.1, 7);
  const Dataset b = gen_blobs(2, 2, 50, 0.1, 7);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.n() == 100);
  CHECK(a.d() == 2);
}

TEST_CASE("zero spread collapses every point onto its class mean") {
  const Dataset ds = gen_blobs(2, 2, 5, 0.0, 3);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    if (ds.labels[i] == 0) {
      CHECK(ds.features(i, 0) == 2.0);
      CHECK(ds.features(i, 1) == 0.0);
    } else {
      CHECK(ds.features(i, 0) == 0.0);
      CHECK(ds.features(i, 1) == 2.0);
    }
  }
}

TEST_CASE("blob classes are linearly separable with margin") {
  const Dataset ds = gen_blobs(2, 2, 50, 0.1, 7);
  const ModelParams p = train_to_convergence(ds, 400, 1.0);
  const auto [acc, loss] = evaluate(p, ds);
  (void)loss;
  CHECK(acc == 1.0);
}

TEST_CASE("class means stay distinct up to 2*dim classes") {
  const Dataset ds = gen_blobs(4, 2, 1, 0.0, 1);
  std::set<std::pair<double, double>> means;
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    means.insert({ds.features(i, 0), ds.features(i, 1)});
  }
  CHECK(means.size() == 4);
}

TEST_CASE("iid partition splits near-equally") {
  const Dataset ds = gen_blobs(2, 2, 50, 0.1, 7);
  const Partition part = partition_iid(ds, {1, 2, 3, 4}, 9);
  for (const auto& [user, rows] : part) {
    (void)user;
    CHECK(rows.size() == 25);
  }
  check_full_cover(part, ds.n());
}

TEST_CASE("iid remainder goes to the earliest users") {
  const Dataset ds = gen_blobs(2, 1, 5, 0.1, 7);  // 10 rows
  const Partition part = partition_iid(ds, {1, 2, 3}, 9);
  CHECK(part.at(1).size() == 4);
  CHECK(part.at(2).size() == 3);
  CHECK(part.at(3).size() == 3);
}

TEST_CASE("iid refuses more users than samples") {
  const Dataset ds = gen_blobs(2, 1, 1, 0.1, 7);  // 2 rows
  CHECK(code_of([&] { partition_iid(ds, {1, 2, 3}, 9); }) ==
        Errc::MoreUsersThanSamples);
}

TEST_CASE("huge alpha approaches a uniform class mix per user") {
  const Dataset ds = gen_blobs(2, 2, 200, 0.1, 7);  // 400 rows, balanced
  const Partition part = partition_label_skew(ds, {1, 2, 3, 4}, 1e6, 21);
  for (const auto& [user, rows] : part) {
    (void)user;
    REQUIRE(!rows.empty());
    double ones = 0;
    for (int r : rows) ones += ds.labels[r];
    const double ratio = ones / static_cast<double>(rows.size());
    CHECK(ratio == doctest::Approx(0.5).epsilon(0.05));
  }
  check_full_cover(part, ds.n());
}

TEST_CASE("tiny alpha concentrates classes on single users") {
  const Dataset ds = gen_blobs(2, 2, 200, 0.1, 7);
  const Partition part = partition_label_skew(ds, {1, 2, 3, 4}, 0.01, 21);
  bool dominated = false;
  for (int c = 0; c < 2 && !dominated; ++c) {
    for (const auto& [user, rows] : part) {
      (void)user;
      int mine = 0;
      for (int r : rows) mine += ds.labels[r] == c ? 1 : 0;
      if (mine > 0.9 * 200) dominated = true;
    }
  }
  CHECK(dominated);
  check_full_cover(part, ds.n());
}

TEST_CASE("every partition is a full disjoint cover") {
  const Dataset ds = gen_blobs(3, 2, 30, 0.2, 11);
  const std::vector<NodeId> users{2, 5, 7, 9, 12};
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    check_full_cover(partition_iid(ds, users, seed), ds.n());
    for (double alpha : {0.05, 0.5, 5.0}) {
      check_full_cover(partition_label_skew(ds, users, alpha, seed), ds.n());
    }
  }
}

TEST_CASE("train_test_split fractions") {
  const Dataset ds = gen_blobs(2, 2, 50, 0.1, 7);  // 100 rows
  SUBCASE("standard 80/20") {
    const auto [train, test] = train_test_split(ds, 0.2, 5);
    CHECK(train.n() == 80);
    CHECK(test.n() == 20);
  }
  SUBCASE("extreme fraction keeps one training row") {
    const auto [train, test] = train_test_split(ds, 0.999, 5);
    CHECK(train.n() == 1);
    CHECK(test.n() == 99);
  }
  SUBCASE("single-row datasets cannot split") {
    const Dataset one = take_rows(ds, std::vector<int>{0});
    CHECK(code_of([&] { train_test_split(one, 0.5, 5); }) ==
          Errc::DegenerateSplit);
  }
}

TEST_CASE("dataset csv round-trips exactly") {
  const Dataset ds = gen_blobs(3, 4, 10, 0.3, 17);
  const auto path = std::filesystem::temp_directory_path() / "hfl_ds_test.csv";
  save_dataset_csv(ds, path);
  const Dataset back = load_dataset_csv(path);
  CHECK(back.num_classes == ds.num_classes);
  CHECK(back.labels == ds.labels);
  CHECK(back.features == ds.features);
  std::filesystem::remove(path);
}

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

#include <algorithm>
#include <cmath>
#include <numeric>

#include <doctest.h>

#include "hfl/rng.hpp"

using namespace hfl;

TEST_CASE("same seed replays the same stream") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform stays in [0,1)") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal moments") {
  Rng rng(123);
  const int n = 200000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("gamma mean matches its shape") {
  for (double alpha : {0.3, 1.0, 2.5, 8.0}) {
    Rng rng(99);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += rng.gamma(alpha);
    CHECK(sum / n == doctest::Approx(alpha).epsilon(0.03));
  }
}

TEST_CASE("permutation really permutes") {
  Rng rng(5);
  auto p = rng.permutation(100);
  std::vector<int> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(100);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(sorted == expect);
  CHECK(p != expect);  // astronomically unlikely to be identity
}

TEST_CASE("uniform_int bounds and determinism") {
  Rng a(11);
  Rng b(11);
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.uniform_int(17);
    CHECK(x < 17);
    CHECK(x == b.uniform_int(17));
  }
}

TEST_CASE("derived streams separate by tag, node, and occurrence") {
  const std::uint64_t master = 1234;
  CHECK(derive_seed(master, StreamTag::Train, {1, 0}) !=
        derive_seed(master, StreamTag::Sample, {1, 0}));
  CHECK(derive_seed(master, StreamTag::Train, {1, 0}) !=
        derive_seed(master, StreamTag::Train, {2, 0}));
  CHECK(derive_seed(master, StreamTag::Train, {1, 0}) !=
        derive_seed(master, StreamTag::Train, {1, 1}));
  CHECK(derive_seed(master, StreamTag::Train, {1, 0}) ==
        derive_seed(master, StreamTag::Train, {1, 0}));
}

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
#include <functional>

#include <doctest.h>

#include "hfl/aggregation.hpp"
#include "hfl/errors.hpp"
#include "hfl/rng.hpp"

using namespace hfl;

namespace {

Update make_update(NodeId origin, double weight, std::vector<double> values) {
  Update u;
  u.origin = origin;
  u.weight = weight;
  u.delta = Eigen::Map<Vector>(values.data(),
                               static_cast<Eigen::Index>(values.size()));
  return u;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an hfl::Error");
  return Errc::IoError;
}

}  // namespace

TEST_CASE("fedavg is the weighted mean in input order") {
  const std::vector<Update> ups{make_update(1, 1.0, {2.0, 0.0}),
                                make_update(2, 3.0, {0.0, 4.0})};
  const Update avg = fedavg(ups, 0, 1);
  CHECK(avg.weight == 4.0);
  CHECK(avg.delta[0] == doctest::Approx(0.5));
  CHECK(avg.delta[1] == doctest::Approx(3.0));
  CHECK(avg.origin == 0);
}

TEST_CASE("fedavg of one update is that update") {
  const std::vector<Update> ups{make_update(3, 2.5, {1.0, -1.0, 7.0})};
  const Update avg = fedavg(ups, 0, 1);
  CHECK(avg.delta == ups[0].delta);
  CHECK(avg.weight == 2.5);
}

TEST_CASE("opposite deltas with equal weights cancel") {
  const std::vector<Update> ups{make_update(1, 2.0, {1.0, -3.0}),
                                make_update(2, 2.0, {-1.0, 3.0})};
  CHECK(fedavg(ups, 0, 1).delta.isZero(0.0));
}

TEST_CASE("fedavg of identical updates is idempotent") {
  const std::vector<Update> ups{make_update(1, 2.0, {0.3, -0.7}),
                                make_update(2, 2.0, {0.3, -0.7}),
                                make_update(3, 2.0, {0.3, -0.7})};
  const Update avg = fedavg(ups, 0, 1);
  CHECK(avg.delta[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(avg.delta[1] == doctest::Approx(-0.7).epsilon(1e-15));
}

TEST_CASE("fedavg is permutation-invariant up to reassociation") {
  Rng rng(5);
  std::vector<Update> ups;
  for (int i = 0; i < 8; ++i) {
    ups.push_back(make_update(i, rng.uniform(0.5, 4.0),
                              {rng.normal(), rng.normal(), rng.normal()}));
  }
  const Update a = fedavg(ups, 0, 1);
  std::reverse(ups.begin(), ups.end());
  const Update b = fedavg(ups, 0, 1);
  CHECK((a.delta - b.delta).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fedavg input guards") {
  CHECK(code_of([] { fedavg(std::vector<Update>{}, 0, 1); }) == Errc::EmptyInput);
  const std::vector<Update> ups{make_update(1, 1.0, {1.0, 2.0}),
                                make_update(2, 1.0, {1.0})};
  CHECK(code_of([&] { fedavg(ups, 0, 1); }) == Errc::LengthMismatch);
}

TEST_CASE("median picks the middle per coordinate") {
  const std::vector<Update> ups{make_update(1, 1.0, {1.0, 5.0}),
                                make_update(2, 1.0, {2.0, 6.0}),
                                make_update(3, 1.0, {100.0, 7.0})};
  const Update med = median_aggregate(ups, 0, 1);
  CHECK(med.delta[0] == 2.0);
  CHECK(med.delta[1] == 6.0);
  CHECK(med.weight == 3.0);
}

TEST_CASE("median of two updates is their unweighted mean") {
  const std::vector<Update> ups{make_update(1, 1.0, {0.0, 2.0}),
                                make_update(2, 9.0, {4.0, 4.0})};
  const Update med = median_aggregate(ups, 0, 1);
  CHECK(med.delta[0] == 2.0);
  CHECK(med.delta[1] == 3.0);
}

TEST_CASE("median of identical updates is that delta") {
  const std::vector<Update> ups{make_update(1, 1.0, {1.5, -2.0}),
                                make_update(2, 2.0, {1.5, -2.0}),
                                make_update(3, 3.0, {1.5, -2.0})};
  const Update med = median_aggregate(ups, 0, 1);
  CHECK(med.delta[0] == 1.5);
  CHECK(med.delta[1] == -2.0);
}

TEST_CASE("trimmed mean drops floor(beta*m) from each end") {
  const std::vector<Update> ups{make_update(1, 1.0, {1.0}),
                                make_update(2, 1.0, {2.0}),
                                make_update(3, 1.0, {100.0})};
  CHECK(trimmed_mean_aggregate(ups, 1.0 / 3.0, 0, 1).delta[0] == 2.0);
  // beta = 0: plain unweighted mean.
  CHECK(trimmed_mean_aggregate(ups, 0.0, 0, 1).delta[0] ==
        doctest::Approx(103.0 / 3.0));
}

TEST_CASE("floor rule keeps everything for small m") {
  const std::vector<Update> ups{make_update(1, 1.0, {0.0}),
                                make_update(2, 1.0, {10.0})};
  // floor(0.4 * 2) = 0 trimmed: the unweighted mean.
  CHECK(trimmed_mean_aggregate(ups, 0.4, 0, 1).delta[0] == 5.0);
  CHECK(code_of([&] { trimmed_mean_aggregate(ups, 0.5, 0, 1); }) ==
        Errc::InvalidSize);
}

TEST_CASE("two-member masks cancel exactly in the weighted sum") {
  MaskGroup group{{1, 2}, 314};
  const std::vector<Update> ups{make_update(1, 2.0, {1.0, -1.0}),
                                make_update(2, 3.0, {0.5, 0.25})};
  const auto masked = mask_updates(ups, group);
  REQUIRE(masked.size() == 2);
  CHECK(masked[0].masked);
  CHECK(masked[1].masked);
  const Vector plain_sum = 2.0 * ups[0].delta + 3.0 * ups[1].delta;
  const Vector masked_sum = 2.0 * masked[0].delta + 3.0 * masked[1].delta;
  CHECK((plain_sum - masked_sum).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single-member groups cannot mask") {
  MaskGroup group{{1}, 314};
  const std::vector<Update> ups{make_update(1, 2.0, {1.0})};
  CHECK(code_of([&] { mask_updates(ups, group); }) == Errc::MemberMismatch);
}

TEST_CASE("origin set must match the mask group") {
  MaskGroup group{{1, 2, 3}, 314};
  const std::vector<Update> ups{make_update(1, 1.0, {1.0}),
                                make_update(2, 1.0, {2.0})};
  CHECK(code_of([&] { mask_updates(ups, group); }) == Errc::MemberMismatch);
}

TEST_CASE("three-member masking perturbs members but not the aggregate") {
  MaskGroup group{{1, 2, 3}, 2718};
  const std::vector<Update> ups{make_update(1, 1.0, {1.0, 0.0}),
                                make_update(2, 2.0, {0.0, 1.0}),
                                make_update(3, 4.0, {-1.0, -1.0})};
  const auto masked = mask_updates(ups, group);
  for (std::size_t i = 0; i < ups.size(); ++i) {
    CHECK((masked[i].delta - ups[i].delta).cwiseAbs().maxCoeff() > 1e-6);
  }
  const Update plain = fedavg(ups, 0, 1);
  const Update hidden = fedavg(masked, 0, 1);
  CHECK((plain.delta - hidden.delta).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("mask cancellation holds for group sizes 2..8 across seeds") {
  for (int size = 2; size <= 8; ++size) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(derive_seed(seed, StreamTag::Mask, {static_cast<std::uint64_t>(size)}));
      MaskGroup group;
      group.pairwise_seed = seed * 1000 + static_cast<std::uint64_t>(size);
      std::vector<Update> ups;
      for (int m = 0; m < size; ++m) {
        group.members.push_back(10 + m);
        ups.push_back(make_update(10 + m, rng.uniform(0.5, 5.0),
                                  {rng.normal(), rng.normal(), rng.normal(),
                                   rng.normal()}));
      }
      const auto masked = mask_updates(ups, group);
      const Update plain = fedavg(ups, 0, 1);
      const Update hidden = fedavg(masked, 0, 1);
      CHECK((plain.delta - hidden.delta).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("dropout correction recovers the survivors' aggregate") {
  MaskGroup group{{1, 2, 3}, 99};
  const std::vector<Update> ups{make_update(1, 1.0, {1.0, 2.0}),
                                make_update(2, 2.0, {-1.0, 0.5}),
                                make_update(3, 3.0, {0.25, -0.75})};
  const auto masked = mask_updates(ups, group);

  SUBCASE("no dropouts: zero correction") {
    const Vector corr = unmask_on_dropout(group, {1, 2, 3}, 2);
    CHECK(corr.isZero(0.0));
  }
  SUBCASE("one of three drops") {
    const std::vector<Update> survivors{masked[0], masked[2]};  // 2 dropped
    const Update corrected = fedavg_with_dropout(survivors, group, 0, 1);
    const std::vector<Update> plain_surv{ups[0], ups[2]};
    const Update expect = fedavg(plain_surv, 0, 1);
    CHECK((corrected.delta - expect.delta).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("all but one drop exposes the survivor") {
    const std::vector<Update> survivors{masked[1]};
    const Update corrected = fedavg_with_dropout(survivors, group, 0, 1);
    CHECK((corrected.delta - ups[1].delta).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("no survivors is an error") {
    CHECK(code_of([&] { unmask_on_dropout(group, {}, 2); }) == Errc::NoSurvivors);
  }
}

TEST_CASE("median stays inside the benign envelope under attack") {
  Rng rng(31337);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 4;
    std::vector<Update> ups;
    Vector lo = Vector::Constant(dim, 1e18);
    Vector hi = Vector::Constant(dim, -1e18);
    for (int b = 0; b < 7; ++b) {  // benign, norm-bounded
      Update u = make_update(b, 1.0, {0, 0, 0, 0});
      u.delta = rng.normal_vector(dim, 0.0, 0.5);
      lo = lo.cwiseMin(u.delta);
      hi = hi.cwiseMax(u.delta);
      ups.push_back(u);
    }
    for (int f = 0; f < 3; ++f) {  // adversarial, arbitrary magnitude
      Update u = make_update(100 + f, 1.0, {0, 0, 0, 0});
      u.delta = rng.normal_vector(dim, 0.0, 1e6);
      ups.push_back(u);
    }
    const Update med = median_aggregate(ups, 0, 1);
    for (int c = 0; c < dim; ++c) {
      CHECK(med.delta[c] >= lo[c]);
      CHECK(med.delta[c] <= hi[c]);
    }
  }
}

// Copyright 2026 The Tracescope Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <doctest.h>

#include "oracles.hpp"
#include "tracescope/error.hpp"
#include "tracescope/metrics.hpp"

using namespace tracescope;
using namespace tracescope::metrics;
using tracescope::testing::OracleEntropy;
using tracescope::testing::OracleSoftmax;

namespace {

std::vector<double> RandomDistribution(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(k);
  double sum = 0.0;
  for (auto& x : p) sum += (x = u(rng));
  for (auto& x : p) x /= sum;
  return p;
}

}  // namespace

TEST_CASE("softmax of [1,2,3]") {
  const std::vector<double> z{1.0, 2.0, 3.0};
  const auto p = Softmax(z);
  const auto oracle = OracleSoftmax(z);
  REQUIRE(p.support_size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(p.values()[i] - static_cast<double>(oracle[i])) < 1e-15);
  }
  CHECK(p.values()[0] == doctest::Approx(0.09003057).epsilon(1e-7));
  CHECK(p.values()[1] == doctest::Approx(0.24472847).epsilon(1e-7));
  CHECK(p.values()[2] == doctest::Approx(0.66524096).epsilon(1e-7));
}

TEST_CASE("softmax is shift invariant and survives huge logits") {
  const std::vector<double> z{1000.0, 1001.0, 1002.0};
  const auto p = Softmax(z);
  const auto q = Softmax(std::vector<double>{0.0, 1.0, 2.0});
  for (std::size_t i = 0; i < 3; ++i) CHECK(p.values()[i] == doctest::Approx(q.values()[i]).epsilon(1e-14));
  CHECK_THROWS_AS(Softmax(std::vector<double>{}), Error);
  CHECK_THROWS_AS(Softmax(std::vector<double>{1.0, std::nan("")}), Error);
}

TEST_CASE("entropy of uniform and one-hot") {
  for (std::size_t k : {2u, 4u, 16u, 1024u}) {
    const auto p = ProbabilityVector::FromValues(std::vector<double>(k, 1.0 / static_cast<double>(k)));
    CHECK(std::abs(ShannonEntropy(p) - std::log(static_cast<double>(k))) < 1e-12);
  }
  std::vector<double> one_hot(8, 0.0);
  one_hot[3] = 1.0;
  CHECK(ShannonEntropy(ProbabilityVector::FromValues(one_hot)) == 0.0);
}

TEST_CASE("confident two-token distribution") {
  const auto p = ProbabilityVector::FromValues({0.97, 0.03});
  const double expected = -(0.97 * std::log(0.97) + 0.03 * std::log(0.03));
  CHECK(ShannonEntropy(p) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(ShannonEntropy(p) == doctest::Approx(0.1347).epsilon(1e-3));
  CHECK(Top1Prob(p) == 0.97);
  CHECK(Top1Top2Gap(p) == doctest::Approx(0.94).epsilon(1e-14));
}

TEST_CASE("entropy matches extended-precision oracle on random distributions") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const auto p = RandomDistribution(rng, 2 + static_cast<std::size_t>(trial % 300));
    const double h = ShannonEntropy(ProbabilityVector::FromValues(p));
    CHECK(std::abs(h - static_cast<double>(OracleEntropy(p))) < 1e-12);
  }
}

TEST_CASE("entropy bounds and permutation invariance") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = RandomDistribution(rng, 2 + static_cast<std::size_t>(trial % 50));
    const double h = ShannonEntropy(ProbabilityVector::FromValues(p));
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(p.size())) + 1e-12);
    std::shuffle(p.begin(), p.end(), rng);
    CHECK(ShannonEntropy(ProbabilityVector::FromValues(p)) == doctest::Approx(h).epsilon(1e-13));
    const double top1 = Top1Prob(ProbabilityVector::FromValues(p));
    const double gap = Top1Top2Gap(ProbabilityVector::FromValues(p));
    CHECK(top1 >= 1.0 / static_cast<double>(p.size()) - 1e-15);
    CHECK(top1 <= 1.0);
    CHECK(gap >= 0.0);
    CHECK(gap <= top1);
  }
}

TEST_CASE("probability vector validation") {
  CHECK_THROWS_AS(ProbabilityVector::FromValues({}), Error);
  CHECK_THROWS_AS(ProbabilityVector::FromValues({0.5, 0.6}), Error);
  CHECK_THROWS_AS(ProbabilityVector::FromValues({1.2, -0.2}), Error);
  CHECK_THROWS_AS(ProbabilityVector::FromValues({std::numeric_limits<double>::infinity()}), Error);
  // Tiny drift is renormalized, not rejected.
  const auto p = ProbabilityVector::FromValues({0.5 + 1e-8, 0.5});
  CHECK(p.values()[0] + p.values()[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(Top1Top2Gap(ProbabilityVector::FromValues({1.0})), Error);
}

TEST_CASE("attention entropy and head dispersion") {
  const std::vector<double> w{0.9, 0.1, 0.5, 0.5};
  const auto slice = AttentionSlice::FromRowMajor(w, 2, 2);
  const auto h = AttentionEntropyPerHead(slice);
  REQUIRE(h.size() == 2);
  const double h0 = -(0.9 * std::log(0.9) + 0.1 * std::log(0.1));
  const double h1 = std::log(2.0);
  CHECK(h[0] == doctest::Approx(h0).epsilon(1e-14));
  CHECK(h[1] == doctest::Approx(h1).epsilon(1e-14));
  CHECK(h[0] == doctest::Approx(0.3251).epsilon(1e-3));
  CHECK(LayerAttentionEntropy(h) == doctest::Approx((h0 + h1) / 2).epsilon(1e-14));
  CHECK(LayerAttentionEntropy(h) == doctest::Approx(0.5091).epsilon(1e-3));
  CHECK(HeadDispersionIndex(h) == doctest::Approx(std::abs(h1 - h0) / 2).epsilon(1e-13));
  CHECK(HeadDispersionIndex(h) == doctest::Approx(0.1840).epsilon(1e-3));

  const std::vector<double> spread{0.0, 2.0};
  CHECK(HeadDispersionIndex(spread) == 1.0);
  const std::vector<double> same{0.7, 0.7, 0.7};
  CHECK(HeadDispersionIndex(same) == 0.0);

  const auto single = AttentionSlice::FromRowMajor(std::vector<double>{1.0}, 1, 1);
  CHECK(AttentionEntropyPerHead(single)[0] == 0.0);
  CHECK_THROWS_AS(AttentionSlice::FromRowMajor(std::vector<double>{0.5, 0.5, 1.0}, 2, 2), Error);
  CHECK_THROWS_AS(AttentionSlice::FromRowMajor(std::vector<double>{0.7, 0.7}, 1, 2), Error);
}

TEST_CASE("hidden norms and deltas") {
  const HiddenVector a({3.0, 4.0}, 1);
  const HiddenVector b({0.0, 0.0}, 2);
  CHECK(HiddenL2(a) == 5.0);
  CHECK(DeltaL2(a, b) == 5.0);
  CHECK(DeltaL2(a, a) == 0.0);
  CHECK_THROWS_AS(DeltaL2(a, HiddenVector({1.0}, 0)), Error);
  CHECK_THROWS_AS(HiddenVector({std::nan("")}, 0), Error);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(16), y(16), z(16);
    for (std::size_t i = 0; i < 16; ++i) {
      x[i] = g(rng);
      y[i] = g(rng);
      z[i] = g(rng);
    }
    const HiddenVector hx(x, 0), hy(y, 0), hz(z, 0);
    CHECK(DeltaL2(hx, hy) == DeltaL2(hy, hx));
    CHECK(DeltaL2(hx, hz) <= DeltaL2(hx, hy) + DeltaL2(hy, hz) + 1e-12);
    std::vector<double> scaled = x;
    for (auto& v : scaled) v *= 3.0;
    CHECK(HiddenL2(HiddenVector(scaled, 0)) == doctest::Approx(3.0 * HiddenL2(hx)).epsilon(1e-14));
  }
}

TEST_CASE("kv bytes") {
  auto b = ComputeKvBytes({1, 1, 1, 1, 2});
  CHECK(b.per_layer == 4);
  CHECK(b.total == 4);
  b = ComputeKvBytes({4, 4, 8, 10, 4});
  CHECK(b.per_layer == 2560);
  CHECK(b.total == 10240);
  CHECK_THROWS_AS(ComputeKvBytes({3, 2, 4, 0, 2}), Error);
  CHECK_THROWS_AS(ComputeKvBytes({1, -1, 1, 1, 2}), Error);
  CHECK_THROWS_AS(ComputeKvBytes({1 << 30, 1 << 30, 1 << 30, 1 << 30, 4}), Error);
  // Linear in seq_len.
  for (std::int64_t t = 1; t < 50; ++t) {
    CHECK(ComputeKvBytes({2, 3, 5, t, 2}).total == t * ComputeKvBytes({2, 3, 5, 1, 2}).total);
  }
}

/*
 * Copyright 2026 The nestq Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "nestq/cost_model.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace nestq;

namespace {

ModelGraph fc_model(std::size_t in, std::size_t out) {
  ModelGraph m;
  m.input_shape = {in};
  LayerSpec L;
  L.name = "fc";
  L.kind = LayerKind::Fc;
  L.in_features = in;
  L.out_features = out;
  m.layers.push_back(L);
  resolve_shapes(m);
  return m;
}

BitPolicy random_policy(const ModelGraph& m, std::mt19937_64& rng) {
  BitPolicy p;
  for (std::size_t i = 0; i < m.policy_length(); ++i) p.bits.push_back(m.candidates[rng() % m.candidates.size()]);
  return p;
}

}  // namespace

TEST_CASE("bitops examples") {
  CHECK(bitops(fc_model(10, 10), BitPolicy{{4}}) == 1600);
  ModelGraph empty;
  empty.input_shape = {3};
  CHECK(bitops(empty, BitPolicy{}) == 0);
  auto m = fc_model(7, 3);
  m.candidates = {2, 4, 8};
  CHECK(bitops(m, BitPolicy{{8}}) == 4 * bitops(m, BitPolicy{{4}}));
  CHECK_THROWS_AS(bitops(m, BitPolicy{{4, 4}}), Error);
}

TEST_CASE("bitops equals the brute-force enumeration on the toy models") {
  std::mt19937_64 rng(31);
  for (const auto& c : {fixture::mlp(), fixture::cnn()}) {
    for (int t = 0; t < 25; ++t) {
      const auto p = random_policy(c.model, rng);
      REQUIRE(bitops(c.model, p) == oracle::enumerate_bitops(c.model, p.bits));
    }
  }
}

TEST_CASE("doubling every bit-width quadruples bitops") {
  auto c = fixture::cnn();
  const auto p2 = uniform_policy(c.model, 2), p4 = uniform_policy(c.model, 4);
  CHECK(bitops(c.model, p4) == 4 * bitops(c.model, p2));
}

TEST_CASE("transition elements") {
  const auto c = fixture::mlp();
  const auto& m = c.model;
  CHECK(transition_elements(m, uniform_policy(m, 8)) == 0);
  const auto all = transition_cost(m, uniform_policy(m, 8), TransitionMode::Standard);
  CHECK(all.primitives() == 0);

  const std::uint64_t expect = (16 * 32 + 16) + (32 * 16 + 32) + (16 * 4 + 16);
  const auto low = uniform_policy(m, 4);
  CHECK(transition_elements(m, low) == expect);
  const auto dqt = transition_cost(m, low, TransitionMode::Dqt);
  CHECK(dqt.shifts == expect);
  CHECK(dqt.primitives() == expect);
  const auto std_cost = transition_cost(m, low, TransitionMode::Standard);
  CHECK(std_cost.primitives() == 7 * expect);
  CHECK(std_cost.conversions == 2 * expect);
  CHECK(std_cost.mults == expect);
  CHECK(std_cost.divs == expect);
  CHECK(std_cost.shifts == 0);
}

TEST_CASE("transition elements agree with the execution trace") {
  std::mt19937_64 rng(32);
  for (const auto& c : {fixture::mlp(), fixture::cnn()}) {
    for (int t = 0; t < 10; ++t) {
      const auto p = random_policy(c.model, rng);
      const auto r = forward(c.model, c.data.row(static_cast<std::size_t>(t)), p);
      REQUIRE(transition_elements(c.model, p) == r.trace.transition_shift_ops());
    }
  }
}

TEST_CASE("in-loop primitive counts") {
  CHECK(mac_primitive_counts(MacMode::Standard) == MacCounts{1, 3});
  CHECK(mac_primitive_counts(MacMode::DqtPact) == MacCounts{1, 2});
  CHECK(mac_primitive_counts(MacMode::DqtGeneral) == MacCounts{3, 2});
  CHECK(mac_primitive_counts(MacMode::DqtFactored) == MacCounts{1, 3});

  QuantParams px, pw, py;
  pw.offset = -1.0;
  const auto k = dot_constants(px, pw, py, 100, 16);
  const std::vector<QValue> x(100, 2), w(100, 3);
  const auto f = int_dot_pact(x, w, k, py);
  const auto g = int_dot(x, w, k, py);
  const auto s = standard_mac(x, w, 0, 1);
  CHECK(f.inner.mults == 100u * mac_primitive_counts(MacMode::DqtPact).mults);
  CHECK(f.inner.adds == 100u * mac_primitive_counts(MacMode::DqtPact).adds);
  CHECK(g.inner.adds == 100u * mac_primitive_counts(MacMode::DqtFactored).adds);
  CHECK(s.inner.mults == 100u * mac_primitive_counts(MacMode::Standard).mults);
  CHECK(s.inner.adds == 100u * mac_primitive_counts(MacMode::Standard).adds);
}

TEST_CASE("cycle intervals") {
  const auto s = cycle_estimate(1250000, TransitionMode::Standard);
  CHECK(s.low == 25e6);
  CHECK(s.high == 68.75e6);
  const auto d = cycle_estimate(1250000, TransitionMode::Dqt);
  CHECK(d.low == 1.25e6);
  CHECK(d.high == 1.25e6);
  const auto z = cycle_estimate(0, TransitionMode::Standard);
  CHECK(z.low == 0.0);
  CHECK(z.high == 0.0);
}

TEST_CASE("cost report") {
  const auto c = fixture::mlp();
  const auto p = BitPolicy{{8, 4, 8}};
  const auto r = cost_report(c.model, p, TransitionMode::Dqt);
  const std::uint64_t e = 32 * 16 + 32;
  CHECK(r.bitops == oracle::enumerate_bitops(c.model, p.bits));
  CHECK(r.transition_elements == e);
  CHECK(r.transition_shift_ops == e);
  CHECK(r.transition_fp_primitives == 7 * e);
  CHECK(r.transition_fp_muldiv == 2 * e);
  CHECK(r.layer_macs == std::vector<std::uint64_t>{512, 512, 64});
  CHECK(r.inloop_mults == 512 + 512 + 64);
  CHECK(r.inloop_adds == 3 * 512 + 2 * 512 + 2 * 64);
  CHECK(r.dqt_cycles.low == static_cast<double>(e));
  CHECK(r.standard_cycles.high == 55.0 * e);

  const auto again = cost_report(c.model, p, TransitionMode::Dqt);
  CHECK(again.bitops == r.bitops);
  CHECK(again.inloop_adds == r.inloop_adds);

  const auto s = cost_report(c.model, p, TransitionMode::Standard);
  CHECK(s.inloop_adds == 3 * (512 + 512 + 64));
}

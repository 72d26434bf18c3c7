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

#include "nestq/calibration.hpp"
#include "support/fixtures.hpp"

using namespace nestq;

namespace {

ModelGraph linear(std::vector<double> w, std::vector<double> b = {0.0}) {
  ModelGraph m;
  m.input_shape = {w.size()};
  LayerSpec L;
  L.name = "fc";
  L.kind = LayerKind::Fc;
  L.in_features = w.size();
  L.out_features = 1;
  L.weight_f = std::move(w);
  L.bias_f = std::move(b);
  m.layers.push_back(L);
  return m;
}

}  // namespace

TEST_CASE("moving average examples") {
  RangeState s;
  s.gamma = 0.0;
  s = ema_update(s, -1.0, 1.0);
  s = ema_update(s, 3.0, 4.0);
  CHECK(s.y_min == 3.0);
  CHECK(s.y_max == 4.0);

  RangeState keep;
  keep.gamma = 1.0;
  keep = ema_update(keep, -2.0, 5.0);
  keep = ema_update(keep, -9.0, 9.0);
  CHECK(keep.y_min == -2.0);
  CHECK(keep.y_max == 5.0);
  CHECK(keep.steps == 2);

  RangeState e;
  e = ema_update(e, 0.0, 1.0);
  e = ema_update(e, 0.0, 2.0);
  CHECK(e.y_max == doctest::Approx(1.1).epsilon(1e-15));

  CHECK_THROWS_AS(ema_update(e, 2.0, 1.0), Error);
  CHECK_THROWS_AS(ema_update(e, 0.0, NAN), Error);
  RangeState g;
  g.gamma = 1.5;
  CHECK_THROWS_AS(ema_update(g, 0.0, 1.0), Error);
}

TEST_CASE("moving average is a convex combination") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-50.0, 50.0), gam(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    RangeState s;
    s.gamma = gam(rng);
    double a = u(rng), b = u(rng);
    s = ema_update(s, std::min(a, b), std::max(a, b));
    const RangeState prev = s;
    a = u(rng);
    b = u(rng);
    const double lo = std::min(a, b), hi = std::max(a, b);
    s = ema_update(s, lo, hi);
    REQUIRE(s.y_min >= std::min(prev.y_min, lo) - 1e-12);
    REQUIRE(s.y_min <= std::max(prev.y_min, lo) + 1e-12);
    REQUIRE(s.y_max >= std::min(prev.y_max, hi) - 1e-12);
    REQUIRE(s.y_max <= std::max(prev.y_max, hi) + 1e-12);
    REQUIRE(s.y_min <= s.y_max);
  }
}

TEST_CASE("repeated updates converge monotonically toward the batch extrema") {
  RangeState s;
  s = ema_update(s, 0.0, 1.0);
  double prev_hi = s.y_max, prev_lo = s.y_min;
  for (int t = 1; t <= 40; ++t) {
    s = ema_update(s, -1.0, 2.0);
    CHECK(s.y_max > prev_hi);
    CHECK(s.y_min < prev_lo);
    CHECK(s.y_max == doctest::Approx(2.0 - std::pow(0.9, t)).epsilon(1e-12));
    CHECK(s.y_min == doctest::Approx(-1.0 + std::pow(0.9, t)).epsilon(1e-12));
    prev_hi = s.y_max;
    prev_lo = s.y_min;
  }
}

TEST_CASE("degenerate ranges are widened") {
  double lo = 1.0, hi = 1.0;
  CHECK(widen_if_degenerate(lo, hi));
  CHECK(lo == 1.0 - std::ldexp(1.0, -10));
  CHECK(hi == 1.0 + std::ldexp(1.0, -10));
  lo = hi = 0.0;
  CHECK(widen_if_degenerate(lo, hi));
  CHECK(hi == 1e-6);
  CHECK(lo == -1e-6);
  lo = 0.0;
  hi = 2.0;
  CHECK_FALSE(widen_if_degenerate(lo, hi));
}

TEST_CASE("output grid comes from the observed output range") {
  const auto m = linear({1.0, 0.5});
  const std::vector<double> data{0.0, 0.0, 10.0, 0.0, 4.0, 2.0};
  CalibrationOptions opt;
  opt.gamma = 0.0;
  const auto r = calibrate(m, data, 3, opt);
  const auto& out = r.model.layers[0].output_params;
  CHECK(out.scale == 10.0 / 255.0);
  CHECK(out.offset == 0.0);
  CHECK(r.model.layers[0].weight.params.scale == 0.5 / 255.0);
  CHECK(r.model.layers[0].weight.params.offset == 0.5);
  CHECK(r.model.input_params.scale == 10.0 / 255.0);
  CHECK(r.model.calibrated);
}

TEST_CASE("equal weights raise the degenerate-range flag") {
  const auto m = linear({0.5, 0.5}, {0.25});
  const std::vector<double> data{1.0, 2.0, 3.0, 4.0};
  const auto r = calibrate(m, data, 2);
  bool weight_flag = false, bias_flag = false;
  for (const auto& f : r.flags) {
    weight_flag |= f.find("fc.weight") != std::string::npos;
    bias_flag |= f.find("fc.bias") != std::string::npos;
  }
  CHECK(weight_flag);
  CHECK(bias_flag);
  const auto& wp = r.model.layers[0].weight.params;
  CHECK(wp.offset < 0.5);
  CHECK(wp.range_max() > 0.5);
  CHECK(wp.scale > 0.0);
}

TEST_CASE("two passes over the same data") {
  const auto c = fixture::mlp();
  const auto base = make_toy_model("mlp", fixture::kSeed);
  CalibrationOptions one, two;
  two.passes = 2;
  const auto r1 = calibrate(base, c.data.features, c.data.samples, one);
  const auto r2 = calibrate(base, c.data.features, c.data.samples, two);
  CHECK(r1.input_state.steps == 10);
  CHECK(r2.input_state.steps == 20);
  const auto r2b = calibrate(base, c.data.features, c.data.samples, two);
  for (std::size_t i = 0; i < r2.model.layers.size(); ++i) {
    CHECK(r2.model.layers[i].output_params == r2b.model.layers[i].output_params);
    CHECK(r2.layer_states[i].y_max == r2b.layer_states[i].y_max);
  }
}

TEST_CASE("calibrated model satisfies grid invariants") {
  for (const auto& c : {fixture::mlp(), fixture::cnn()}) {
    const auto& m = c.model;
    CHECK_NOTHROW(validate(m.input_params));
    for (const auto& L : m.layers) {
      CHECK(L.calibrated);
      CHECK_NOTHROW(validate(L.input_params));
      CHECK_NOTHROW(validate(L.output_params));
      CHECK(L.input_params.is_master());
      CHECK(L.output_params.is_master());
      if (L.has_weights()) {
        CHECK_NOTHROW(validate(L.weight));
        CHECK_NOTHROW(validate(L.bias));
        CHECK(L.weight.data.size() == L.weight_count());
      }
      if (L.kind == LayerKind::ReluPact) {
        CHECK(L.alpha > 0.0);
        CHECK(L.output_params.offset == 0.0);
        CHECK(L.output_params.range_max() == doctest::Approx(L.alpha));
      }
    }
  }
}

TEST_CASE("clamp sits at the requested percentile of observed activations") {
  const auto c = fixture::mlp();
  const auto base = make_toy_model("mlp", fixture::kSeed);
  CalibrationOptions opt;
  opt.alpha_percentile = 100.0;
  const auto full = calibrate(base, c.data.features, c.data.samples, opt).model;
  double top = 0.0;
  for (std::size_t s = 0; s < c.data.samples; ++s) {
    const auto outs = float_forward_all(full, c.data.row(s));
    top = std::max(top, *std::max_element(outs[1].begin(), outs[1].end()));
  }
  CHECK(full.layers[1].alpha == top);
  CHECK(c.model.layers[1].alpha <= top);
}

TEST_CASE("calibration options are checked") {
  const auto m = linear({1.0, 0.5});
  const std::vector<double> data{0.0, 1.0};
  CalibrationOptions o;
  o.passes = 0;
  CHECK_THROWS_AS(calibrate(m, data, 1, o), Error);
  o = {};
  o.gamma = -0.1;
  CHECK_THROWS_AS(calibrate(m, data, 1, o), Error);
  o = {};
  try {
    calibrate(m, data, 2, o);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Shape);
  }
}

TEST_CASE("candidates above the master width are dropped") {
  auto m = linear({1.0, 0.5});
  m.master_bits = 6;
  m.candidates = {2, 4, 6, 8};
  const std::vector<double> data{0.0, 1.0, 2.0, 3.0};
  const auto r = calibrate(m, data, 2);
  CHECK(r.model.candidates == std::vector<int>{2, 4, 6});
}

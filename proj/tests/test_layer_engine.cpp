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
#include "nestq/error_analysis.hpp"
#include "nestq/layer_engine.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace nestq;

namespace {

QuantParams grid(double scale, double offset, int bits = 8) {
  QuantParams p;
  p.scale = scale;
  p.offset = offset;
  p.bits = bits;
  p.master_bits = bits;
  return p;
}

// One fc layer with hand-picked power-of-two grids so every constant is exact.
ModelGraph hand_fc(std::size_t in, std::size_t out, const std::vector<QValue>& w, const QuantParams& pin,
                   const QuantParams& pw, const QuantParams& pb, QValue bias_code, const QuantParams& pout) {
  ModelGraph m;
  m.input_shape = {in};
  LayerSpec L;
  L.name = "fc";
  L.kind = LayerKind::Fc;
  L.in_features = in;
  L.out_features = out;
  m.layers.push_back(L);
  resolve_shapes(m);
  auto& l = m.layers[0];
  l.weight = NestedTensor{w, pw, {out, in}};
  l.bias = NestedTensor{std::vector<QValue>(out, bias_code), pb, {out}};
  l.input_params = pin;
  l.output_params = pout;
  l.weights_quantized = true;
  l.calibrated = true;
  m.input_params = pin;
  m.master_bits = pin.master_bits;
  m.calibrated = true;
  prepare_kernels(m);
  return m;
}

NestedTensor codes(const std::vector<QValue>& v, const QuantParams& p) { return NestedTensor{v, p, {v.size()}}; }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST_CASE("identity fc passes every code through") {
  const auto u = grid(1.0, 0.0);
  const auto m = hand_fc(1, 1, {1}, u, u, u, 0, u);
  for (QValue q = 0; q < 256; ++q) {
    const auto y = run_layer(m.layers[0], codes({q}, u), 8);
    REQUIRE(y.data[0] == q);
  }
}

TEST_CASE("two-input fc sums exactly") {
  const auto pin = grid(0.25, 0.0), pw = grid(1.0 / 64, -2.0), pout = grid(1.0 / 16, -8.0);
  const auto m = hand_fc(2, 1, {192, 192}, pin, pw, pw, 128, pout);
  const std::vector<double> x{1.0, 2.0};
  const auto r = forward(m, x, BitPolicy{{8}});
  CHECK(r.output[0] == 3.0);
  CHECK(r.output_codes.data[0] == 176);
}

TEST_CASE("fc output at reduced width stays within the analytic bound of the exact result") {
  std::mt19937_64 rng(3);
  ModelGraph m;
  m.input_shape = {24};
  LayerSpec L;
  L.name = "fc";
  L.kind = LayerKind::Fc;
  L.in_features = 24;
  L.out_features = 6;
  std::normal_distribution<double> g(0.0, 0.3);
  for (std::size_t i = 0; i < 24 * 6; ++i) L.weight_f.push_back(g(rng));
  for (std::size_t i = 0; i < 6; ++i) L.bias_f.push_back(g(rng));
  m.layers.push_back(L);
  const auto data = fixture::uniform_inputs(5, 100, 24);
  const auto cal = calibrate(m, data.features, data.samples).model;
  const auto& layer = cal.layers[0];

  for (std::size_t s = 0; s < 20; ++s) {
    const auto x = quantize_master(data.row(s), cal.input_params, {24});
    for (int b : {4, 8}) {
      const auto y = run_layer(layer, x, b);
      const auto& k = layer.kernel_for(b);
      const auto xb = shift_down(x.data, 8, b);
      const auto wb = shift_down(layer.weight.data, 8, b);
      const auto px = derive_params(layer.input_params, b), pw = derive_params(layer.weight.params, b);
      const auto& py = layer.output_params;
      for (std::size_t o = 0; o < 6; ++o) {
        mpq_class acc = oracle::exact_value(layer.bias.data[o], layer.bias.params);
        for (std::size_t i = 0; i < 24; ++i)
          acc += oracle::exact_value(xb[i], px) * oracle::exact_value(wb[o * 24 + i], pw);
        const mpq_class ideal = clip_exact((acc - mpq_class(py.offset)) / mpq_class(py.scale), 8);
        const std::span<const QValue> wrow(wb.data() + o * 24, 24);
        const auto bound = fused_dot_bias_bound(k.main, dot_magnitudes(xb, wrow), rescale_shift_for(k.main, k.acc),
                                                k.bias, layer.bias.data[o]);
        REQUIRE(abs(mpq_class(y.data[o]) - ideal) <= bound.total());
      }
    }
  }
}

TEST_CASE("clamp at alpha") {
  const auto p = grid(1.0, 0.0);
  CHECK(pact_clamp(codes({150}, p), 100.0).data[0] == 100);
  CHECK(pact_clamp(codes({99}, p), 100.0).data[0] == 99);
  const std::vector<QValue> all{0, 17, 200, 255};
  CHECK(pact_clamp(codes(all, p), 255.0).data == all);
  CHECK(pact_clamp(codes(all, p), 1e6).data == all);
  CHECK(code_of([&] { pact_clamp(codes(all, p), 0.0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { pact_clamp(codes(all, grid(1.0, -1.0)), 10.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("batch norm folding") {
  LayerSpec L;
  L.name = "fc";
  L.kind = LayerKind::Fc;
  L.in_features = 3;
  L.out_features = 2;
  L.weight_f = {0.5, -1.0, 2.0, 0.25, 0.75, -0.5};
  L.bias_f = {0.1, -0.2};

  BatchNormParams id{{1, 1}, {0, 0}, {0, 0}, {1, 1}, 0.0};
  const auto same = fold_batchnorm(L, id);
  CHECK(same.weight_f == L.weight_f);
  CHECK(same.bias_f == L.bias_f);

  BatchNormParams twice{{2, 2}, {0, 0}, {0, 0}, {1, 1}, 0.0};
  const auto dbl = fold_batchnorm(L, twice);
  for (std::size_t i = 0; i < 6; ++i) CHECK(dbl.weight_f[i] == 2 * L.weight_f[i]);
  CHECK(dbl.bias_f[0] == 2 * L.bias_f[0]);

  BatchNormParams bad{{1, 1}, {0, 0}, {0, 0}, {-1, 1}, 0.5};
  CHECK(code_of([&] { fold_batchnorm(L, bad); }) == ErrorCode::InvalidArgument);

  BatchNormParams bn{{1.5, -0.7}, {0.3, 0.1}, {0.2, -0.4}, {0.8, 2.5}, 1e-5};
  const auto folded = fold_batchnorm(L, bn);
  ModelGraph a, b;
  a.input_shape = b.input_shape = {3};
  a.layers.push_back(L);
  b.layers.push_back(folded);
  resolve_shapes(a);
  resolve_shapes(b);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    const std::vector<double> x{u(rng), u(rng), u(rng)};
    const auto ya = float_forward(a, x);
    const auto yb = float_forward(b, x);
    for (std::size_t c = 0; c < 2; ++c) {
      const double expect = bn.gamma[c] * (ya[c] - bn.mean[c]) / std::sqrt(bn.var[c] + bn.eps) + bn.beta[c];
      CHECK(std::abs(yb[c] - expect) <= 1e-6);
    }
  }

  LayerSpec nobias = L;
  nobias.bias_f.clear();
  CHECK(fold_batchnorm(nobias, twice).bias_f.size() == 2);
}

TEST_CASE("candidate sets") {
  CHECK_NOTHROW(validate_candidates({2, 4, 8}, 8));
  CHECK_THROWS_AS(validate_candidates({4, 2}, 8), Error);
  CHECK_THROWS_AS(validate_candidates({2, 2}, 8), Error);
  CHECK_THROWS_AS(validate_candidates({2, 9}, 8), Error);
  CHECK_THROWS_AS(validate_candidates({}, 8), Error);
  CHECK(candidates_around(4, 8) == std::vector<int>{3, 4, 5});
  CHECK(candidates_around(2, 8) == std::vector<int>{2, 3});
  CHECK(candidates_around(8, 8) == std::vector<int>{7, 8});
}

TEST_CASE("graph shape checks") {
  ModelGraph m;
  m.input_shape = {4};
  LayerSpec fc;
  fc.name = "fc";
  fc.kind = LayerKind::Fc;
  fc.in_features = 5;
  fc.out_features = 2;
  m.layers.push_back(fc);
  CHECK(code_of([&] { resolve_shapes(m); }) == ErrorCode::Shape);

  m.layers[0].in_features = 4;
  LayerSpec res;
  res.name = "res";
  res.kind = LayerKind::ResidualAdd;
  res.skip_from = -1;
  m.layers.push_back(res);
  CHECK(code_of([&] { resolve_shapes(m); }) == ErrorCode::Shape);

  m.layers[1].skip_from = 1;
  CHECK(code_of([&] { resolve_shapes(m); }) == ErrorCode::Shape);

  m.layers[1].skip_from = 0;
  CHECK_NOTHROW(resolve_shapes(m));
  CHECK(m.layers[1].output_shape == Shape{2});
}

TEST_CASE("policy validation") {
  const auto c = fixture::mlp();
  CHECK(c.model.policy_length() == 3);
  const auto x = c.data.row(0);
  CHECK(code_of([&] { forward(c.model, x, BitPolicy{{8, 8}}); }) == ErrorCode::Policy);
  CHECK(code_of([&] { forward(c.model, x, BitPolicy{{8, 5, 8}}); }) == ErrorCode::Policy);
  CHECK(code_of([&] { forward(c.model, x.subspan(1), BitPolicy{{8, 8, 8}}); }) == ErrorCode::Shape);
  CHECK(to_string(BitPolicy{{8, 4, 8}}) == "8,4,8");
}

TEST_CASE("master-width policy equals running with transitions disabled") {
  for (const auto& c : {fixture::mlp(), fixture::cnn()}) {
    const auto all_n = uniform_policy(c.model, c.model.master_bits);
    for (std::size_t s = 0; s < 50; ++s) {
      const auto a = forward(c.model, c.data.row(s), all_n);
      const auto b = forward(c.model, c.data.row(s), all_n, RunOptions{false});
      REQUIRE(a.output_codes.data == b.output_codes.data);
      REQUIRE(a.trace.shifted_elements() == 0);
      REQUIRE(a.trace.transition_shift_ops() == 0);
    }
    const auto low = uniform_policy(c.model, 4);
    CHECK(code_of([&] { forward(c.model, c.data.row(0), low, RunOptions{false}); }) == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("trace counts every reduced element once and stays integer") {
  for (const auto& c : {fixture::mlp(), fixture::cnn()}) {
    const auto& m = c.model;
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
      BitPolicy p;
      for (std::size_t i = 0; i < m.policy_length(); ++i) p.bits.push_back(m.candidates[rng() % m.candidates.size()]);
      const auto r = forward(m, c.data.row(static_cast<std::size_t>(t)), p);
      std::uint64_t expect = 0;
      std::size_t pi = 0;
      for (const auto& L : m.layers) {
        if (!takes_policy(L.kind)) continue;
        if (p.bits[pi++] < m.master_bits) expect += L.weight_count() + element_count(L.input_shape);
      }
      REQUIRE(r.trace.shifted_elements() == expect);
      REQUIRE(r.trace.transition_shift_ops() == expect);
      REQUIRE(r.trace.float_ops_inside_integer_window() == 0);
      REQUIRE(r.trace.events.front().op == "quantize_input");
      REQUIRE(r.trace.events.back().op == "dequantize_output");
      for (std::size_t e = 1; e + 1 < r.trace.events.size(); ++e) REQUIRE(r.trace.events[e].integer_domain);
    }
  }
}

TEST_CASE("fc kernels use the factored form after a clamp") {
  const auto c = fixture::mlp();
  const auto r = forward(c.model, c.data.row(0), BitPolicy{{8, 8, 8}});
  CHECK_FALSE(r.trace.layers[0].pact_kernel);
  CHECK(r.trace.layers[2].pact_kernel);
  CHECK(r.trace.layers[4].pact_kernel);
  CHECK(r.trace.layers[2].inner.mults == 32 * 16);
  CHECK(r.trace.layers[2].inner.adds == 2 * 32 * 16);
  CHECK(r.trace.layers[0].inner.adds == 3 * 16 * 32);
}

TEST_CASE("master-width forward matches the fake-quantization oracle") {
  const auto c = fixture::mlp();
  std::size_t agree = 0;
  for (std::size_t s = 0; s < 200; ++s) {
    const auto r = forward(c.model, c.data.row(s), BitPolicy{{8, 8, 8}});
    const auto f = oracle::fake_quant_forward(c.model, c.data.row(s), {8, 8, 8});
    agree += oracle::argmax(r.output) == oracle::argmax(f);
  }
  CHECK(agree == 200);
}

TEST_CASE("residual add and average pool layers") {
  ModelGraph m;
  m.input_shape = {1, 4, 4};
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 0.4);
  LayerSpec conv;
  conv.name = "conv";
  conv.kind = LayerKind::Conv2d;
  conv.in_channels = 1;
  conv.out_channels = 1;
  conv.kernel = 3;
  conv.padding = 1;
  for (int i = 0; i < 9; ++i) conv.weight_f.push_back(g(rng));
  conv.bias_f = {0.05};
  LayerSpec relu;
  relu.name = "relu";
  relu.kind = LayerKind::ReluPact;
  LayerSpec res;
  res.name = "res";
  res.kind = LayerKind::ResidualAdd;
  res.skip_from = -1;
  LayerSpec pool;
  pool.name = "pool";
  pool.kind = LayerKind::AvgPool;
  pool.pool = 2;
  LayerSpec flat;
  flat.name = "flat";
  flat.kind = LayerKind::Flatten;
  m.layers = {conv, relu, res, pool, flat};
  const auto data = fixture::uniform_inputs(8, 100, 16);
  const auto cal = calibrate(m, data.features, data.samples).model;
  CHECK(cal.policy_length() == 2);
  CHECK(cal.output_size() == 4);

  for (std::size_t s = 0; s < 50; ++s) {
    for (int b : {4, 8}) {
      const auto r = forward(cal, data.row(s), BitPolicy{{8, b}});
      const auto& L = cal.layers[2];
      REQUIRE(r.trace.layers[2].input_shifted == (b < 8 ? 32u : 0u));

      const auto x0 = quantize_master(data.row(s), cal.input_params, {1, 4, 4});
      auto t = run_layer(cal.layers[0], x0, 8);
      t = run_layer(cal.layers[1], t, 8);
      const auto sum = run_layer(L, t, b, nullptr, &x0);
      const auto pa = derive_params(L.input_params, b), ps = derive_params(L.skip_params, b);
      const auto ta = shift_down(t.data, 8, b), xs = shift_down(x0.data, 8, b);
      for (std::size_t i = 0; i < 16; ++i) {
        const mpq_class v = (oracle::exact_value(ta[i], pa) + oracle::exact_value(xs[i], ps) -
                             mpq_class(L.output_params.offset)) / mpq_class(L.output_params.scale);
        REQUIRE(std::abs(sum.data[i] - oracle::clip_code(oracle::rq_round(v), 8)) <= 1);
      }
      const auto pooled = run_layer(cal.layers[3], sum, 8);
      const auto& P = cal.layers[3];
      for (std::size_t oy = 0; oy < 2; ++oy)
        for (std::size_t ox = 0; ox < 2; ++ox) {
          mpq_class acc = 0;
          for (std::size_t ky = 0; ky < 2; ++ky)
            for (std::size_t kx = 0; kx < 2; ++kx)
              acc += oracle::exact_value(sum.data[(oy * 2 + ky) * 4 + ox * 2 + kx], P.input_params);
          const mpq_class v = (acc / 4 - mpq_class(P.output_params.offset)) / mpq_class(P.output_params.scale);
          REQUIRE(std::abs(pooled.data[oy * 2 + ox] - oracle::clip_code(oracle::rq_round(v), 8)) <= 1);
        }
    }
  }
  const auto x0 = quantize_master(data.row(0), cal.input_params, {1, 4, 4});
  CHECK(code_of([&] { run_layer(cal.layers[2], x0, 8); }) == ErrorCode::InvalidArgument);
}

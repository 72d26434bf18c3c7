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

#include "nestq/quant_core.hpp"
#include "support/oracles.hpp"

using namespace nestq;

namespace {

QuantParams unit(int bits) {
  QuantParams p;
  p.scale = 1.0;
  p.offset = 0.0;
  p.bits = bits;
  p.master_bits = bits;
  return p;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST_CASE("master params span the range with 2^n - 1 steps") {
  const auto p = make_master_params(-1.0, 2.0, 8);
  CHECK(p.scale == doctest::Approx(3.0 / 255.0));
  CHECK(p.offset == -1.0);
  CHECK(p.bits == 8);
  CHECK(p.is_master());
  CHECK(p.range_max() == doctest::Approx(2.0));
}

TEST_CASE("master params reject bad input") {
  CHECK(code_of([] { make_master_params(1.0, 1.0, 8); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { make_master_params(2.0, 1.0, 8); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { make_master_params(0.0, 1.0, 1); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { make_master_params(0.0, 1.0, 17); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { make_master_params(0.0, INFINITY, 8); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("derived scales double per dropped bit and keep the offset") {
  const auto m = make_master_params(-3.0, 5.0, 10);
  for (int b = 2; b <= 10; ++b) {
    const auto d = derive_params(m, b);
    CHECK(d.scale == m.scale * static_cast<double>(1 << (10 - b)));
    CHECK(d.offset == m.offset);
    CHECK(d.bits == b);
    CHECK(d.master_bits == 10);
  }
  CHECK(derive_params(m, 10) == m);
  CHECK(code_of([&] { derive_params(m, 11); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { derive_params(derive_params(m, 4), 2); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("quantize examples") {
  const auto p = unit(8);
  CHECK(quantize_scalar(0.0, p) == 0);
  CHECK(quantize_scalar(255.0, p) == 255);
  CHECK(quantize_scalar(100.4, p) == 100);
  CHECK(quantize_scalar(100.5, p) == 101);
  CHECK(quantize_scalar(-7.0, p) == 0);
  CHECK(quantize_scalar(1e9, p) == 255);
  CHECK(code_of([&] { quantize_scalar(NAN, p); }) == ErrorCode::InvalidArgument);

  QuantParams q;
  q.scale = 0.25;
  q.offset = -2.0;
  q.bits = 4;
  q.master_bits = 4;
  CHECK(quantize_scalar(q.offset, q) == 0);
  CHECK(quantize_scalar(q.offset + q.scale * 15, q) == 15);
}

TEST_CASE("dequantize examples") {
  const auto p = unit(8);
  CHECK(dequantize_scalar(0, p) == 0.0);
  CHECK(dequantize_scalar(100, p) == 100.0);
  CHECK(code_of([&] { dequantize_scalar(256, p); }) == ErrorCode::InvalidArgument);
  QuantParams q = p;
  q.offset = 1.5;
  CHECK(dequantize_scalar(0, q) == 1.5);
}

TEST_CASE("round trip moves an in-range real by at most half a step") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lo(-10.0, 0.0), span(0.01, 20.0), u(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    const int n = 2 + static_cast<int>(rng() % 15);
    const double a = lo(rng);
    const auto p = make_master_params(a, a + span(rng), n);
    const double x = p.offset + u(rng) * (p.range_max() - p.offset);
    const double back = dequantize_scalar(quantize_scalar(x, p), p);
    CHECK(std::abs(back - x) <= p.scale / 2 * (1 + 1e-12));
  }
  for (int n : {2, 5, 8}) {
    const auto p = make_master_params(-1.0, 3.0, n);
    for (std::uint32_t q = 0; q <= p.max_code(); ++q)
      CHECK(quantize_scalar(dequantize_scalar(static_cast<QValue>(q), p), p) == q);
  }
}

TEST_CASE("shift_down examples") {
  CHECK(shift_down_scalar(100, 8, 4) == 6);
  CHECK(shift_down_scalar(255, 8, 2) == 3);
  CHECK(shift_down_scalar(77, 8, 8) == 77);
  const std::vector<QValue> v{0, 1, 200, 255};
  CHECK(shift_down(v, 8, 8) == v);
  CHECK(code_of([&] { shift_down(v, 8, 9); }) == ErrorCode::InvalidArgument);
  const std::vector<QValue> bad{256};
  CHECK(code_of([&] { shift_down(bad, 8, 4); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("shift_down matches exact rational requantization for every code up to n = 10") {
  for (int n = 2; n <= 10; ++n)
    for (int b = 2; b <= n; ++b)
      for (long q = 0; q < (1L << n); ++q)
        REQUIRE(shift_down_scalar(static_cast<QValue>(q), n, b) == oracle::exact_shift(q, n, b));
}

TEST_CASE("shift_down error before clipping is at most half a step and monotone") {
  for (int n = 2; n <= 12; ++n)
    for (int b = 2; b < n; ++b) {
      const int s = n - b;
      QValue prev = 0;
      for (std::uint32_t q = 0; q < (1U << n); ++q) {
        const std::uint32_t unclipped = (q + (1U << (s - 1))) >> s;
        const double err = std::abs(static_cast<double>(unclipped) - std::ldexp(static_cast<double>(q), -s));
        REQUIRE(err <= 0.5);
        const QValue r = shift_down_scalar(static_cast<QValue>(q), n, b);
        REQUIRE(r >= prev);
        prev = r;
      }
    }
}

TEST_CASE("floating-point requantization") {
  const auto p = unit(8);
  std::vector<QValue> all(256);
  for (int i = 0; i < 256; ++i) all[i] = static_cast<QValue>(i);
  const auto same = dequant_requant_reference(all, p, p);
  CHECK(same.values == all);
  CHECK(same.counters.conversions == 512);
  CHECK(same.counters.fp_ops == 5 * 256);

  QuantParams to = p;
  to.scale = 2.0;
  const std::vector<QValue> seven{7};
  CHECK(dequant_requant_reference(seven, p, to).values[0] == 4);

  const auto m = make_master_params(-0.7, 1.3, 8);
  for (int b = 2; b < 8; ++b) {
    const auto d = derive_params(m, b);
    const auto ref = dequant_requant_reference(all, m, d).values;
    const auto sh = shift_down(all, 8, b);
    for (int i = 0; i < 256; ++i) CHECK(std::abs(int(ref[i]) - int(sh[i])) <= 1);
  }
}

TEST_CASE("nested tensors hold master codes only") {
  const auto p = make_master_params(0.0, 1.0, 4);
  const std::vector<double> x{0.0, 0.4, 1.0, 2.0};
  const auto t = quantize_master(x, p, {2, 2});
  CHECK(t.data == std::vector<QValue>{0, 6, 15, 15});
  CHECK_NOTHROW(validate(t));
  CHECK(code_of([&] { quantize_master(x, p, {3}); }) == ErrorCode::Shape);
  CHECK(code_of([&] { quantize_master(x, derive_params(p, 2), {4}); }) == ErrorCode::InvalidArgument);
}

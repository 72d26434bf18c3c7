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

#include "nestq/quant_core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace nestq {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void validate(const QuantParams& p) {
  require(std::isfinite(p.scale) && p.scale > 0.0, ErrorCode::InvalidArgument,
          "quant params: scale must be positive and finite");
  require(std::isfinite(p.offset), ErrorCode::InvalidArgument, "quant params: offset must be finite");
  require(p.master_bits >= kMinBits && p.master_bits <= kMaxBits, ErrorCode::InvalidArgument,
          "quant params: master bit-width " + std::to_string(p.master_bits) + " outside [2, 16]");
  require(p.bits >= kMinBits && p.bits <= p.master_bits, ErrorCode::InvalidArgument,
          "quant params: bit-width " + std::to_string(p.bits) + " outside [2, master]");
}

QuantParams make_master_params(double range_min, double range_max, int master_bits) {
  require(std::isfinite(range_min) && std::isfinite(range_max), ErrorCode::InvalidArgument,
          "make_master_params: non-finite range");
  require(range_max > range_min, ErrorCode::InvalidArgument,
          "make_master_params: degenerate range (max <= min)");
  require(master_bits >= kMinBits && master_bits <= kMaxBits, ErrorCode::InvalidArgument,
          "make_master_params: bit-width outside [2, 16]");
  QuantParams p;
  p.scale = (range_max - range_min) / static_cast<double>((std::uint32_t{1} << master_bits) - 1U);
  p.offset = range_min;
  p.bits = master_bits;
  p.master_bits = master_bits;
  validate(p);
  return p;
}

QuantParams derive_params(const QuantParams& master, int bits) {
  validate(master);
  require(master.is_master(), ErrorCode::InvalidArgument, "derive_params: input is not a master grid");
  require(bits >= kMinBits && bits <= master.master_bits, ErrorCode::InvalidArgument,
          "derive_params: target bit-width " + std::to_string(bits) + " exceeds master " +
              std::to_string(master.master_bits));
  QuantParams p = master;
  p.bits = bits;
  // ldexp is exact: only the exponent changes.
  p.scale = std::ldexp(master.scale, master.master_bits - bits);
  return p;
}

void validate(const NestedTensor& t) {
  validate(t.params);
  require(t.params.is_master(), ErrorCode::InvalidArgument, "nested tensor must hold the master grid");
  require(element_count(t.shape) == t.data.size(), ErrorCode::Shape,
          "nested tensor: shape does not match element count");
  const auto top = t.params.max_code();
  require(std::all_of(t.data.begin(), t.data.end(), [top](QValue q) { return q <= top; }),
          ErrorCode::InvalidArgument, "nested tensor: element exceeds 2^n - 1");
}

QValue quantize_scalar(double x, const QuantParams& p) {
  require(!std::isnan(x), ErrorCode::InvalidArgument, "quantize: NaN input");
  const double r = std::round((x - p.offset) / p.scale);
  const double top = static_cast<double>(p.max_code());
  return static_cast<QValue>(std::clamp(r, 0.0, top));
}

std::vector<QValue> quantize(std::span<const double> x, const QuantParams& p) {
  validate(p);
  std::vector<QValue> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [&p](double v) { return quantize_scalar(v, p); });
  return out;
}

double dequantize_scalar(QValue q, const QuantParams& p) {
  require(q <= p.max_code(), ErrorCode::InvalidArgument,
          "dequantize: code " + std::to_string(q) + " outside the " + std::to_string(p.bits) + "-bit range");
  return static_cast<double>(q) * p.scale + p.offset;
}

std::vector<double> dequantize(std::span<const QValue> q, const QuantParams& p) {
  validate(p);
  std::vector<double> out(q.size());
  std::transform(q.begin(), q.end(), out.begin(), [&p](QValue v) { return dequantize_scalar(v, p); });
  return out;
}

NestedTensor quantize_master(std::span<const double> x, const QuantParams& master, Shape shape) {
  require(master.is_master(), ErrorCode::InvalidArgument, "quantize_master: params are not a master grid");
  require(element_count(shape) == x.size(), ErrorCode::Shape, "quantize_master: shape does not match data");
  return NestedTensor{quantize(x, master), master, std::move(shape)};
}

QValue shift_down_scalar(QValue q, int from_bits, int to_bits) {
  const int s = from_bits - to_bits;
  if (s == 0) return q;
  const std::uint32_t top = (std::uint32_t{1} << to_bits) - 1U;
  const std::uint32_t r = (static_cast<std::uint32_t>(q) + (std::uint32_t{1} << (s - 1))) >> s;
  return static_cast<QValue>(std::min(r, top));
}

std::vector<QValue> shift_down(std::span<const QValue> q, int from_bits, int to_bits) {
  require(from_bits >= kMinBits && from_bits <= kMaxBits, ErrorCode::InvalidArgument,
          "shift_down: source bit-width outside [2, 16]");
  require(to_bits >= kMinBits && to_bits <= from_bits, ErrorCode::InvalidArgument,
          "shift_down: target bit-width " + std::to_string(to_bits) + " exceeds source " +
              std::to_string(from_bits));
  const std::uint32_t top = (std::uint32_t{1} << from_bits) - 1U;
  std::vector<QValue> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    require(q[i] <= top, ErrorCode::InvalidArgument, "shift_down: element exceeds source range");
    out[i] = shift_down_scalar(q[i], from_bits, to_bits);
  }
  return out;
}

RequantResult dequant_requant_reference(std::span<const QValue> q, const QuantParams& from,
                                        const QuantParams& to) {
  validate(from);
  validate(to);
  RequantResult res;
  res.values.resize(q.size());
  const double top = static_cast<double>(to.max_code());
  for (std::size_t i = 0; i < q.size(); ++i) {
    require(q[i] <= from.max_code(), ErrorCode::InvalidArgument, "requant: element exceeds source range");
    const double xf = static_cast<double>(q[i]) * from.scale + from.offset;
    const double r = std::round((xf - to.offset) / to.scale);
    res.values[i] = static_cast<QValue>(std::clamp(r, 0.0, top));
  }
  const auto n = static_cast<std::uint64_t>(q.size());
  res.counters.conversions = 2 * n;
  res.counters.fp_ops = 5 * n;
  return res;
}

}  // namespace nestq

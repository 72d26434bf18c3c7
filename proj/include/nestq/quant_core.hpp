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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nestq/error.hpp"

namespace nestq {

inline constexpr int kMinBits = 2;
inline constexpr int kMaxBits = 16;

using QValue = std::uint16_t;
using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);

/// Affine grid x = q * scale + offset over the unsigned range [0, 2^bits - 1].
///
/// A value produced by make_master_params has bits == master_bits. Values
/// produced by derive_params keep the master offset and scale the step by an
/// exact power of two, which is what lets a shift move between the two grids.
struct QuantParams {
  double scale = 1.0;
  double offset = 0.0;
  int bits = 8;
  int master_bits = 8;

  std::uint32_t max_code() const { return (std::uint32_t{1} << bits) - 1U; }
  bool is_master() const { return bits == master_bits; }
  /// Largest real value representable on the grid.
  double range_max() const { return offset + scale * static_cast<double>(max_code()); }

  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

/// Throws InvalidArgument if any field breaks the QuantParams invariants.
void validate(const QuantParams& p);

QuantParams make_master_params(double range_min, double range_max, int master_bits);
QuantParams derive_params(const QuantParams& master, int bits);

/// Master-width integer tensor; lower precisions are produced with shift_down.
struct NestedTensor {
  std::vector<QValue> data;
  QuantParams params;
  Shape shape;

  std::size_t size() const { return data.size(); }
};

/// Checks element range, shape/size agreement and params.bits == master_bits.
void validate(const NestedTensor& t);

/// Round half away from zero, then clip to [0, 2^b - 1]. NaN is rejected.
std::vector<QValue> quantize(std::span<const double> x, const QuantParams& p);
QValue quantize_scalar(double x, const QuantParams& p);

std::vector<double> dequantize(std::span<const QValue> q, const QuantParams& p);
double dequantize_scalar(QValue q, const QuantParams& p);

NestedTensor quantize_master(std::span<const double> x, const QuantParams& master, Shape shape);

/// Bit-width transition n -> b: add 2^(n-b-1), shift right by n-b, clip.
QValue shift_down_scalar(QValue q, int from_bits, int to_bits);
std::vector<QValue> shift_down(std::span<const QValue> q, int from_bits, int to_bits);

/// Per-element primitive tallies. Accumulated by kernels and by the float
/// reference cycle so both pipelines can be costed from the same struct.
struct OpCounters {
  std::uint64_t mults = 0;
  std::uint64_t adds = 0;
  std::uint64_t shifts = 0;
  std::uint64_t fp_ops = 0;
  std::uint64_t conversions = 0;

  std::uint64_t total() const { return mults + adds + shifts + fp_ops + conversions; }
  OpCounters& operator+=(const OpCounters& o) {
    mults += o.mults;
    adds += o.adds;
    shifts += o.shifts;
    fp_ops += o.fp_ops;
    conversions += o.conversions;
    return *this;
  }
  friend bool operator==(const OpCounters&, const OpCounters&) = default;
};

struct RequantResult {
  std::vector<QValue> values;
  OpCounters counters;
};

/// The conventional precision change: dequantize to floating point with
/// `from`, requantize with `to`. Every element costs two conversions plus a
/// multiply, a divide, an add, a subtract and a round (5 fp_ops).
RequantResult dequant_requant_reference(std::span<const QValue> q, const QuantParams& from,
                                        const QuantParams& to);

}  // namespace nestq

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

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "nestq/quant_core.hpp"

namespace nestq {

/// Signed 128-bit intermediate for constant application.
using Wide = __int128;

enum class OpRole { Add, Mul, Dot };

std::string to_string(OpRole role);

/// Fixed-point multipliers for one integer operator.
///
/// k[i] = round(k_real[i] * 2^frac_bits), where k_real are the exact scale
/// ratios built from (lhs, rhs, out). The params are kept so the exact ratios
/// can be rebuilt for error analysis. `degenerate` marks a nonzero ratio that
/// rounded to zero, i.e. a term whose signal is annihilated.
struct IntOpConstants {
  OpRole role = OpRole::Add;
  std::array<std::int64_t, 4> k{};
  int frac_bits = 0;
  std::size_t length = 0;  // dot only: N the k4 term was built for
  QuantParams lhs;
  QuantParams rhs;
  QuantParams out;
  bool lhs_offset_zero = false;
  bool degenerate = false;
  bool unary = false;  // requant form: the rhs term is absent
};

inline constexpr int kDefaultFracBits = 16;
inline constexpr int kMaxFracBits = 40;

IntOpConstants add_constants(const QuantParams& p1, const QuantParams& p2, const QuantParams& py, int frac_bits);
IntOpConstants mul_constants(const QuantParams& p1, const QuantParams& p2, const QuantParams& py, int frac_bits);
IntOpConstants dot_constants(const QuantParams& px, const QuantParams& pw, const QuantParams& py, std::size_t n,
                             int frac_bits);

/// Single-operand form of the add operator (rhs contributes nothing): moves a
/// code from `in` to `out` with one multiply, one add and a rounding shift.
IntOpConstants requant_constants(const QuantParams& in, const QuantParams& out, int frac_bits);

/// Rounding right shift, ties away from zero.
Wide round_shift(Wide v, int shift);
QValue clip_to(Wide v, int bits);

QValue int_add(std::int64_t q1, std::int64_t q2, const IntOpConstants& c, const QuantParams& py);
QValue int_mul(std::int64_t q1, std::int64_t q2, const IntOpConstants& c, const QuantParams& py);

/// Add operator whose lhs is an unrounded fixed-point value carrying
/// `lhs_frac_bits` fractional bits (e.g. the raw sum of a dot product).
/// A single rounding is applied at the end.
QValue int_add_fixed(Wide lhs, int lhs_frac_bits, std::int64_t q2, const IntOpConstants& c, const QuantParams& py);

struct AccPolicy {
  int working_bits = 32;
  bool rescale = true;
};

struct DotResult {
  QValue value = 0;
  /// k-weighted sum before the final rounding shift; frac_bits fractional bits.
  Wide raw = 0;
  int frac_bits = 0;
  int rescale_shift = 0;
  OpCounters inner;
  OpCounters epilogue;
};

/// Accumulator width needed for N products of lhs_bits x rhs_bits codes.
int required_accumulator_bits(int lhs_bits, int rhs_bits, std::size_t n);

/// General dot product: accumulates sum(x*w), sum(x), sum(w) and applies
/// k1..k4 once. If the products need more than policy.working_bits, sum(x*w)
/// is rescaled by a rounding right shift and k1 is compensated by the same
/// power of two; with rescale disabled this is an Overflow error.
DotResult int_dot(std::span<const QValue> xq, std::span<const QValue> wq, const IntOpConstants& c,
                  const QuantParams& py, const AccPolicy& policy = {});

/// Zero-offset activation form: k3 vanishes, so the loop only carries
/// sum(x*w) and sum(x) (one multiply, two adds per element).
DotResult int_dot_pact(std::span<const QValue> xq, std::span<const QValue> wq, const IntOpConstants& c,
                       const QuantParams& py, const AccPolicy& policy = {});

struct StandardMacResult {
  std::int64_t acc = 0;
  OpCounters inner;
};

/// Conventional zero-point MAC: acc += (x - zx) * (w - zw).
StandardMacResult standard_mac(std::span<const QValue> xq, std::span<const QValue> wq, std::int64_t zx,
                               std::int64_t zw);

}  // namespace nestq

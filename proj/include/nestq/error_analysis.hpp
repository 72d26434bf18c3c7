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
#include <string_view>
#include <vector>

#include "nestq/exact.hpp"
#include "nestq/int_arith.hpp"

namespace nestq {

/// Error bound of one integer operator instance, in output-code units,
/// against the unrounded exact result.
///
/// total = sum_i |delta_i| * magnitude_i   (constant quantization)
///       + rounding                          (final shift, 1/2 when F > 0)
///       + rescale                           (dot accumulator rescale)
struct ErrorBound {
  OpRole role = OpRole::Add;
  int terms = 3;
  std::array<mpq_class, 4> delta;  // k_real - k / 2^F
  std::array<mpq_class, 4> magnitude;
  mpq_class constant_term;
  mpq_class rounding_term;
  mpq_class rescale_term;

  mpq_class total() const { return constant_term + rounding_term + rescale_term; }
  double value() const { return total().get_d(); }
};

/// Exact scale ratios the constants approximate.
std::array<mpq_class, 4> exact_ratios(const IntOpConstants& c);

/// Worst-case magnitudes from the full code ranges: add (q1, q2, 1);
/// mul (q1 q2, q1, q2, 1); dot (N q_x q_w, N q_x, N q_w, 1).
std::array<mpq_class, 4> default_magnitudes(const IntOpConstants& c);

/// Instance magnitudes for concrete operands.
std::array<mpq_class, 4> scalar_magnitudes(const IntOpConstants& c, std::int64_t q1, std::int64_t q2);
std::array<mpq_class, 4> dot_magnitudes(std::span<const QValue> xq, std::span<const QValue> wq);

/// Shift applied to the product sum when the accumulator is too narrow.
int rescale_shift_for(const IntOpConstants& c, const AccPolicy& acc);

ErrorBound op_error_bound(const IntOpConstants& c, const std::array<mpq_class, 4>& magnitudes,
                          int rescale_shift = 0);
ErrorBound op_error_bound(const IntOpConstants& c);

/// Bound for a dot product whose unrounded sum feeds int_add_fixed (bias add)
/// before the single final rounding.
ErrorBound fused_dot_bias_bound(const IntOpConstants& dot, const std::array<mpq_class, 4>& dot_magnitudes,
                                int rescale_shift, const IntOpConstants& bias_add, std::int64_t bias_code);

/// q / 2^(n-b) - round(q / 2^(n-b)), before clipping.
mpq_class shift_error(std::int64_t q, int n, int b);

/// Exact results in output-code units before rounding and clipping.
mpq_class exact_add(std::int64_t q1, std::int64_t q2, const IntOpConstants& c);
mpq_class exact_mul(std::int64_t q1, std::int64_t q2, const IntOpConstants& c);
mpq_class exact_dot(std::span<const QValue> xq, std::span<const QValue> wq, const IntOpConstants& c);
/// Clip an exact value to the output code range.
mpq_class clip_exact(const mpq_class& v, int bits);

/// Exact requantization of a code from one grid to another.
std::int64_t exact_requantize(std::int64_t q, const QuantParams& from, const QuantParams& to);

enum class VerifyOp { Add, Mul, Dot, Shift };
std::string to_string(VerifyOp op);
VerifyOp verify_op_from_string(std::string_view s);

struct SamplerConfig {
  int min_bits = 2;
  int max_bits = 16;
  int max_frac_bits = 24;
  std::size_t max_dot_length = 64;
  int exhaustive_max_bits = 6;
  double zero_offset_fraction = 0.25;
  bool exhaustive = true;
};

struct VerifyReport {
  VerifyOp op = VerifyOp::Add;
  std::uint64_t seed = 0;
  std::uint64_t cases = 0;
  std::uint64_t exhaustive_cases = 0;
  std::uint64_t random_cases = 0;
  std::uint64_t violations = 0;
  /// Cases whose constants rounded a nonzero ratio to zero (F too small).
  std::uint64_t degenerate_cases = 0;
  double max_abs_error = 0.0;
  double max_bound = 0.0;
  /// Largest error / bound over cases with a nonzero bound.
  double max_ratio = 0.0;
  double mean_signed_error = 0.0;
  /// Shift only: cases at |error| == 1/2 that are not odd half-points.
  std::uint64_t off_half_maxima = 0;
  std::string worst_case;
  std::vector<std::string> violating;  // first few, serialized for reproduction

  bool passed() const { return violations == 0; }
  double satisfaction_rate() const {
    return cases == 0 ? 1.0 : static_cast<double>(cases - violations) / static_cast<double>(cases);
  }
};

/// Exhaustive small grids (when enabled) followed by `samples` seeded random
/// cases, each checked against the exact oracle and the analytic bound.
VerifyReport empirical_verify(VerifyOp op, const SamplerConfig& config, std::uint64_t samples, std::uint64_t seed);

/// Monte-Carlo statistics of the signed offset terms delta_2 S_2 + delta_3 S_3
/// of a dot product with symmetric (zero-mean) weight grids.
struct OffsetTermStats {
  std::uint64_t samples = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double z_score = 0.0;  // mean / (stddev / sqrt(samples))
  double mean_abs_total_error = 0.0;
};

OffsetTermStats dot_offset_term_stats(std::uint64_t samples, std::uint64_t seed, std::size_t length = 64,
                                      int bits = 8);

struct SuiteReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::vector<VerifyReport> ops;
  OffsetTermStats offset_stats;
  bool passed() const;
};

/// Operator bound suite: add, mul, dot and shift with `samples` random cases
/// each, plus the offset-term statistics.
SuiteReport run_verify_suite(std::string_view suite, std::uint64_t seed, std::uint64_t samples = 100000);

}  // namespace nestq

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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nestq/layer_engine.hpp"

namespace nestq {

enum class TransitionMode { Dqt, Standard };
enum class MacMode { Standard, DqtGeneral, DqtFactored, DqtPact };

std::string to_string(TransitionMode mode);
std::string to_string(MacMode mode);
TransitionMode transition_mode_from_string(std::string_view s);

/// Per-element cost of the float dequant/requant cycle, in cycles.
inline constexpr double kStandardCyclesLow = 20.0;
inline constexpr double kStandardCyclesHigh = 55.0;
inline constexpr double kShiftCycles = 1.0;
/// Primitives in one float cycle: 2 conversions, mul, div, add, sub, round.
inline constexpr std::uint64_t kStandardPrimitives = 7;

/// Sum over fc/conv layers of MACs * b * b (weights and activations share the
/// layer's policy bit-width).
std::uint64_t bitops(const ModelGraph& model, const BitPolicy& policy);

/// Elements reduced below master width: weights plus every activation operand
/// entering a layer whose policy bit-width is below n.
std::uint64_t transition_elements(const ModelGraph& model, const BitPolicy& policy);

struct TransitionCost {
  std::uint64_t elements = 0;
  std::uint64_t shifts = 0;
  std::uint64_t conversions = 0;
  std::uint64_t mults = 0;
  std::uint64_t divs = 0;
  std::uint64_t adds = 0;
  std::uint64_t subs = 0;
  std::uint64_t rounds = 0;

  std::uint64_t primitives() const { return shifts + conversions + mults + divs + adds + subs + rounds; }
};

/// dqt: one shift per element. standard: the seven-primitive float cycle.
TransitionCost transition_cost(const ModelGraph& model, const BitPolicy& policy, TransitionMode mode);

struct MacCounts {
  int mults = 0;
  int adds = 0;
  friend bool operator==(const MacCounts&, const MacCounts&) = default;
};

/// In-loop primitives per MAC element. dqt_general is the unfactored
/// per-term form; dqt_factored hoists the constants but still carries the
/// weight sum; dqt_pact drops it for zero-offset activations.
MacCounts mac_primitive_counts(MacMode mode);

/// Interval model of transition cost in cycles; not a measurement.
struct CycleEstimate {
  double low = 0.0;
  double high = 0.0;
};

CycleEstimate cycle_estimate(std::uint64_t elements, TransitionMode mode);

struct CostReport {
  TransitionMode mode = TransitionMode::Dqt;
  BitPolicy policy;
  int master_bits = 0;
  std::uint64_t bitops = 0;
  std::vector<std::string> layer_names;
  std::vector<std::uint64_t> layer_macs;
  std::vector<int> layer_bits;
  std::uint64_t transition_elements = 0;
  std::uint64_t transition_shift_ops = 0;
  /// Full primitive expansion of the float cycle (7 per element).
  std::uint64_t transition_fp_primitives = 0;
  /// Multiplies and divides only (2 per element); the accounting under which
  /// shift:FLOP comes out at 1:2.
  std::uint64_t transition_fp_muldiv = 0;
  std::uint64_t inloop_mults = 0;
  std::uint64_t inloop_adds = 0;
  CycleEstimate dqt_cycles;
  CycleEstimate standard_cycles;
};

/// Pure function of (model, policy, mode). The mode picks the in-loop MAC
/// form; both transition accountings are always filled.
CostReport cost_report(const ModelGraph& model, const BitPolicy& policy, TransitionMode mode);

}  // namespace nestq

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
#include <span>
#include <string>
#include <vector>

#include "nestq/layer_engine.hpp"

namespace nestq {

/// Running output range tracked with an exponential moving average.
struct RangeState {
  double y_min = 0.0;
  double y_max = 0.0;
  double gamma = 0.9;
  std::uint64_t steps = 0;
};

/// First update copies the batch extrema; later updates blend with momentum
/// gamma: y <- gamma * y + (1 - gamma) * batch.
RangeState ema_update(RangeState state, double batch_min, double batch_max);

/// Widens [lo, hi] by max(2^-10 * max(|lo|, |hi|), 1e-6) on each side when
/// hi <= lo. Returns true if it had to.
bool widen_if_degenerate(double& lo, double& hi);

struct CalibrationOptions {
  double gamma = 0.9;
  int passes = 1;
  std::size_t batch_size = 100;
  double alpha_percentile = 99.9;
};

struct CalibrationResult {
  ModelGraph model;
  /// One line per tensor whose range was degenerate and got widened.
  std::vector<std::string> flags;
  /// Kernels whose constants rounded a nonzero ratio to zero.
  std::vector<std::string> warnings;
  RangeState input_state;
  /// Final EMA state per layer output (activation layers keep [0, alpha]).
  std::vector<RangeState> layer_states;
};

/// Weight and bias grids from the exact tensor extrema at master width.
/// Missing biases become zeros. Appends degenerate-range flags.
void quantize_weights(ModelGraph& model, int master_bits, std::vector<std::string>* flags = nullptr);

/// Runs the float model over `samples` rows of `data` (row-major, one row per
/// sample) in batches, tracks input and per-layer output ranges, derives the
/// activation clamps, and leaves a model ready for integer inference.
CalibrationResult calibrate(const ModelGraph& model, std::span<const double> data, std::size_t samples,
                            const CalibrationOptions& options = {});

}  // namespace nestq

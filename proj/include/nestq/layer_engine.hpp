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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nestq/int_arith.hpp"
#include "nestq/quant_core.hpp"

namespace nestq {

enum class LayerKind { Fc, Conv2d, ReluPact, ResidualAdd, AvgPool, Flatten };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

/// Layers that consume an entry of the bit-width policy. Activation clamps,
/// pooling and reshapes run on the master grid.
bool takes_policy(LayerKind kind);

/// Constants for one layer at one operand bit-width, built once after
/// calibration so that inference never touches floating point.
struct PreparedKernel {
  int bits = 0;
  IntOpConstants main;  // dot (fc/conv), add (residual), requant (relu/avgpool)
  IntOpConstants bias;  // fc/conv: folds the bias into the dot result
  QValue pad_code = 0;  // conv: code of real 0 on the operand grid
  bool pact = false;    // fc/conv: zero-offset input, k3-free kernel
  AccPolicy acc;
};

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Fc;

  // Per-sample shapes, filled by resolve_shapes.
  Shape input_shape;
  Shape output_shape;

  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t pool = 0;
  /// residual_add: index of the layer whose output is the second operand;
  /// -1 is the graph input.
  int skip_from = -1;

  // Float parameters; fc weights are [out, in], conv weights [oc, ic, k, k].
  std::vector<double> weight_f;
  std::vector<double> bias_f;

  // Master-width codes and grids, set by quantize_weights / calibrate.
  NestedTensor weight;
  NestedTensor bias;
  QuantParams input_params;
  QuantParams skip_params;
  QuantParams output_params;
  double alpha = 0.0;

  bool weights_quantized = false;
  bool calibrated = false;

  /// Indexed by bit-width; empty slots are bit-widths the layer cannot run at.
  std::vector<std::optional<PreparedKernel>> kernels;

  bool has_weights() const { return kind == LayerKind::Fc || kind == LayerKind::Conv2d; }
  std::size_t weight_count() const;
  std::size_t dot_length() const;
  std::uint64_t macs() const;
  const PreparedKernel& kernel_for(int bits) const;
};

struct ModelGraph {
  std::vector<LayerSpec> layers;
  Shape input_shape;
  QuantParams input_params;
  int master_bits = 8;
  std::vector<int> candidates{2, 4, 6, 8};
  int frac_bits = kDefaultFracBits;
  AccPolicy acc;
  bool calibrated = false;

  /// Indices of the layers that take a policy entry, in execution order.
  std::vector<std::size_t> policy_layers() const;
  std::size_t policy_length() const { return policy_layers().size(); }
  std::size_t input_size() const { return element_count(input_shape); }
  std::size_t output_size() const;
};

/// Computes every layer's input/output shape and checks the graph: sizes
/// match, residual edges point backwards at identically shaped tensors.
void resolve_shapes(ModelGraph& model);

/// Sorted, unique candidate set inside [2, master_bits].
void validate_candidates(const std::vector<int>& candidates, int master_bits);

/// Target +/- 1 window clipped to [2, master_bits].
std::vector<int> candidates_around(int target, int master_bits);

/// Builds PreparedKernel entries for every candidate and for master_bits.
/// Returns a warning per kernel whose constants are degenerate.
std::vector<std::string> prepare_kernels(ModelGraph& model);

struct BitPolicy {
  std::vector<int> bits;
  friend bool operator==(const BitPolicy&, const BitPolicy&) = default;
};

void validate_policy(const BitPolicy& policy, const ModelGraph& model);
BitPolicy uniform_policy(const ModelGraph& model, int bits);
std::string to_string(const BitPolicy& policy);

struct TraceEvent {
  std::string op;
  int layer = -1;  // -1: outside the layer loop
  bool integer_domain = true;
  std::uint64_t elements = 0;
};

struct LayerTrace {
  std::size_t layer = 0;
  LayerKind kind = LayerKind::Fc;
  int bits = 0;
  std::uint64_t input_shifted = 0;
  std::uint64_t weight_shifted = 0;
  std::uint64_t macs = 0;
  bool pact_kernel = false;
  OpCounters inner;
  OpCounters epilogue;

  std::uint64_t shifted_elements() const { return input_shifted + weight_shifted; }
};

struct ExecutionTrace {
  std::vector<LayerTrace> layers;
  std::vector<TraceEvent> events;

  std::uint64_t shifted_elements() const;
  /// Shift instructions issued for bit-width transitions (one per element).
  std::uint64_t transition_shift_ops() const;
  /// Non-integer events strictly between input quantization and output
  /// dequantization.
  std::uint64_t float_ops_inside_integer_window() const;
  OpCounters inner_totals() const;
};

struct RunOptions {
  /// When false no shift_down is issued; only valid for b == n.
  bool transitions = true;
};

/// Executes one layer at operand bit-width `bits`. The output is always on
/// the layer's master output grid. `skip` is the second operand of
/// residual_add and must be null for every other kind.
NestedTensor run_layer(const LayerSpec& layer, const NestedTensor& input, int bits, LayerTrace* trace = nullptr,
                       const NestedTensor* skip = nullptr, const RunOptions& options = {});

/// Integer clamp at quantize(alpha) on a zero-offset master grid.
NestedTensor pact_clamp(const NestedTensor& x, double alpha);

struct ForwardResult {
  std::vector<double> output;
  NestedTensor output_codes;
  ExecutionTrace trace;
};

/// Quantizes the input once, runs every layer on integers at its policy
/// bit-width and dequantizes the final output once.
ForwardResult forward(const ModelGraph& model, std::span<const double> input, const BitPolicy& policy,
                      const RunOptions& options = {});

/// Float reference of every layer output (plain ReLU unless clamp_alpha).
std::vector<std::vector<double>> float_forward_all(const ModelGraph& model, std::span<const double> input,
                                                   bool clamp_alpha = false);
std::vector<double> float_forward(const ModelGraph& model, std::span<const double> input, bool clamp_alpha = false);

struct BatchNormParams {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> mean;
  std::vector<double> var;
  double eps = 1e-5;
};

/// Folds a frozen batch norm into the float weights/bias of an fc or conv
/// layer. Must run before weight quantization.
LayerSpec fold_batchnorm(const LayerSpec& layer, const BatchNormParams& bn);

}  // namespace nestq

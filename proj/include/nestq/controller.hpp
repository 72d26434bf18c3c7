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

enum class ControllerSource { Loaded, SeededRandom, Fixed };

std::string to_string(ControllerSource source);

/// Two-layer MLP over average-pooled input features, emitting one row of
/// candidate logits per policy layer.
struct ControllerSpec {
  std::size_t input_len = 0;
  std::size_t feature_len = 16;  // input is averaged over this many contiguous chunks
  std::size_t hidden = 64;
  std::size_t layers = 0;
  std::vector<int> candidates;

  std::vector<double> w1;  // [hidden, feature_len]
  std::vector<double> b1;  // [hidden]
  std::vector<double> w2;  // [layers * K, hidden]
  std::vector<double> b2;  // [layers * K]

  ControllerSource source = ControllerSource::Loaded;
  std::uint64_t seed = 0;
  std::vector<int> fixed_bits;  // Fixed source only

  std::size_t outputs() const { return layers * candidates.size(); }
};

/// Logit surrogate for +inf used by the fixed-policy source.
inline constexpr double kFixedLogit = 1e6;

void validate(const ControllerSpec& spec, int master_bits = kMaxBits);

ControllerSpec make_seeded_controller(std::size_t input_len, std::size_t layers, std::vector<int> candidates,
                                      std::uint64_t seed, std::size_t feature_len = 16, std::size_t hidden = 64);
ControllerSpec make_fixed_controller(std::size_t input_len, std::vector<int> candidates, const BitPolicy& policy);

/// Row-major [rows, cols] real matrix (rows = layers, cols = candidates).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return std::span<const double>(v).subspan(r * cols, cols); }
};

std::vector<double> pool_features(const ControllerSpec& spec, std::span<const double> input);
Matrix controller_forward(const ControllerSpec& spec, std::span<const double> input);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax_row(std::span<const double> row);

/// Per row, the candidate at the largest logit. Candidates are ascending, so
/// ties resolve toward the smaller bit-width.
BitPolicy select_argmax(const Matrix& logits, const std::vector<int>& candidates);

struct GumbelSample {
  Matrix probs;
  std::vector<std::size_t> hard;  // selected column per row
  BitPolicy policy;
};

/// softmax((logits + g) / tau) with g ~ Gumbel(0, 1) drawn from a seeded
/// generator.
GumbelSample gumbel_softmax_sample(const Matrix& logits, const std::vector<int>& candidates, double tau,
                                   std::uint64_t seed);
/// Same with caller-supplied noise (one value per logit).
GumbelSample gumbel_softmax_sample(const Matrix& logits, const std::vector<int>& candidates, double tau,
                                   std::span<const double> noise);

/// Expected bit-width: (1/N) sum_i sum_k p[i,k] * d_k.
double j_cost(const Matrix& probs, const std::vector<int>& candidates);

/// Deterministic policy from activation spread: each policy layer gets a
/// candidate proportional to how much of its calibrated input range the
/// sample actually occupies.
BitPolicy range_heuristic_policy(const ModelGraph& model, std::span<const double> input);

}  // namespace nestq

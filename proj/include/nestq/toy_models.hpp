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
#include <string_view>
#include <vector>

#include "nestq/layer_engine.hpp"

namespace nestq {

/// Gaussian-blob classification data. Every class mean is a distinct random
/// sign vector scaled to +/-2.5 per dimension, noise is unit variance, and
/// sample i belongs to class i % classes. Features are float-representable.
struct Dataset {
  std::size_t samples = 0;
  std::size_t dims = 0;
  std::size_t classes = 0;
  std::vector<double> features;  // [samples, dims]
  std::vector<std::int32_t> labels;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dims, dims);
  }
};

inline constexpr double kClassMeanMagnitude = 2.5;

Dataset make_synthetic_dataset(std::uint64_t seed, std::size_t classes, std::size_t samples, std::size_t dims);

inline constexpr std::size_t kToyInputs = 16;
inline constexpr std::size_t kToyClasses = 4;
inline constexpr std::size_t kToySamples = 1000;

/// 16 -> 32 -> 16 -> 4 MLP with clamped ReLU after the first two layers,
/// trained in float with seeded SGD on softmax cross-entropy.
ModelGraph make_toy_mlp(std::uint64_t seed, const Dataset& train, int epochs = 20, double learning_rate = 0.02);

/// [1, 4, 4] input: conv 1->4 (3x3, pad 1), ReLU, conv 4->8 (3x3, stride 2,
/// pad 1), ReLU, flatten, fc 32 -> 4. Seeded He-uniform weights.
ModelGraph make_toy_cnn(std::uint64_t seed);

/// Builds the toy model by name ("mlp" or "cnn") from a seed; the MLP trains
/// on the synthetic set drawn from the same seed.
ModelGraph make_toy_model(std::string_view kind, std::uint64_t seed);

/// Fraction of rows whose argmax of the float model output equals the label.
double float_accuracy(const ModelGraph& model, const Dataset& data);

std::size_t argmax(std::span<const double> v);

}  // namespace nestq

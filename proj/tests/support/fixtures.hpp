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
#include <random>
#include <vector>

#include "nestq/calibration.hpp"
#include "nestq/toy_models.hpp"

namespace fixture {

inline constexpr std::uint64_t kSeed = 20260101;

struct Calibrated {
  nestq::ModelGraph model;
  nestq::Dataset data;
};

inline Calibrated mlp(std::uint64_t seed = kSeed) {
  Calibrated c;
  c.data = nestq::make_synthetic_dataset(seed, nestq::kToyClasses, nestq::kToySamples, nestq::kToyInputs);
  const auto m = nestq::make_toy_model("mlp", seed);
  c.model = nestq::calibrate(m, c.data.features, c.data.samples).model;
  return c;
}

inline nestq::Dataset uniform_inputs(std::uint64_t seed, std::size_t samples, std::size_t dims) {
  nestq::Dataset d;
  d.samples = samples;
  d.dims = dims;
  d.classes = 1;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  d.features.resize(samples * dims);
  for (auto& v : d.features) v = static_cast<float>(u(rng));
  d.labels.assign(samples, 0);
  return d;
}

inline Calibrated cnn(std::uint64_t seed = kSeed) {
  Calibrated c;
  c.data = uniform_inputs(seed, 200, 16);
  const auto m = nestq::make_toy_model("cnn", seed);
  c.model = nestq::calibrate(m, c.data.features, c.data.samples).model;
  return c;
}

}  // namespace fixture

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

#include "nestq/controller.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace nestq {

std::string to_string(ControllerSource source) {
  switch (source) {
    case ControllerSource::Loaded: return "loaded";
    case ControllerSource::SeededRandom: return "seeded-random";
    case ControllerSource::Fixed: return "fixed";
  }
  return "unknown";
}

void validate(const ControllerSpec& spec, int master_bits) {
  validate_candidates(spec.candidates, master_bits);
  require(spec.layers > 0, ErrorCode::InvalidArgument, "controller: layer count must be positive");
  require(spec.input_len > 0, ErrorCode::InvalidArgument, "controller: input length must be positive");
  if (spec.source == ControllerSource::Fixed) {
    require(spec.fixed_bits.size() == spec.layers, ErrorCode::Policy, "controller: fixed policy length mismatch");
    for (int b : spec.fixed_bits) {
      require(std::find(spec.candidates.begin(), spec.candidates.end(), b) != spec.candidates.end(),
              ErrorCode::Policy, "controller: fixed bit-width not in the candidate set");
    }
    return;
  }
  require(spec.feature_len > 0 && spec.feature_len <= spec.input_len, ErrorCode::InvalidArgument,
          "controller: feature length must lie in [1, input length]");
  require(spec.hidden > 0, ErrorCode::InvalidArgument, "controller: hidden width must be positive");
  require(spec.w1.size() == spec.hidden * spec.feature_len && spec.b1.size() == spec.hidden &&
              spec.w2.size() == spec.outputs() * spec.hidden && spec.b2.size() == spec.outputs(),
          ErrorCode::Shape, "controller: weight tensors do not match the declared shape");
}

ControllerSpec make_seeded_controller(std::size_t input_len, std::size_t layers, std::vector<int> candidates,
                                      std::uint64_t seed, std::size_t feature_len, std::size_t hidden) {
  ControllerSpec s;
  s.input_len = input_len;
  s.feature_len = std::min(feature_len, input_len);
  s.hidden = hidden;
  s.layers = layers;
  s.candidates = std::move(candidates);
  s.source = ControllerSource::SeededRandom;
  s.seed = seed;
  std::mt19937_64 rng(seed);
  auto fill = [&](std::vector<double>& v, std::size_t count, std::size_t fan_in) {
    const double r = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-r, r);
    v.resize(count);
    for (auto& x : v) x = static_cast<double>(static_cast<float>(dist(rng)));
  };
  fill(s.w1, s.hidden * s.feature_len, s.feature_len);
  fill(s.b1, s.hidden, s.feature_len);
  fill(s.w2, s.outputs() * s.hidden, s.hidden);
  fill(s.b2, s.outputs(), s.hidden);
  validate(s);
  return s;
}

ControllerSpec make_fixed_controller(std::size_t input_len, std::vector<int> candidates, const BitPolicy& policy) {
  ControllerSpec s;
  s.input_len = input_len;
  s.layers = policy.bits.size();
  s.candidates = std::move(candidates);
  s.source = ControllerSource::Fixed;
  s.fixed_bits = policy.bits;
  validate(s);
  return s;
}

std::vector<double> pool_features(const ControllerSpec& spec, std::span<const double> input) {
  require(input.size() == spec.input_len, ErrorCode::Shape,
          "controller: input has " + std::to_string(input.size()) + " elements, expected " +
              std::to_string(spec.input_len));
  const std::size_t F = spec.feature_len, L = spec.input_len;
  std::vector<double> f(F, 0.0);
  for (std::size_t j = 0; j < F; ++j) {
    const std::size_t a = j * L / F, b = (j + 1) * L / F;
    double sum = 0.0;
    for (std::size_t i = a; i < b; ++i) sum += input[i];
    f[j] = sum / static_cast<double>(b - a);
  }
  return f;
}

Matrix controller_forward(const ControllerSpec& spec, std::span<const double> input) {
  validate(spec);
  const std::size_t K = spec.candidates.size();
  Matrix out{spec.layers, K, std::vector<double>(spec.outputs(), 0.0)};
  if (spec.source == ControllerSource::Fixed) {
    require(input.size() == spec.input_len, ErrorCode::Shape, "controller: input shape mismatch");
    for (std::size_t i = 0; i < spec.layers; ++i) {
      const auto it = std::find(spec.candidates.begin(), spec.candidates.end(), spec.fixed_bits[i]);
      out.v[i * K + static_cast<std::size_t>(it - spec.candidates.begin())] = kFixedLogit;
    }
    return out;
  }
  const auto f = pool_features(spec, input);
  std::vector<double> h(spec.hidden);
  for (std::size_t j = 0; j < spec.hidden; ++j) {
    double acc = spec.b1[j];
    for (std::size_t i = 0; i < spec.feature_len; ++i) acc += spec.w1[j * spec.feature_len + i] * f[i];
    h[j] = std::max(acc, 0.0);
  }
  for (std::size_t o = 0; o < spec.outputs(); ++o) {
    double acc = spec.b2[o];
    for (std::size_t j = 0; j < spec.hidden; ++j) acc += spec.w2[o * spec.hidden + j] * h[j];
    out.v[o] = acc;
  }
  return out;
}

std::size_t argmax_row(std::span<const double> row) {
  require(!row.empty(), ErrorCode::InvalidArgument, "argmax of an empty row");
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

namespace {

void check_matrix(const Matrix& m, const std::vector<int>& candidates) {
  require(m.cols == candidates.size() && m.cols > 0, ErrorCode::Shape, "logit columns do not match the candidate set");
  require(m.v.size() == m.rows * m.cols, ErrorCode::Shape, "logit matrix size mismatch");
  for (double x : m.v) require(std::isfinite(x), ErrorCode::InvalidArgument, "logits must be finite");
}

}  // namespace

BitPolicy select_argmax(const Matrix& logits, const std::vector<int>& candidates) {
  check_matrix(logits, candidates);
  BitPolicy p;
  for (std::size_t r = 0; r < logits.rows; ++r) p.bits.push_back(candidates[argmax_row(logits.row(r))]);
  return p;
}

GumbelSample gumbel_softmax_sample(const Matrix& logits, const std::vector<int>& candidates, double tau,
                                   std::span<const double> noise) {
  check_matrix(logits, candidates);
  require(std::isfinite(tau) && tau > 0.0, ErrorCode::InvalidArgument, "gumbel_softmax: temperature must be > 0");
  require(noise.size() == logits.v.size(), ErrorCode::Shape, "gumbel_softmax: noise size mismatch");
  GumbelSample s;
  s.probs = Matrix{logits.rows, logits.cols, std::vector<double>(logits.v.size())};
  std::vector<double> z(logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    for (std::size_t k = 0; k < logits.cols; ++k) z[k] = (logits.at(r, k) + noise[r * logits.cols + k]) / tau;
    const std::size_t top = argmax_row(z);
    const double zmax = z[top];
    double total = 0.0;
    for (std::size_t k = 0; k < logits.cols; ++k) {
      z[k] = std::exp(z[k] - zmax);
      total += z[k];
    }
    for (std::size_t k = 0; k < logits.cols; ++k) s.probs.v[r * logits.cols + k] = z[k] / total;
    s.hard.push_back(top);
    s.policy.bits.push_back(candidates[top]);
  }
  return s;
}

GumbelSample gumbel_softmax_sample(const Matrix& logits, const std::vector<int>& candidates, double tau,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> noise(logits.v.size());
  for (auto& g : noise) {
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    g = -std::log(-std::log(u));
  }
  return gumbel_softmax_sample(logits, candidates, tau, std::span<const double>(noise));
}

double j_cost(const Matrix& probs, const std::vector<int>& candidates) {
  check_matrix(probs, candidates);
  require(probs.rows > 0, ErrorCode::InvalidArgument, "j_cost: no rows");
  double total = 0.0;
  for (std::size_t r = 0; r < probs.rows; ++r) {
    double mass = 0.0, expect = 0.0;
    for (std::size_t k = 0; k < probs.cols; ++k) {
      const double p = probs.at(r, k);
      require(p >= 0.0, ErrorCode::InvalidArgument, "j_cost: negative probability");
      mass += p;
      expect += p * candidates[k];
    }
    require(std::fabs(mass - 1.0) <= 1e-6, ErrorCode::InvalidArgument, "j_cost: row does not sum to 1");
    total += expect;
  }
  return total / static_cast<double>(probs.rows);
}

BitPolicy range_heuristic_policy(const ModelGraph& model, std::span<const double> input) {
  require(model.calibrated, ErrorCode::InvalidArgument, "heuristic policy needs a calibrated model");
  const auto outs = float_forward_all(model, input, true);
  const std::size_t K = model.candidates.size();
  BitPolicy p;
  for (std::size_t i : model.policy_layers()) {
    const auto& x = i == 0 ? std::vector<double>(input.begin(), input.end()) : outs[i - 1];
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    const auto& ip = model.layers[i].input_params;
    const double width = ip.range_max() - ip.offset;
    const double ratio = std::clamp((*hi - *lo) / width, 0.0, 1.0);
    const auto k = std::min(K - 1, static_cast<std::size_t>(ratio * static_cast<double>(K)));
    p.bits.push_back(model.candidates[k]);
  }
  return p;
}

}  // namespace nestq

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

#include "nestq/toy_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "nestq/tensor_blob.hpp"

namespace nestq {

Dataset make_synthetic_dataset(std::uint64_t seed, std::size_t classes, std::size_t samples, std::size_t dims) {
  require(classes >= 1 && dims >= 1, ErrorCode::InvalidArgument, "dataset needs at least one class and one dim");
  require(dims >= 63 || classes <= (std::size_t{1} << dims), ErrorCode::InvalidArgument,
          "not enough dims for distinct class sign patterns");
  Dataset d;
  d.samples = samples;
  d.dims = dims;
  d.classes = classes;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution sign(0.5);
  std::vector<std::vector<double>> means;
  std::set<std::vector<double>> seen;
  while (means.size() < classes) {
    std::vector<double> m(dims);
    for (auto& v : m) v = sign(rng) ? kClassMeanMagnitude : -kClassMeanMagnitude;
    if (seen.insert(m).second) means.push_back(std::move(m));
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  d.features.resize(samples * dims);
  d.labels.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t c = i % classes;
    d.labels[i] = static_cast<std::int32_t>(c);
    for (std::size_t j = 0; j < dims; ++j) d.features[i * dims + j] = means[c][j] + noise(rng);
  }
  round_to_f32(d.features);
  return d;
}

std::size_t argmax(std::span<const double> v) {
  require(!v.empty(), ErrorCode::InvalidArgument, "argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

namespace {

struct Dense {
  std::size_t in = 0, out = 0;
  std::vector<double> w, b;

  Dense(std::size_t i, std::size_t o, std::mt19937_64& rng) : in(i), out(o), w(i * o), b(o, 0.0) {
    const double r = std::sqrt(6.0 / static_cast<double>(i));
    std::uniform_real_distribution<double> dist(-r, r);
    for (auto& x : w) x = dist(rng);
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> y(b);
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t k = 0; k < in; ++k) y[o] += w[o * in + k] * x[k];
    }
    return y;
  }

  // Applies the SGD step and returns the gradient w.r.t. the input.
  std::vector<double> backward(std::span<const double> x, std::span<const double> gy, double lr) {
    std::vector<double> gx(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t k = 0; k < in; ++k) {
        gx[k] += w[o * in + k] * gy[o];
        w[o * in + k] -= lr * gy[o] * x[k];
      }
      b[o] -= lr * gy[o];
    }
    return gx;
  }
};

LayerSpec fc(std::string name, const Dense& d) {
  LayerSpec L;
  L.name = std::move(name);
  L.kind = LayerKind::Fc;
  L.in_features = d.in;
  L.out_features = d.out;
  L.weight_f = d.w;
  L.bias_f = d.b;
  round_to_f32(L.weight_f);
  round_to_f32(L.bias_f);
  return L;
}

LayerSpec relu(std::string name) {
  LayerSpec L;
  L.name = std::move(name);
  L.kind = LayerKind::ReluPact;
  return L;
}

}  // namespace

ModelGraph make_toy_mlp(std::uint64_t seed, const Dataset& train, int epochs, double learning_rate) {
  require(train.dims == kToyInputs && train.classes == kToyClasses, ErrorCode::Shape,
          "toy MLP trains on 16-dim, 4-class data");
  require(epochs >= 0 && learning_rate > 0.0, ErrorCode::InvalidArgument, "bad training schedule");
  std::mt19937_64 rng(seed);
  Dense l1(16, 32, rng), l2(32, 16, rng), l3(16, 4, rng);
  std::vector<std::size_t> order(train.samples);
  std::iota(order.begin(), order.end(), 0);
  auto relu_vec = [](std::vector<double> v) {
    for (auto& x : v) x = std::max(x, 0.0);
    return v;
  };
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      const auto x = train.row(i);
      const auto z1 = l1.apply(x);
      const auto a1 = relu_vec(z1);
      const auto z2 = l2.apply(a1);
      const auto a2 = relu_vec(z2);
      auto p = l3.apply(a2);
      const double top = *std::max_element(p.begin(), p.end());
      double total = 0.0;
      for (auto& v : p) total += (v = std::exp(v - top));
      for (auto& v : p) v /= total;
      p[static_cast<std::size_t>(train.labels[i])] -= 1.0;
      auto g2 = l3.backward(a2, p, learning_rate);
      for (std::size_t k = 0; k < g2.size(); ++k) g2[k] = z2[k] > 0.0 ? g2[k] : 0.0;
      auto g1 = l2.backward(a1, g2, learning_rate);
      for (std::size_t k = 0; k < g1.size(); ++k) g1[k] = z1[k] > 0.0 ? g1[k] : 0.0;
      l1.backward(x, g1, learning_rate);
    }
  }
  ModelGraph g;
  g.input_shape = {kToyInputs};
  g.layers = {fc("fc1", l1), relu("relu1"), fc("fc2", l2), relu("relu2"), fc("fc3", l3)};
  resolve_shapes(g);
  return g;
}

ModelGraph make_toy_cnn(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto conv = [&](std::string name, std::size_t ic, std::size_t oc, std::size_t stride) {
    LayerSpec L;
    L.name = std::move(name);
    L.kind = LayerKind::Conv2d;
    L.in_channels = ic;
    L.out_channels = oc;
    L.kernel = 3;
    L.stride = stride;
    L.padding = 1;
    const double r = std::sqrt(6.0 / static_cast<double>(ic * 9));
    std::uniform_real_distribution<double> dist(-r, r);
    L.weight_f.resize(oc * ic * 9);
    for (auto& w : L.weight_f) w = dist(rng);
    L.bias_f.resize(oc);
    std::uniform_real_distribution<double> bias(-0.1, 0.1);
    for (auto& b : L.bias_f) b = bias(rng);
    round_to_f32(L.weight_f);
    round_to_f32(L.bias_f);
    return L;
  };
  ModelGraph g;
  g.input_shape = {1, 4, 4};
  g.layers.push_back(conv("conv1", 1, 4, 1));
  g.layers.push_back(relu("relu1"));
  g.layers.push_back(conv("conv2", 4, 8, 2));
  g.layers.push_back(relu("relu2"));
  LayerSpec flat;
  flat.name = "flatten";
  flat.kind = LayerKind::Flatten;
  g.layers.push_back(flat);
  g.layers.push_back(fc("fc", Dense(32, 4, rng)));
  resolve_shapes(g);
  return g;
}

ModelGraph make_toy_model(std::string_view kind, std::uint64_t seed) {
  if (kind == "mlp") return make_toy_mlp(seed, make_synthetic_dataset(seed, kToyClasses, kToySamples, kToyInputs));
  if (kind == "cnn") return make_toy_cnn(seed);
  fail(ErrorCode::InvalidArgument, "unknown toy model '" + std::string(kind) + "' (expected mlp or cnn)");
}

double float_accuracy(const ModelGraph& model, const Dataset& data) {
  if (data.samples == 0) return 1.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.samples; ++i) {
    const auto y = float_forward(model, data.row(i));
    if (argmax(y) == static_cast<std::size_t>(data.labels[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.samples);
}

}  // namespace nestq

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

#include "nestq/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nestq {

RangeState ema_update(RangeState state, double batch_min, double batch_max) {
  require(std::isfinite(batch_min) && std::isfinite(batch_max), ErrorCode::InvalidArgument,
          "ema_update: batch extrema must be finite");
  require(batch_min <= batch_max, ErrorCode::InvalidArgument, "ema_update: batch_min > batch_max");
  require(state.gamma >= 0.0 && state.gamma <= 1.0, ErrorCode::InvalidArgument, "ema_update: gamma outside [0, 1]");
  if (state.steps == 0) {
    state.y_min = batch_min;
    state.y_max = batch_max;
  } else {
    state.y_min = state.gamma * state.y_min + (1.0 - state.gamma) * batch_min;
    state.y_max = state.gamma * state.y_max + (1.0 - state.gamma) * batch_max;
  }
  ++state.steps;
  return state;
}

bool widen_if_degenerate(double& lo, double& hi) {
  require(std::isfinite(lo) && std::isfinite(hi), ErrorCode::InvalidArgument, "range bounds must be finite");
  if (hi > lo) return false;
  const double eps = std::max(std::ldexp(std::max(std::fabs(lo), std::fabs(hi)), -10), 1e-6);
  hi = lo + eps;
  lo -= eps;
  return true;
}

namespace {

QuantParams grid_for(const std::string& what, double lo, double hi, int bits, std::vector<std::string>* flags) {
  if (widen_if_degenerate(lo, hi) && flags) flags->push_back(what + ": degenerate range widened");
  return make_master_params(lo, hi, bits);
}

Shape weight_shape(const LayerSpec& L) {
  if (L.kind == LayerKind::Fc) return {L.out_features, L.in_features};
  return {L.out_channels, L.in_channels, L.kernel, L.kernel};
}

double percentile(std::vector<double>& v, double p) {
  if (v.empty()) return 0.0;
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end());
  return v[rank - 1];
}

}  // namespace

void quantize_weights(ModelGraph& model, int master_bits, std::vector<std::string>* flags) {
  require(master_bits >= kMinBits && master_bits <= kMaxBits, ErrorCode::InvalidArgument,
          "master bit-width must lie in [2, 16]");
  resolve_shapes(model);
  model.master_bits = master_bits;
  std::erase_if(model.candidates, [&](int b) { return b > master_bits; });
  if (model.candidates.empty()) model.candidates = {master_bits};
  validate_candidates(model.candidates, master_bits);
  for (auto& L : model.layers) {
    L.calibrated = false;
    L.kernels.clear();
    if (!L.has_weights()) continue;
    require(L.weight_f.size() == L.weight_count(), ErrorCode::Shape,
            "layer '" + L.name + "': float weights missing or wrong size");
    const std::size_t nout = L.kind == LayerKind::Fc ? L.out_features : L.out_channels;
    if (L.bias_f.empty()) L.bias_f.assign(nout, 0.0);
    const auto [wlo, whi] = std::minmax_element(L.weight_f.begin(), L.weight_f.end());
    const auto wp = grid_for(L.name + ".weight", *wlo, *whi, master_bits, flags);
    L.weight = quantize_master(L.weight_f, wp, weight_shape(L));
    const auto [blo, bhi] = std::minmax_element(L.bias_f.begin(), L.bias_f.end());
    const auto bp = grid_for(L.name + ".bias", *blo, *bhi, master_bits, flags);
    L.bias = quantize_master(L.bias_f, bp, Shape{nout});
    L.weights_quantized = true;
  }
  model.calibrated = false;
}

CalibrationResult calibrate(const ModelGraph& model, std::span<const double> data, std::size_t samples,
                            const CalibrationOptions& options) {
  require(options.passes >= 1, ErrorCode::InvalidArgument, "calibrate: passes must be >= 1");
  require(options.batch_size >= 1, ErrorCode::InvalidArgument, "calibrate: batch size must be >= 1");
  require(options.gamma >= 0.0 && options.gamma <= 1.0, ErrorCode::InvalidArgument, "calibrate: gamma outside [0, 1]");
  require(options.alpha_percentile > 0.0 && options.alpha_percentile <= 100.0, ErrorCode::InvalidArgument,
          "calibrate: percentile outside (0, 100]");
  require(samples >= 1, ErrorCode::InvalidArgument, "calibrate: no calibration samples");

  CalibrationResult res;
  res.model = model;
  ModelGraph& m = res.model;
  const int n = m.master_bits;
  quantize_weights(m, n, &res.flags);
  const std::size_t in = m.input_size();
  require(data.size() == samples * in, ErrorCode::Shape, "calibrate: data size does not match samples x input size");

  const std::size_t nl = m.layers.size();
  res.input_state.gamma = options.gamma;
  res.layer_states.assign(nl, RangeState{0.0, 0.0, options.gamma, 0});
  std::vector<std::vector<double>> relu_values(nl);
  constexpr double inf = std::numeric_limits<double>::infinity();

  for (int pass = 0; pass < options.passes; ++pass) {
    const bool last = pass + 1 == options.passes;
    for (auto& v : relu_values) v.clear();
    for (std::size_t start = 0; start < samples; start += options.batch_size) {
      const std::size_t stop = std::min(samples, start + options.batch_size);
      double in_lo = inf, in_hi = -inf;
      std::vector<double> lo(nl, inf), hi(nl, -inf);
      for (std::size_t s = start; s < stop; ++s) {
        const auto x = data.subspan(s * in, in);
        for (double v : x) {
          in_lo = std::min(in_lo, v);
          in_hi = std::max(in_hi, v);
        }
        const auto outs = float_forward_all(m, x, false);
        for (std::size_t i = 0; i < nl; ++i) {
          for (double v : outs[i]) {
            lo[i] = std::min(lo[i], v);
            hi[i] = std::max(hi[i], v);
          }
          if (last && m.layers[i].kind == LayerKind::ReluPact) {
            relu_values[i].insert(relu_values[i].end(), outs[i].begin(), outs[i].end());
          }
        }
      }
      res.input_state = ema_update(res.input_state, in_lo, in_hi);
      for (std::size_t i = 0; i < nl; ++i) res.layer_states[i] = ema_update(res.layer_states[i], lo[i], hi[i]);
    }
  }

  m.input_params = grid_for("input", res.input_state.y_min, res.input_state.y_max, n, &res.flags);
  for (std::size_t i = 0; i < nl; ++i) {
    auto& L = m.layers[i];
    L.input_params = i == 0 ? m.input_params : m.layers[i - 1].output_params;
    if (L.kind == LayerKind::ResidualAdd) {
      L.skip_params = L.skip_from < 0 ? m.input_params : m.layers[static_cast<std::size_t>(L.skip_from)].output_params;
    }
    switch (L.kind) {
      case LayerKind::ReluPact: {
        double alpha = percentile(relu_values[i], options.alpha_percentile);
        double lo = 0.0;
        if (widen_if_degenerate(lo, alpha)) {
          res.flags.push_back(L.name + ": activation clamp was zero, widened");
        }
        L.alpha = alpha;
        L.output_params = make_master_params(0.0, alpha, n);
        res.layer_states[i].y_min = 0.0;
        res.layer_states[i].y_max = alpha;
        break;
      }
      case LayerKind::AvgPool:
      case LayerKind::Flatten:
        L.output_params = L.input_params;
        break;
      default:
        L.output_params =
            grid_for(L.name + ".output", res.layer_states[i].y_min, res.layer_states[i].y_max, n, &res.flags);
        break;
    }
    L.calibrated = true;
  }
  m.calibrated = true;
  res.warnings = prepare_kernels(m);
  return res;
}

}  // namespace nestq

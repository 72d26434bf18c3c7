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

#include "nestq/layer_engine.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace nestq {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Fc: return "fc";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::ReluPact: return "relu_pact";
    case LayerKind::ResidualAdd: return "residual_add";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::Flatten: return "flatten";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  if (name == "fc") return LayerKind::Fc;
  if (name == "conv2d") return LayerKind::Conv2d;
  if (name == "relu_pact") return LayerKind::ReluPact;
  if (name == "residual_add") return LayerKind::ResidualAdd;
  if (name == "avgpool") return LayerKind::AvgPool;
  if (name == "flatten") return LayerKind::Flatten;
  fail(ErrorCode::Format, "unknown layer kind '" + std::string(name) + "'");
}

bool takes_policy(LayerKind kind) {
  return kind == LayerKind::Fc || kind == LayerKind::Conv2d || kind == LayerKind::ResidualAdd;
}

std::size_t LayerSpec::weight_count() const {
  if (kind == LayerKind::Fc) return in_features * out_features;
  if (kind == LayerKind::Conv2d) return out_channels * in_channels * kernel * kernel;
  return 0;
}

std::size_t LayerSpec::dot_length() const {
  if (kind == LayerKind::Fc) return in_features;
  if (kind == LayerKind::Conv2d) return in_channels * kernel * kernel;
  return 0;
}

std::uint64_t LayerSpec::macs() const {
  if (kind == LayerKind::Fc) return static_cast<std::uint64_t>(in_features) * out_features;
  if (kind == LayerKind::Conv2d) return static_cast<std::uint64_t>(element_count(output_shape)) * kernel * kernel * in_channels;
  return 0;
}

const PreparedKernel& LayerSpec::kernel_for(int bits) const {
  require(bits >= 0 && static_cast<std::size_t>(bits) < kernels.size() && kernels[bits].has_value(), ErrorCode::Policy,
          "layer '" + name + "' has no kernel for " + std::to_string(bits) + " bits (not a candidate or not prepared)");
  return *kernels[bits];
}

std::vector<std::size_t> ModelGraph::policy_layers() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (takes_policy(layers[i].kind)) idx.push_back(i);
  }
  return idx;
}

std::size_t ModelGraph::output_size() const {
  if (layers.empty()) return input_size();
  return element_count(layers.back().output_shape);
}

void validate_candidates(const std::vector<int>& candidates, int master_bits) {
  require(!candidates.empty(), ErrorCode::InvalidArgument, "candidate set is empty");
  require(std::is_sorted(candidates.begin(), candidates.end()) &&
              std::adjacent_find(candidates.begin(), candidates.end()) == candidates.end(),
          ErrorCode::InvalidArgument, "candidate set must be sorted ascending without duplicates");
  require(candidates.front() >= kMinBits && candidates.back() <= master_bits, ErrorCode::InvalidArgument,
          "candidate bit-widths must lie in [2, master]");
}

std::vector<int> candidates_around(int target, int master_bits) {
  std::vector<int> out;
  for (int b = target - 1; b <= target + 1; ++b) {
    if (b >= kMinBits && b <= master_bits) out.push_back(b);
  }
  require(!out.empty(), ErrorCode::InvalidArgument, "no candidate bit-width near the target");
  return out;
}

void resolve_shapes(ModelGraph& model) {
  require(!model.input_shape.empty(), ErrorCode::Shape, "model input shape is empty");
  std::vector<Shape> outputs;
  Shape cur = model.input_shape;
  auto shape_of = [&](int idx) -> const Shape& { return idx < 0 ? model.input_shape : outputs[idx]; };
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& L = model.layers[i];
    const std::string where = "layer " + std::to_string(i) + " ('" + L.name + "'): ";
    L.input_shape = cur;
    switch (L.kind) {
      case LayerKind::Fc:
        require(cur.size() == 1 && cur[0] == L.in_features, ErrorCode::Shape,
                where + "fc expects a flat input of " + std::to_string(L.in_features) + " features");
        require(L.out_features > 0, ErrorCode::Shape, where + "fc needs out_features > 0");
        L.output_shape = {L.out_features};
        break;
      case LayerKind::Conv2d: {
        require(cur.size() == 3 && cur[0] == L.in_channels, ErrorCode::Shape,
                where + "conv2d expects [" + std::to_string(L.in_channels) + ", H, W] input");
        require(L.kernel > 0 && L.stride > 0 && L.out_channels > 0, ErrorCode::Shape, where + "bad conv geometry");
        require(cur[1] + 2 * L.padding >= L.kernel && cur[2] + 2 * L.padding >= L.kernel, ErrorCode::Shape,
                where + "kernel larger than padded input");
        const std::size_t ho = (cur[1] + 2 * L.padding - L.kernel) / L.stride + 1;
        const std::size_t wo = (cur[2] + 2 * L.padding - L.kernel) / L.stride + 1;
        L.output_shape = {L.out_channels, ho, wo};
        break;
      }
      case LayerKind::ReluPact:
      case LayerKind::Flatten:
        L.output_shape = L.kind == LayerKind::Flatten ? Shape{element_count(cur)} : cur;
        break;
      case LayerKind::ResidualAdd:
        require(L.skip_from >= -1 && L.skip_from < static_cast<int>(i), ErrorCode::Shape,
                where + "residual edge must point at an earlier layer or the input");
        require(shape_of(L.skip_from) == cur, ErrorCode::Shape, where + "residual operands differ in shape");
        L.output_shape = cur;
        break;
      case LayerKind::AvgPool:
        require(cur.size() == 3 && L.pool > 0 && cur[1] % L.pool == 0 && cur[2] % L.pool == 0, ErrorCode::Shape,
                where + "avgpool needs [C, H, W] input divisible by the window");
        L.output_shape = {cur[0], cur[1] / L.pool, cur[2] / L.pool};
        break;
    }
    if (L.has_weights()) {
      require(L.weight_f.empty() || L.weight_f.size() == L.weight_count(), ErrorCode::Shape,
              where + "weight tensor has wrong element count");
      const std::size_t nout = L.kind == LayerKind::Fc ? L.out_features : L.out_channels;
      require(L.bias_f.empty() || L.bias_f.size() == nout, ErrorCode::Shape, where + "bias has wrong element count");
    }
    outputs.push_back(L.output_shape);
    cur = L.output_shape;
  }
}

std::vector<std::string> prepare_kernels(ModelGraph& model) {
  require(model.calibrated, ErrorCode::InvalidArgument, "prepare_kernels: model is not calibrated");
  validate_candidates(model.candidates, model.master_bits);
  const int n = model.master_bits;
  std::vector<std::string> warnings;
  auto note = [&](const LayerSpec& L, int b, const IntOpConstants& c) {
    if (c.degenerate) {
      warnings.push_back("layer '" + L.name + "' at " + std::to_string(b) + " bits: " + to_string(c.role) +
                         " constant rounded to zero");
    }
  };
  for (auto& L : model.layers) {
    L.kernels.assign(static_cast<std::size_t>(n) + 1, std::nullopt);
    std::set<int> widths{n};
    if (takes_policy(L.kind)) widths.insert(model.candidates.begin(), model.candidates.end());
    for (int b : widths) {
      PreparedKernel k;
      k.bits = b;
      k.acc = model.acc;
      switch (L.kind) {
        case LayerKind::Fc:
        case LayerKind::Conv2d: {
          const QuantParams px = derive_params(L.input_params, b);
          const QuantParams pw = derive_params(L.weight.params, b);
          QuantParams pdot = L.output_params;
          pdot.offset = 0.0;
          k.main = dot_constants(px, pw, pdot, L.dot_length(), model.frac_bits);
          k.bias = add_constants(pdot, L.bias.params, L.output_params, model.frac_bits);
          k.pad_code = quantize_scalar(0.0, px);
          k.pact = px.offset == 0.0;
          note(L, b, k.main);
          note(L, b, k.bias);
          break;
        }
        case LayerKind::ResidualAdd:
          k.main = add_constants(derive_params(L.input_params, b), derive_params(L.skip_params, b), L.output_params,
                                 model.frac_bits);
          note(L, b, k.main);
          break;
        case LayerKind::ReluPact:
          k.main = requant_constants(L.input_params, L.output_params, model.frac_bits);
          note(L, b, k.main);
          break;
        case LayerKind::AvgPool: {
          QuantParams psum = L.input_params;
          psum.scale = L.input_params.scale / static_cast<double>(L.pool * L.pool);
          k.main = requant_constants(psum, L.output_params, model.frac_bits);
          note(L, b, k.main);
          break;
        }
        case LayerKind::Flatten:
          break;
      }
      L.kernels[b] = k;
    }
  }
  return warnings;
}

void validate_policy(const BitPolicy& policy, const ModelGraph& model) {
  const std::size_t expected = model.policy_length();
  require(policy.bits.size() == expected, ErrorCode::Policy,
          "policy has " + std::to_string(policy.bits.size()) + " entries, model needs " + std::to_string(expected));
  for (int b : policy.bits) {
    require(std::find(model.candidates.begin(), model.candidates.end(), b) != model.candidates.end(),
            ErrorCode::Policy, "policy bit-width " + std::to_string(b) + " is not in the candidate set");
  }
}

BitPolicy uniform_policy(const ModelGraph& model, int bits) {
  return BitPolicy{std::vector<int>(model.policy_length(), bits)};
}

std::string to_string(const BitPolicy& policy) {
  std::ostringstream os;
  for (std::size_t i = 0; i < policy.bits.size(); ++i) os << (i ? "," : "") << policy.bits[i];
  return os.str();
}

std::uint64_t ExecutionTrace::shifted_elements() const {
  std::uint64_t s = 0;
  for (const auto& l : layers) s += l.shifted_elements();
  return s;
}

std::uint64_t ExecutionTrace::transition_shift_ops() const {
  std::uint64_t s = 0;
  for (const auto& e : events) {
    if (e.op == "shift_down") s += e.elements;
  }
  return s;
}

std::uint64_t ExecutionTrace::float_ops_inside_integer_window() const {
  auto first = std::find_if(events.begin(), events.end(), [](const TraceEvent& e) { return e.op == "quantize_input"; });
  auto last = std::find_if(events.rbegin(), events.rend(), [](const TraceEvent& e) { return e.op == "dequantize_output"; });
  if (first == events.end() || last == events.rend()) return 0;
  std::uint64_t n = 0;
  for (auto it = first + 1; it < last.base() - 1; ++it) {
    if (!it->integer_domain) ++n;
  }
  return n;
}

OpCounters ExecutionTrace::inner_totals() const {
  OpCounters c;
  for (const auto& l : layers) c += l.inner;
  return c;
}

namespace {

// A view of an operand at the requested bit-width; owns storage only when a
// shift actually happened.
struct Operand {
  std::vector<QValue> owned;
  std::span<const QValue> view;
};

Operand reduce(std::span<const QValue> data, int n, int b, const RunOptions& opt, std::uint64_t& shifted) {
  Operand op;
  if (b == n) {
    op.view = data;
    return op;
  }
  require(opt.transitions, ErrorCode::InvalidArgument, "bit-width transitions disabled but b < n requested");
  op.owned = shift_down(data, n, b);
  op.view = op.owned;
  shifted += data.size();
  return op;
}

void push(std::vector<TraceEvent>& ev, std::string op, std::size_t layer, std::uint64_t elems) {
  ev.push_back(TraceEvent{std::move(op), static_cast<int>(layer), true, elems});
}

void add_fixed_counts(OpCounters& c, std::uint64_t times) {
  c.mults += 2 * times;
  c.adds += 2 * times;
  c.shifts += times;
}

DotResult run_dot(const PreparedKernel& k, std::span<const QValue> x, std::span<const QValue> w) {
  return k.pact ? int_dot_pact(x, w, k.main, k.main.out, k.acc) : int_dot(x, w, k.main, k.main.out, k.acc);
}

NestedTensor run_fc(const LayerSpec& L, const NestedTensor& in, int b, LayerTrace& tr, const RunOptions& opt) {
  const int n = in.params.master_bits;
  const auto& k = L.kernel_for(b);
  const Operand x = reduce(in.data, n, b, opt, tr.input_shifted);
  const Operand w = reduce(L.weight.data, n, b, opt, tr.weight_shifted);
  NestedTensor out{std::vector<QValue>(L.out_features), L.output_params, L.output_shape};
  for (std::size_t o = 0; o < L.out_features; ++o) {
    const auto r = run_dot(k, x.view, w.view.subspan(o * L.in_features, L.in_features));
    out.data[o] = int_add_fixed(r.raw, r.frac_bits, L.bias.data[o], k.bias, L.output_params);
    tr.inner += r.inner;
    tr.epilogue += r.epilogue;
  }
  add_fixed_counts(tr.epilogue, L.out_features);
  tr.pact_kernel = k.pact;
  return out;
}

NestedTensor run_conv(const LayerSpec& L, const NestedTensor& in, int b, LayerTrace& tr, const RunOptions& opt) {
  const int n = in.params.master_bits;
  const auto& k = L.kernel_for(b);
  const Operand x = reduce(in.data, n, b, opt, tr.input_shifted);
  const Operand w = reduce(L.weight.data, n, b, opt, tr.weight_shifted);
  const std::size_t C = L.input_shape[0], H = L.input_shape[1], W = L.input_shape[2];
  const std::size_t Ho = L.output_shape[1], Wo = L.output_shape[2];
  const std::size_t K = L.kernel, len = L.dot_length();
  NestedTensor out{std::vector<QValue>(element_count(L.output_shape)), L.output_params, L.output_shape};
  std::vector<QValue> patch(len);
  for (std::size_t oy = 0; oy < Ho; ++oy) {
    for (std::size_t ox = 0; ox < Wo; ++ox) {
      // im2col for one output position, channel-major like the weights.
      std::size_t p = 0;
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t ky = 0; ky < K; ++ky) {
          for (std::size_t kx = 0; kx < K; ++kx, ++p) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * L.stride + ky) - static_cast<std::ptrdiff_t>(L.padding);
            const auto ix = static_cast<std::ptrdiff_t>(ox * L.stride + kx) - static_cast<std::ptrdiff_t>(L.padding);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(H) && ix < static_cast<std::ptrdiff_t>(W);
            patch[p] = inside ? x.view[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)] : k.pad_code;
          }
        }
      }
      for (std::size_t oc = 0; oc < L.out_channels; ++oc) {
        const auto r = run_dot(k, patch, w.view.subspan(oc * len, len));
        out.data[(oc * Ho + oy) * Wo + ox] = int_add_fixed(r.raw, r.frac_bits, L.bias.data[oc], k.bias, L.output_params);
        tr.inner += r.inner;
        tr.epilogue += r.epilogue;
      }
    }
  }
  add_fixed_counts(tr.epilogue, out.data.size());
  tr.pact_kernel = k.pact;
  return out;
}

}  // namespace

NestedTensor pact_clamp(const NestedTensor& x, double alpha) {
  require(std::isfinite(alpha) && alpha > 0.0, ErrorCode::InvalidArgument, "pact_clamp: alpha must be positive");
  require(x.params.offset == 0.0, ErrorCode::InvalidArgument, "pact_clamp: activation grid must have zero offset");
  const QValue top = quantize_scalar(alpha, x.params);
  NestedTensor out = x;
  for (auto& q : out.data) q = std::min(q, top);
  return out;
}

NestedTensor run_layer(const LayerSpec& L, const NestedTensor& input, int bits, LayerTrace* trace,
                       const NestedTensor* skip, const RunOptions& options) {
  require(L.calibrated && !L.kernels.empty(), ErrorCode::InvalidArgument,
          "layer '" + L.name + "' is not calibrated/prepared");
  require(input.params == L.input_params, ErrorCode::InvalidArgument,
          "layer '" + L.name + "': input grid does not match the calibrated input params");
  require(input.shape == L.input_shape, ErrorCode::Shape, "layer '" + L.name + "': input shape mismatch");
  require((skip != nullptr) == (L.kind == LayerKind::ResidualAdd), ErrorCode::InvalidArgument,
          "layer '" + L.name + "': skip operand given to a non-residual layer or missing");
  const int n = input.params.master_bits;
  if (!takes_policy(L.kind)) bits = n;
  require(bits >= kMinBits && bits <= n, ErrorCode::Policy,
          "layer '" + L.name + "': bit-width " + std::to_string(bits) + " outside [2, n]");

  LayerTrace local;
  LayerTrace& tr = trace ? *trace : local;
  tr.kind = L.kind;
  tr.bits = bits;
  tr.macs = L.macs();

  switch (L.kind) {
    case LayerKind::Fc: return run_fc(L, input, bits, tr, options);
    case LayerKind::Conv2d: return run_conv(L, input, bits, tr, options);
    case LayerKind::ResidualAdd: {
      require(skip->params == L.skip_params && skip->shape == L.input_shape, ErrorCode::Shape,
              "layer '" + L.name + "': skip operand grid or shape mismatch");
      const auto& k = L.kernel_for(bits);
      std::uint64_t skip_shifted = 0;
      const Operand a = reduce(input.data, n, bits, options, tr.input_shifted);
      const Operand s = reduce(skip->data, n, bits, options, skip_shifted);
      tr.input_shifted += skip_shifted;
      NestedTensor out{std::vector<QValue>(a.view.size()), L.output_params, L.output_shape};
      for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = int_add(a.view[i], s.view[i], k.main, L.output_params);
      tr.epilogue.mults += 2 * out.data.size();
      tr.epilogue.adds += 2 * out.data.size();
      tr.epilogue.shifts += out.data.size();
      return out;
    }
    case LayerKind::ReluPact: {
      const auto& k = L.kernel_for(n);
      NestedTensor regrid{std::vector<QValue>(input.data.size()), L.output_params, L.output_shape};
      for (std::size_t i = 0; i < input.data.size(); ++i) regrid.data[i] = int_add(input.data[i], 0, k.main, L.output_params);
      tr.epilogue.mults += input.data.size();
      tr.epilogue.adds += input.data.size();
      tr.epilogue.shifts += input.data.size();
      return pact_clamp(regrid, L.alpha);
    }
    case LayerKind::AvgPool: {
      const auto& k = L.kernel_for(n);
      const std::size_t C = L.input_shape[0], H = L.input_shape[1], W = L.input_shape[2], P = L.pool;
      const std::size_t Ho = H / P, Wo = W / P;
      NestedTensor out{std::vector<QValue>(C * Ho * Wo), L.output_params, L.output_shape};
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t oy = 0; oy < Ho; ++oy) {
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            std::int64_t sum = 0;
            for (std::size_t y = 0; y < P; ++y) {
              for (std::size_t x = 0; x < P; ++x) sum += input.data[(c * H + oy * P + y) * W + ox * P + x];
            }
            out.data[(c * Ho + oy) * Wo + ox] = int_add(sum, 0, k.main, L.output_params);
          }
        }
      }
      tr.epilogue.adds += input.data.size();
      return out;
    }
    case LayerKind::Flatten: {
      NestedTensor out = input;
      out.shape = L.output_shape;
      return out;
    }
  }
  fail(ErrorCode::Internal, "unhandled layer kind");
}

ForwardResult forward(const ModelGraph& model, std::span<const double> input, const BitPolicy& policy,
                      const RunOptions& options) {
  require(model.calibrated, ErrorCode::InvalidArgument, "forward: model is not calibrated");
  validate_policy(policy, model);
  require(input.size() == model.input_size(), ErrorCode::Shape,
          "forward: input has " + std::to_string(input.size()) + " elements, model expects " +
              std::to_string(model.input_size()));
  ForwardResult res;
  auto& ev = res.trace.events;
  ev.push_back(TraceEvent{"quantize_input", -1, false, input.size()});
  const NestedTensor x0 = quantize_master(input, model.input_params, model.input_shape);

  std::vector<NestedTensor> outputs;
  outputs.reserve(model.layers.size());
  std::size_t next_policy = 0;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& L = model.layers[i];
    const NestedTensor& in = i == 0 ? x0 : outputs.back();
    const NestedTensor* skip = nullptr;
    if (L.kind == LayerKind::ResidualAdd) skip = L.skip_from < 0 ? &x0 : &outputs[static_cast<std::size_t>(L.skip_from)];
    const int bits = takes_policy(L.kind) ? policy.bits[next_policy++] : model.master_bits;
    LayerTrace lt;
    lt.layer = i;
    outputs.push_back(run_layer(L, in, bits, &lt, skip, options));
    if (lt.shifted_elements() > 0) push(ev, "shift_down", i, lt.shifted_elements());
    push(ev, to_string(L.kind), i, outputs.back().size());
    res.trace.layers.push_back(lt);
  }
  res.output_codes = outputs.empty() ? x0 : outputs.back();
  res.output = dequantize(res.output_codes.data, res.output_codes.params);
  ev.push_back(TraceEvent{"dequantize_output", -1, false, res.output.size()});
  return res;
}

std::vector<std::vector<double>> float_forward_all(const ModelGraph& model, std::span<const double> input,
                                                   bool clamp_alpha) {
  require(input.size() == model.input_size(), ErrorCode::Shape, "float_forward: input size mismatch");
  std::vector<std::vector<double>> outs;
  const std::vector<double> x0(input.begin(), input.end());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& L = model.layers[i];
    const std::vector<double>& x = i == 0 ? x0 : outs.back();
    std::vector<double> y;
    switch (L.kind) {
      case LayerKind::Fc: {
        y.assign(L.out_features, 0.0);
        for (std::size_t o = 0; o < L.out_features; ++o) {
          double acc = L.bias_f.empty() ? 0.0 : L.bias_f[o];
          for (std::size_t j = 0; j < L.in_features; ++j) acc += L.weight_f[o * L.in_features + j] * x[j];
          y[o] = acc;
        }
        break;
      }
      case LayerKind::Conv2d: {
        const std::size_t C = L.input_shape[0], H = L.input_shape[1], W = L.input_shape[2];
        const std::size_t Ho = L.output_shape[1], Wo = L.output_shape[2], K = L.kernel;
        y.assign(element_count(L.output_shape), 0.0);
        for (std::size_t oc = 0; oc < L.out_channels; ++oc) {
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              double acc = L.bias_f.empty() ? 0.0 : L.bias_f[oc];
              for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t ky = 0; ky < K; ++ky) {
                  for (std::size_t kx = 0; kx < K; ++kx) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * L.stride + ky) - static_cast<std::ptrdiff_t>(L.padding);
                    const auto ix = static_cast<std::ptrdiff_t>(ox * L.stride + kx) - static_cast<std::ptrdiff_t>(L.padding);
                    if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(H) || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                    acc += L.weight_f[((oc * C + c) * K + ky) * K + kx] *
                           x[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)];
                  }
                }
              }
              y[(oc * Ho + oy) * Wo + ox] = acc;
            }
          }
        }
        break;
      }
      case LayerKind::ReluPact:
        y = x;
        for (auto& v : y) {
          v = std::max(v, 0.0);
          if (clamp_alpha && L.alpha > 0.0) v = std::min(v, L.alpha);
        }
        break;
      case LayerKind::ResidualAdd: {
        const auto& s = L.skip_from < 0 ? x0 : outs[static_cast<std::size_t>(L.skip_from)];
        y = x;
        for (std::size_t j = 0; j < y.size(); ++j) y[j] += s[j];
        break;
      }
      case LayerKind::AvgPool: {
        const std::size_t C = L.input_shape[0], H = L.input_shape[1], W = L.input_shape[2], P = L.pool;
        const std::size_t Ho = H / P, Wo = W / P;
        y.assign(C * Ho * Wo, 0.0);
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t oy = 0; oy < Ho; ++oy) {
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              double s = 0.0;
              for (std::size_t a = 0; a < P; ++a) {
                for (std::size_t bb = 0; bb < P; ++bb) s += x[(c * H + oy * P + a) * W + ox * P + bb];
              }
              y[(c * Ho + oy) * Wo + ox] = s / static_cast<double>(P * P);
            }
          }
        }
        break;
      }
      case LayerKind::Flatten:
        y = x;
        break;
    }
    outs.push_back(std::move(y));
  }
  return outs;
}

std::vector<double> float_forward(const ModelGraph& model, std::span<const double> input, bool clamp_alpha) {
  auto all = float_forward_all(model, input, clamp_alpha);
  if (all.empty()) return std::vector<double>(input.begin(), input.end());
  return all.back();
}

LayerSpec fold_batchnorm(const LayerSpec& layer, const BatchNormParams& bn) {
  require(layer.has_weights(), ErrorCode::InvalidArgument, "fold_batchnorm: layer has no weights");
  require(!layer.weights_quantized, ErrorCode::InvalidArgument, "fold_batchnorm: fold before weight quantization");
  const std::size_t channels = layer.kind == LayerKind::Fc ? layer.out_features : layer.out_channels;
  require(bn.gamma.size() == channels && bn.beta.size() == channels && bn.mean.size() == channels &&
              bn.var.size() == channels,
          ErrorCode::Shape, "fold_batchnorm: statistics do not match the output channels");
  require(layer.weight_f.size() == layer.weight_count(), ErrorCode::Shape, "fold_batchnorm: weights missing");
  LayerSpec out = layer;
  if (out.bias_f.empty()) out.bias_f.assign(channels, 0.0);
  const std::size_t per = layer.weight_count() / channels;
  for (std::size_t c = 0; c < channels; ++c) {
    const double denom = bn.var[c] + bn.eps;
    require(denom > 0.0, ErrorCode::InvalidArgument, "fold_batchnorm: variance + eps must be positive");
    const double s = bn.gamma[c] / std::sqrt(denom);
    for (std::size_t j = 0; j < per; ++j) out.weight_f[c * per + j] *= s;
    out.bias_f[c] = (out.bias_f[c] - bn.mean[c]) * s + bn.beta[c];
  }
  return out;
}

}  // namespace nestq

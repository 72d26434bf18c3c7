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

#include "nestq/manifest.hpp"

#include "json.hpp"
#include "nestq/tensor_blob.hpp"

namespace nestq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json params_json(const QuantParams& p) {
  return json{{"scale", p.scale}, {"offset", p.offset}, {"bits", p.bits}, {"master_bits", p.master_bits}};
}

QuantParams params_from(const json& j) {
  QuantParams p;
  p.scale = j.at("scale").get<double>();
  p.offset = j.at("offset").get<double>();
  p.bits = j.at("bits").get<int>();
  p.master_bits = j.at("master_bits").get<int>();
  return p;
}

class BlobWriter {
 public:
  BlobWriter(const fs::path& manifest) : dir_(manifest.parent_path()), stem_(manifest.stem().string()) {}

  std::string put(const std::string& owner, const std::string& role, const TensorBlob& blob) {
    const std::string name = stem_ + "." + owner + "." + role + ".bin";
    write_blob(dir_ / name, blob);
    return name;
  }

 private:
  fs::path dir_;
  std::string stem_;
};

TensorBlob get_blob(const fs::path& dir, const json& ref, const Shape& expect, const std::string& what) {
  require(ref.is_string(), ErrorCode::Format, what + ": blob reference must be a string");
  const fs::path p = dir / ref.get<std::string>();
  require(fs::exists(p), ErrorCode::Io, what + ": blob '" + p.string() + "' does not exist");
  auto b = read_blob(p);
  require(b.dims == expect, ErrorCode::Shape, what + ": blob dims do not match the declared shape");
  return b;
}

Shape weight_shape(const LayerSpec& L) {
  if (L.kind == LayerKind::Fc) return {L.out_features, L.in_features};
  return {L.out_channels, L.in_channels, L.kernel, L.kernel};
}

std::size_t out_units(const LayerSpec& L) { return L.kind == LayerKind::Fc ? L.out_features : L.out_channels; }

}  // namespace

void write_manifest(const fs::path& path, const Manifest& m) {
  BlobWriter blobs(path);
  const ModelGraph& g = m.model;
  json layers = json::array();
  for (const auto& L : g.layers) {
    json j{{"name", L.name},
           {"kind", to_string(L.kind)},
           {"input_shape", L.input_shape},
           {"output_shape", L.output_shape},
           {"in_features", L.in_features},
           {"out_features", L.out_features},
           {"in_channels", L.in_channels},
           {"out_channels", L.out_channels},
           {"kernel", L.kernel},
           {"stride", L.stride},
           {"padding", L.padding},
           {"pool", L.pool},
           {"skip_from", L.skip_from},
           {"alpha", L.alpha},
           {"weights_quantized", L.weights_quantized},
           {"calibrated", L.calibrated}};
    json params{{"input", params_json(L.input_params)},
                {"skip", params_json(L.skip_params)},
                {"output", params_json(L.output_params)}};
    if (L.has_weights()) {
      j["weight_f"] = blobs.put(L.name, "weight_f", make_f32(weight_shape(L), L.weight_f));
      j["bias_f"] = blobs.put(L.name, "bias_f", make_f32(Shape{out_units(L)}, L.bias_f));
      if (L.weights_quantized) {
        j["weight_codes"] = blobs.put(L.name, "weight_codes", make_codes(L.weight.shape, L.weight.data));
        j["bias_codes"] = blobs.put(L.name, "bias_codes", make_codes(L.bias.shape, L.bias.data));
        params["weight"] = params_json(L.weight.params);
        params["bias"] = params_json(L.bias.params);
      }
    }
    j["params"] = params;
    layers.push_back(j);
  }
  json doc{{"format", "nestq-manifest"},
           {"version", kManifestVersion},
           {"input_shape", g.input_shape},
           {"layers", layers},
           {"quantization",
            {{"master_bits", g.master_bits},
             {"candidates", g.candidates},
             {"frac_bits", g.frac_bits},
             {"gamma", m.gamma},
             {"acc_working_bits", g.acc.working_bits},
             {"acc_rescale", g.acc.rescale},
             {"input_params", params_json(g.input_params)},
             {"calibrated", g.calibrated}}},
           {"provenance", {{"seed", m.provenance.seed}, {"command", m.provenance.command}}}};
  if (m.controller) {
    const auto& c = *m.controller;
    json cj{{"source", to_string(c.source)},
            {"seed", c.seed},
            {"input_len", c.input_len},
            {"feature_len", c.feature_len},
            {"hidden", c.hidden},
            {"layers", c.layers},
            {"candidates", c.candidates},
            {"fixed_bits", c.fixed_bits}};
    if (c.source != ControllerSource::Fixed) {
      cj["w1"] = blobs.put("controller", "w1", make_f32(Shape{c.hidden, c.feature_len}, c.w1));
      cj["b1"] = blobs.put("controller", "b1", make_f32(Shape{c.hidden}, c.b1));
      cj["w2"] = blobs.put("controller", "w2", make_f32(Shape{c.outputs(), c.hidden}, c.w2));
      cj["b2"] = blobs.put("controller", "b2", make_f32(Shape{c.outputs()}, c.b2));
    }
    doc["controller"] = cj;
  } else {
    doc["controller"] = nullptr;
  }
  write_file_atomic(path, doc.dump(2) + "\n");
}

Manifest read_manifest(const fs::path& path) {
  const auto bytes = read_file(path);
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, "manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  const fs::path dir = path.parent_path();
  Manifest m;
  try {
    require(doc.value("format", "") == "nestq-manifest", ErrorCode::Format, "not a nestq manifest");
    require(doc.at("version").get<int>() == kManifestVersion, ErrorCode::Format,
            "unsupported manifest version " + doc.at("version").dump());
    ModelGraph& g = m.model;
    g.input_shape = doc.at("input_shape").get<Shape>();
    const json& q = doc.at("quantization");
    g.master_bits = q.at("master_bits").get<int>();
    g.candidates = q.at("candidates").get<std::vector<int>>();
    g.frac_bits = q.at("frac_bits").get<int>();
    m.gamma = q.at("gamma").get<double>();
    g.acc.working_bits = q.at("acc_working_bits").get<int>();
    g.acc.rescale = q.at("acc_rescale").get<bool>();
    g.input_params = params_from(q.at("input_params"));
    g.calibrated = q.at("calibrated").get<bool>();
    for (const json& j : doc.at("layers")) {
      LayerSpec L;
      L.name = j.at("name").get<std::string>();
      L.kind = layer_kind_from_string(j.at("kind").get<std::string>());
      L.in_features = j.at("in_features").get<std::size_t>();
      L.out_features = j.at("out_features").get<std::size_t>();
      L.in_channels = j.at("in_channels").get<std::size_t>();
      L.out_channels = j.at("out_channels").get<std::size_t>();
      L.kernel = j.at("kernel").get<std::size_t>();
      L.stride = j.at("stride").get<std::size_t>();
      L.padding = j.at("padding").get<std::size_t>();
      L.pool = j.at("pool").get<std::size_t>();
      L.skip_from = j.at("skip_from").get<int>();
      L.alpha = j.at("alpha").get<double>();
      L.weights_quantized = j.at("weights_quantized").get<bool>();
      L.calibrated = j.at("calibrated").get<bool>();
      L.input_shape = j.at("input_shape").get<Shape>();
      L.output_shape = j.at("output_shape").get<Shape>();
      const json& p = j.at("params");
      L.input_params = params_from(p.at("input"));
      L.skip_params = params_from(p.at("skip"));
      L.output_params = params_from(p.at("output"));
      g.layers.push_back(std::move(L));
    }
    // Shapes must resolve before blob dims can be checked.
    std::vector<std::pair<Shape, Shape>> declared;
    for (const auto& L : g.layers) declared.emplace_back(L.input_shape, L.output_shape);
    resolve_shapes(g);
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
      auto& L = g.layers[i];
      const json& j = doc.at("layers")[i];
      require(declared[i].first == L.input_shape && declared[i].second == L.output_shape, ErrorCode::Shape,
              "layer '" + L.name + "': declared shapes disagree with the graph");
      if (!L.has_weights()) continue;
      const std::string what = "layer '" + L.name + "'";
      L.weight_f = blob_to_f64(get_blob(dir, j.at("weight_f"), weight_shape(L), what + " weight_f"));
      L.bias_f = blob_to_f64(get_blob(dir, j.at("bias_f"), Shape{out_units(L)}, what + " bias_f"));
      if (L.weights_quantized) {
        const json& p = j.at("params");
        L.weight.params = params_from(p.at("weight"));
        L.weight.shape = weight_shape(L);
        L.weight.data = blob_to_codes(get_blob(dir, j.at("weight_codes"), L.weight.shape, what + " weight_codes"));
        L.bias.params = params_from(p.at("bias"));
        L.bias.shape = Shape{out_units(L)};
        L.bias.data = blob_to_codes(get_blob(dir, j.at("bias_codes"), L.bias.shape, what + " bias_codes"));
        try {
          validate(L.weight);
          validate(L.bias);
        } catch (const Error& e) {
          fail(ErrorCode::Format, what + ": " + e.what());
        }
      }
    }
    const json& cj = doc.at("controller");
    if (!cj.is_null()) {
      ControllerSpec c;
      const auto src = cj.at("source").get<std::string>();
      if (src == "loaded") {
        c.source = ControllerSource::Loaded;
      } else if (src == "seeded-random") {
        c.source = ControllerSource::SeededRandom;
      } else if (src == "fixed") {
        c.source = ControllerSource::Fixed;
      } else {
        fail(ErrorCode::Format, "unknown controller source '" + src + "'");
      }
      c.seed = cj.at("seed").get<std::uint64_t>();
      c.input_len = cj.at("input_len").get<std::size_t>();
      c.feature_len = cj.at("feature_len").get<std::size_t>();
      c.hidden = cj.at("hidden").get<std::size_t>();
      c.layers = cj.at("layers").get<std::size_t>();
      c.candidates = cj.at("candidates").get<std::vector<int>>();
      c.fixed_bits = cj.at("fixed_bits").get<std::vector<int>>();
      if (c.source != ControllerSource::Fixed) {
        c.w1 = blob_to_f64(get_blob(dir, cj.at("w1"), Shape{c.hidden, c.feature_len}, "controller w1"));
        c.b1 = blob_to_f64(get_blob(dir, cj.at("b1"), Shape{c.hidden}, "controller b1"));
        c.w2 = blob_to_f64(get_blob(dir, cj.at("w2"), Shape{c.outputs(), c.hidden}, "controller w2"));
        c.b2 = blob_to_f64(get_blob(dir, cj.at("b2"), Shape{c.outputs()}, "controller b2"));
      }
      validate(c, g.master_bits);
      m.controller = std::move(c);
    }
    const json& pv = doc.at("provenance");
    m.provenance.seed = pv.at("seed").get<std::uint64_t>();
    m.provenance.command = pv.at("command").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, "manifest '" + path.string() + "' is malformed: " + e.what());
  }
  validate_candidates(m.model.candidates, m.model.master_bits);
  if (m.model.calibrated) {
    try {
      validate(m.model.input_params);
      for (const auto& L : m.model.layers) {
        validate(L.input_params);
        validate(L.output_params);
      }
    } catch (const Error& e) {
      fail(ErrorCode::Format, std::string("manifest has invalid calibrated params: ") + e.what());
    }
    prepare_kernels(m.model);
  }
  return m;
}

}  // namespace nestq

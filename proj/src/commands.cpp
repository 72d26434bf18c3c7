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

#include "nestq/commands.hpp"

#include <charconv>

#include "nestq/cost_model.hpp"
#include "nestq/tensor_blob.hpp"
#include "nestq/toy_models.hpp"

namespace nestq {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void Report::put(const std::string& key, std::string text, json value) {
  std::string ptr = "/";
  for (char c : key) {
    if (c == '.') {
      ptr += '/';
    } else if (c == '~') {
      ptr += "~0";
    } else if (c == '/') {
      ptr += "~1";
    } else {
      ptr += c;
    }
  }
  tree_[json::json_pointer(ptr)] = std::move(value);
  lines_.emplace_back(key, std::move(text));
}

void Report::set(const std::string& key, const std::string& value) { put(key, value, value); }
void Report::set(const std::string& key, std::int64_t value) { put(key, std::to_string(value), value); }
void Report::set(const std::string& key, std::uint64_t value) { put(key, std::to_string(value), value); }
void Report::set(const std::string& key, double value) { put(key, format_double(value), value); }
void Report::set(const std::string& key, bool value) { put(key, value ? "true" : "false", value); }

std::string Report::text() const {
  std::string out;
  for (const auto& [k, v] : lines_) out += k + "=" + v + "\n";
  return out;
}

void write_report(const std::filesystem::path& path, const Report& report) {
  write_file_atomic(path, report.text());
  write_file_atomic(path.string() + ".json", report.tree().dump(2) + "\n");
}

namespace {

int parse_int(std::string_view s, const std::string& what) {
  int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  require(r.ec == std::errc() && r.ptr == s.data() + s.size() && !s.empty(), ErrorCode::Policy,
          "bad " + what + " '" + std::string(s) + "'");
  return v;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join_doubles(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

}  // namespace

PolicySource parse_policy_source(std::string_view s) {
  PolicySource p;
  p.text = std::string(s);
  if (s.starts_with("static:")) {
    p.kind = PolicySourceKind::Static;
    p.bits = parse_int(s.substr(7), "static bit-width");
  } else if (s.starts_with("list:")) {
    p.kind = PolicySourceKind::List;
    std::string_view rest = s.substr(5);
    while (true) {
      const auto comma = rest.find(',');
      p.list.push_back(parse_int(rest.substr(0, comma), "policy list entry"));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  } else if (s == "controller") {
    p.kind = PolicySourceKind::Controller;
  } else if (s.starts_with("random:")) {
    p.kind = PolicySourceKind::Random;
    const auto body = s.substr(7);
    const auto r = std::from_chars(body.data(), body.data() + body.size(), p.seed);
    require(r.ec == std::errc() && r.ptr == body.data() + body.size() && !body.empty(), ErrorCode::Policy,
            "bad random policy seed '" + std::string(body) + "'");
  } else if (s == "heuristic") {
    p.kind = PolicySourceKind::Heuristic;
  } else {
    fail(ErrorCode::Policy, "unknown policy source '" + std::string(s) +
                                "' (expected static:<b>, list:<b,...>, controller, random:<seed> or heuristic)");
  }
  return p;
}

BitPolicy resolve_fixed_policy(const PolicySource& src, const ModelGraph& model) {
  BitPolicy p;
  if (src.kind == PolicySourceKind::Static) {
    p = uniform_policy(model, src.bits);
  } else if (src.kind == PolicySourceKind::List) {
    p.bits = src.list;
  } else {
    fail(ErrorCode::Policy, "policy source '" + src.text + "' depends on the input; use static:<b> or list:<...>");
  }
  validate_policy(p, model);
  return p;
}

BitPolicy resolve_policy(const PolicySource& src, const Manifest& m, std::span<const double> input) {
  const ModelGraph& g = m.model;
  BitPolicy p;
  switch (src.kind) {
    case PolicySourceKind::Static:
    case PolicySourceKind::List: return resolve_fixed_policy(src, g);
    case PolicySourceKind::Controller: {
      require(m.controller.has_value(), ErrorCode::Policy, "model manifest has no controller");
      require(m.controller->candidates == g.candidates, ErrorCode::Policy,
              "controller candidates differ from the model's candidate set");
      p = select_argmax(controller_forward(*m.controller, input), g.candidates);
      break;
    }
    case PolicySourceKind::Random: {
      const auto c = make_seeded_controller(g.input_size(), g.policy_length(), g.candidates, src.seed);
      p = select_argmax(controller_forward(c, input), g.candidates);
      break;
    }
    case PolicySourceKind::Heuristic: p = range_heuristic_policy(g, input); break;
  }
  validate_policy(p, g);
  return p;
}

Report dataset_report(std::uint64_t seed, std::size_t classes, std::size_t samples, std::size_t dims,
                      const std::filesystem::path& out_dir) {
  const Dataset d = make_synthetic_dataset(seed, classes, samples, dims);
  std::filesystem::create_directories(out_dir);
  write_blob(out_dir / "data.bin", make_f32(Shape{samples, dims}, d.features));
  write_blob(out_dir / "labels.bin", make_i32(Shape{samples}, d.labels));
  Report r;
  r.set("dataset.seed", seed);
  r.set("dataset.classes", static_cast<std::uint64_t>(classes));
  r.set("dataset.samples", static_cast<std::uint64_t>(samples));
  r.set("dataset.dims", static_cast<std::uint64_t>(dims));
  r.set("dataset.class_mean_magnitude", kClassMeanMagnitude);
  r.set("dataset.data", "data.bin");
  r.set("dataset.labels", "labels.bin");
  r.summary.push_back("wrote " + std::to_string(samples) + " samples x " + std::to_string(dims) + " dims, " +
                      std::to_string(classes) + " classes");
  return r;
}

Report calibration_report(const CalibrationResult& res, const CalibrationOptions& o) {
  Report r;
  const auto& g = res.model;
  r.set("calibrate.gamma", o.gamma);
  r.set("calibrate.passes", o.passes);
  r.set("calibrate.batch_size", static_cast<std::uint64_t>(o.batch_size));
  r.set("calibrate.alpha_percentile", o.alpha_percentile);
  r.set("calibrate.master_bits", g.master_bits);
  r.set("input.range_min", res.input_state.y_min);
  r.set("input.range_max", res.input_state.y_max);
  r.set("input.scale", g.input_params.scale);
  r.set("input.offset", g.input_params.offset);
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    const auto& L = g.layers[i];
    const std::string k = "layer." + L.name + ".";
    r.set(k + "kind", to_string(L.kind));
    r.set(k + "output_scale", L.output_params.scale);
    r.set(k + "output_offset", L.output_params.offset);
    if (L.kind == LayerKind::ReluPact) r.set(k + "alpha", L.alpha);
    if (L.has_weights()) {
      r.set(k + "weight_scale", L.weight.params.scale);
      r.set(k + "weight_offset", L.weight.params.offset);
      r.set(k + "bias_scale", L.bias.params.scale);
      r.set(k + "bias_offset", L.bias.params.offset);
    }
  }
  r.set("flags.count", static_cast<std::uint64_t>(res.flags.size()));
  for (std::size_t i = 0; i < res.flags.size(); ++i) r.set("flags.item" + std::to_string(i), res.flags[i]);
  r.set("warnings.count", static_cast<std::uint64_t>(res.warnings.size()));
  for (std::size_t i = 0; i < res.warnings.size(); ++i) r.set("warnings.item" + std::to_string(i), res.warnings[i]);
  r.summary.push_back("calibrated " + std::to_string(g.layers.size()) + " layers at " +
                      std::to_string(g.master_bits) + " bits; " + std::to_string(res.flags.size()) +
                      " degenerate range(s) widened");
  for (const auto& f : res.flags) r.summary.push_back("flag: " + f);
  for (const auto& w : res.warnings) r.summary.push_back("warning: " + w);
  return r;
}

Report infer_report(const Manifest& m, std::span<const double> inputs, std::size_t samples,
                    const std::optional<std::vector<std::int64_t>>& labels, const PolicySource& src) {
  const ModelGraph& g = m.model;
  require(g.calibrated, ErrorCode::InvalidArgument, "infer: model is not calibrated");
  const std::size_t in = g.input_size();
  require(inputs.size() == samples * in, ErrorCode::Shape, "infer: input rows do not match the model input size");
  require(!labels || labels->size() == samples, ErrorCode::Shape, "infer: label count differs from sample count");
  Report r;
  r.set("infer.samples", static_cast<std::uint64_t>(samples));
  r.set("infer.policy_source", src.text);
  r.set("infer.master_bits", g.master_bits);
  r.set("infer.candidates", join_ints(g.candidates));
  std::uint64_t hits = 0, shifted = 0, shift_ops = 0, float_ops = 0, bits_sum = 0, bits_count = 0;
  struct Row {
    std::string policy;
    std::uint64_t cls;
    std::string output;
  };
  std::vector<Row> rows;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto x = inputs.subspan(s * in, in);
    const BitPolicy p = resolve_policy(src, m, x);
    const auto res = forward(g, x, p);
    const std::size_t cls = argmax(res.output);
    if (labels && static_cast<std::int64_t>(cls) == (*labels)[s]) ++hits;
    shifted += res.trace.shifted_elements();
    shift_ops += res.trace.transition_shift_ops();
    float_ops += res.trace.float_ops_inside_integer_window();
    for (int b : p.bits) {
      bits_sum += static_cast<std::uint64_t>(b);
      ++bits_count;
    }
    rows.push_back(Row{to_string(p), cls, join_doubles(res.output)});
  }
  if (labels) r.set("infer.accuracy", samples ? static_cast<double>(hits) / static_cast<double>(samples) : 1.0);
  r.set("infer.mean_bits", bits_count ? static_cast<double>(bits_sum) / static_cast<double>(bits_count) : 0.0);
  r.set("trace.shifted_elements", shifted);
  r.set("trace.transition_shift_ops", shift_ops);
  r.set("trace.float_ops_in_integer_window", float_ops);
  for (std::size_t s = 0; s < rows.size(); ++s) {
    const std::string k = "sample." + std::to_string(s) + ".";
    r.set(k + "policy", rows[s].policy);
    r.set(k + "argmax", rows[s].cls);
    r.set(k + "output", rows[s].output);
  }
  std::string sum = "inferred " + std::to_string(samples) + " samples with policy source " + src.text;
  if (labels && samples) {
    sum += ", accuracy " + format_double(static_cast<double>(hits) / static_cast<double>(samples));
  }
  r.summary.push_back(sum);
  r.summary.push_back("elements shifted " + std::to_string(shifted) + ", float ops inside integer window " +
                      std::to_string(float_ops));
  return r;
}

Report cost_report_for(const ModelGraph& model, const BitPolicy& policy, std::string_view mode_name) {
  const auto mode = transition_mode_from_string(mode_name);
  const CostReport c = cost_report(model, policy, mode);
  Report r;
  r.set("cost.mode", to_string(mode));
  r.set("cost.policy", to_string(policy));
  r.set("cost.master_bits", c.master_bits);
  r.set("cost.bitops", c.bitops);
  for (std::size_t i = 0; i < c.layer_names.size(); ++i) {
    const std::string k = "layer." + c.layer_names[i] + ".";
    r.set(k + "macs", c.layer_macs[i]);
    r.set(k + "bits", c.layer_bits[i]);
  }
  r.set("transition.elements", c.transition_elements);
  r.set("transition.dqt_shift_ops", c.transition_shift_ops);
  r.set("transition.standard_primitives", c.transition_fp_primitives);
  r.set("transition.standard_muldiv_flops", c.transition_fp_muldiv);
  r.set("transition.primitive_ratio", std::string(c.transition_elements ? "7:1" : "0:0"));
  r.set("transition.muldiv_ratio", std::string(c.transition_elements ? "2:1" : "0:0"));
  r.set("transition.note",
        "full float cycle = 7 primitives per element; counting only mul+div gives 2 per element (1:2 shift:FLOP)");
  r.set("inloop.mults", c.inloop_mults);
  r.set("inloop.adds", c.inloop_adds);
  r.set("cycles.kind", "model estimate, not a measurement");
  r.set("cycles.dqt_low", c.dqt_cycles.low);
  r.set("cycles.dqt_high", c.dqt_cycles.high);
  r.set("cycles.standard_low", c.standard_cycles.low);
  r.set("cycles.standard_high", c.standard_cycles.high);
  r.summary.push_back("bitops " + std::to_string(c.bitops) + " under policy " + to_string(policy));
  r.summary.push_back("transition elements " + std::to_string(c.transition_elements) + ": dqt " +
                      std::to_string(c.transition_shift_ops) + " shifts vs standard " +
                      std::to_string(c.transition_fp_primitives) + " primitives");
  r.summary.push_back("cycle model: dqt [" + format_double(c.dqt_cycles.low) + ", " + format_double(c.dqt_cycles.high) +
                      "], standard [" + format_double(c.standard_cycles.low) + ", " +
                      format_double(c.standard_cycles.high) + "]");
  return r;
}

Report verify_report(const SuiteReport& s, std::uint64_t samples) {
  Report r;
  r.set("verify.suite", s.suite);
  r.set("verify.seed", s.seed);
  r.set("verify.samples_per_op", samples);
  std::uint64_t violations = 0;
  for (const auto& op : s.ops) {
    const std::string k = "op." + to_string(op.op) + ".";
    r.set(k + "cases", op.cases);
    r.set(k + "exhaustive_cases", op.exhaustive_cases);
    r.set(k + "random_cases", op.random_cases);
    r.set(k + "violations", op.violations);
    r.set(k + "degenerate_constant_cases", op.degenerate_cases);
    r.set(k + "satisfaction_rate", op.satisfaction_rate());
    r.set(k + "max_abs_error", op.max_abs_error);
    r.set(k + "max_bound", op.max_bound);
    r.set(k + "max_error_to_bound", op.max_ratio);
    r.set(k + "mean_signed_error", op.mean_signed_error);
    if (op.op == VerifyOp::Shift) r.set(k + "off_half_maxima", op.off_half_maxima);
    r.set(k + "worst_case", op.worst_case);
    for (std::size_t i = 0; i < op.violating.size(); ++i) r.set(k + "violation" + std::to_string(i), op.violating[i]);
    violations += op.violations;
    r.summary.push_back(to_string(op.op) + ": " + std::to_string(op.cases) + " cases, " +
                        std::to_string(op.violations) + " violations, max |error| " +
                        format_double(op.max_abs_error));
  }
  r.set("offset_terms.samples", s.offset_stats.samples);
  r.set("offset_terms.mean", s.offset_stats.mean);
  r.set("offset_terms.stddev", s.offset_stats.stddev);
  r.set("offset_terms.z_score", s.offset_stats.z_score);
  r.set("offset_terms.mean_abs_total_error", s.offset_stats.mean_abs_total_error);
  r.set("verify.violations", violations);
  r.set("verify.passed", s.passed());
  r.summary.push_back(std::string("suite ") + (s.passed() ? "passed" : "FAILED"));
  return r;
}

}  // namespace nestq

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

#include "nestq/nestq.h"

#include <new>
#include <string>

#include "nestq/calibration.hpp"
#include "nestq/commands.hpp"
#include "nestq/error_analysis.hpp"
#include "nestq/manifest.hpp"
#include "nestq/tensor_blob.hpp"
#include "nestq/toy_models.hpp"

struct nestq_model {
  nestq::Manifest manifest;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_summary;

nestq_status to_status(nestq::ErrorCode code) {
  switch (code) {
    case nestq::ErrorCode::InvalidArgument: return NESTQ_ERR_INVALID_ARGUMENT;
    case nestq::ErrorCode::Io: return NESTQ_ERR_IO;
    case nestq::ErrorCode::Format: return NESTQ_ERR_FORMAT;
    case nestq::ErrorCode::Shape: return NESTQ_ERR_SHAPE;
    case nestq::ErrorCode::Policy: return NESTQ_ERR_POLICY;
    case nestq::ErrorCode::Overflow: return NESTQ_ERR_OVERFLOW;
    case nestq::ErrorCode::BoundViolation: return NESTQ_ERR_BOUND_VIOLATION;
    case nestq::ErrorCode::Internal: return NESTQ_ERR_INTERNAL;
  }
  return NESTQ_ERR_INTERNAL;
}

template <class F>
nestq_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return NESTQ_OK;
  } catch (const nestq::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return NESTQ_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  nestq::require(p != nullptr, nestq::ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

void publish(const nestq::Report& r, const char* report_path) {
  if (report_path) nestq::write_report(report_path, r);
  g_last_summary.clear();
  for (const auto& line : r.summary) g_last_summary += line + "\n";
}

// Rows of a [samples, ...] f32 blob, each the size of the model input.
std::vector<double> read_rows(const char* path, std::size_t row, std::size_t& samples) {
  const auto blob = nestq::read_blob(path);
  nestq::require(blob.dtype == nestq::DType::F32, nestq::ErrorCode::Format, "input blob must be f32");
  nestq::require(!blob.dims.empty(), nestq::ErrorCode::Shape, "input blob must be [samples, ...]");
  samples = blob.dims[0];
  nestq::require(samples == 0 || blob.count() / samples == row, nestq::ErrorCode::Shape,
                 "input rows have " + std::to_string(samples ? blob.count() / samples : 0) +
                     " elements, model expects " + std::to_string(row));
  return nestq::blob_to_f64(blob);
}

}  // namespace

extern "C" {

const char* nestq_last_error(void) { return g_last_error.c_str(); }
const char* nestq_last_summary(void) { return g_last_summary.c_str(); }

const char* nestq_status_string(nestq_status status) {
  switch (status) {
    case NESTQ_OK: return "ok";
    case NESTQ_ERR_INVALID_ARGUMENT: return "invalid argument";
    case NESTQ_ERR_IO: return "i/o error";
    case NESTQ_ERR_FORMAT: return "format error";
    case NESTQ_ERR_SHAPE: return "shape mismatch";
    case NESTQ_ERR_POLICY: return "policy error";
    case NESTQ_ERR_OVERFLOW: return "overflow";
    case NESTQ_ERR_BOUND_VIOLATION: return "bound violation";
    case NESTQ_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

nestq_status nestq_model_load(const char* manifest_path, nestq_model** out) {
  return guarded([&] {
    need(manifest_path, "manifest path");
    need(out, "output handle");
    *out = nullptr;
    auto m = std::make_unique<nestq_model>();
    m->manifest = nestq::read_manifest(manifest_path);
    *out = m.release();
  });
}

nestq_status nestq_model_save(const nestq_model* model, const char* manifest_path) {
  return guarded([&] {
    need(model, "model");
    need(manifest_path, "manifest path");
    nestq::write_manifest(manifest_path, model->manifest);
  });
}

void nestq_model_free(nestq_model* model) { delete model; }

nestq_status nestq_make_toy_model(const char* kind, uint64_t seed, nestq_model** out) {
  return guarded([&] {
    need(kind, "model kind");
    need(out, "output handle");
    *out = nullptr;
    auto m = std::make_unique<nestq_model>();
    m->manifest.model = nestq::make_toy_model(kind, seed);
    m->manifest.provenance.seed = seed;
    *out = m.release();
  });
}

nestq_status nestq_model_set_provenance(nestq_model* model, uint64_t seed, const char* command) {
  return guarded([&] {
    need(model, "model");
    model->manifest.provenance.seed = seed;
    model->manifest.provenance.command = command ? command : "";
  });
}

nestq_status nestq_model_attach_controller(nestq_model* model, uint64_t seed) {
  return guarded([&] {
    need(model, "model");
    const auto& g = model->manifest.model;
    model->manifest.controller = nestq::make_seeded_controller(g.input_size(), g.policy_length(), g.candidates, seed);
  });
}

nestq_status nestq_model_quantize(nestq_model* model, int master_bits, const int* candidates,
                                  size_t candidate_count) {
  return guarded([&] {
    need(model, "model");
    auto g = model->manifest.model;
    if (candidates && candidate_count) {
      g.candidates.assign(candidates, candidates + candidate_count);
      nestq::validate_candidates(g.candidates, master_bits);
    }
    nestq::quantize_weights(g, master_bits);
    if (model->manifest.controller) {
      nestq::require(model->manifest.controller->candidates == g.candidates, nestq::ErrorCode::Policy,
                     "controller candidate set differs from the quantized model's");
    }
    model->manifest.model = std::move(g);
  });
}

nestq_status nestq_model_calibrate(nestq_model* model, const char* data_path, double gamma, int passes,
                                   size_t batch_size, const char* report_path) {
  return guarded([&] {
    need(model, "model");
    need(data_path, "data path");
    auto& m = model->manifest;
    std::size_t samples = 0;
    const auto data = read_rows(data_path, m.model.input_size(), samples);
    nestq::CalibrationOptions o;
    o.gamma = gamma;
    o.passes = passes;
    o.batch_size = batch_size;
    auto res = nestq::calibrate(m.model, data, samples, o);
    publish(nestq::calibration_report(res, o), report_path);
    m.model = std::move(res.model);
    m.gamma = gamma;
  });
}

nestq_status nestq_model_info(const nestq_model* model, size_t* input_size, size_t* output_size,
                              size_t* policy_length, int* master_bits) {
  return guarded([&] {
    need(model, "model");
    const auto& g = model->manifest.model;
    if (input_size) *input_size = g.input_size();
    if (output_size) *output_size = g.output_size();
    if (policy_length) *policy_length = g.policy_length();
    if (master_bits) *master_bits = g.master_bits;
  });
}

nestq_status nestq_model_forward(const nestq_model* model, const double* input, size_t input_size,
                                 const int* policy, size_t policy_length, double* output, size_t output_capacity) {
  return guarded([&] {
    need(model, "model");
    need(input, "input");
    need(output, "output");
    nestq::require(policy != nullptr || policy_length == 0, nestq::ErrorCode::InvalidArgument,
                   "policy must not be null");
    const auto& g = model->manifest.model;
    nestq::BitPolicy p{std::vector<int>(policy, policy + policy_length)};
    const auto res = nestq::forward(g, std::span<const double>(input, input_size), p);
    nestq::require(output_capacity >= res.output.size(), nestq::ErrorCode::Shape, "output buffer too small");
    std::copy(res.output.begin(), res.output.end(), output);
  });
}

nestq_status nestq_make_dataset(uint64_t seed, size_t classes, size_t samples, size_t dims, const char* out_dir,
                                const char* report_path) {
  return guarded([&] {
    need(out_dir, "output directory");
    publish(nestq::dataset_report(seed, classes, samples, dims, out_dir), report_path);
  });
}

nestq_status nestq_infer_report(const nestq_model* model, const char* input_path, const char* labels_path,
                                const char* policy_source, const char* report_path) {
  return guarded([&] {
    need(model, "model");
    need(input_path, "input path");
    need(policy_source, "policy source");
    const auto src = nestq::parse_policy_source(policy_source);
    const auto& m = model->manifest;
    std::size_t samples = 0;
    const auto inputs = read_rows(input_path, m.model.input_size(), samples);
    std::optional<std::vector<std::int64_t>> labels;
    if (labels_path) labels = nestq::blob_to_i64(nestq::read_blob(labels_path));
    publish(nestq::infer_report(m, inputs, samples, labels, src), report_path);
  });
}

nestq_status nestq_cost_report(const nestq_model* model, const char* policy_source, const char* mode,
                               const char* report_path) {
  return guarded([&] {
    need(model, "model");
    need(policy_source, "policy source");
    need(mode, "mode");
    const auto& g = model->manifest.model;
    const auto policy = nestq::resolve_fixed_policy(nestq::parse_policy_source(policy_source), g);
    publish(nestq::cost_report_for(g, policy, mode), report_path);
  });
}

nestq_status nestq_verify_report(const char* suite, uint64_t seed, uint64_t samples, const char* report_path) {
  return guarded([&] {
    need(suite, "suite");
    const auto rep = nestq::run_verify_suite(suite, seed, samples);
    publish(nestq::verify_report(rep, samples), report_path);
    nestq::require(rep.passed(), nestq::ErrorCode::BoundViolation,
                   "verification found bound violations (see report)");
  });
}

}  // extern "C"

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

#ifndef NESTQ_NESTQ_H_
#define NESTQ_NESTQ_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define NESTQ_API __declspec(dllexport)
#else
#define NESTQ_API __attribute__((visibility("default")))
#endif

typedef enum nestq_status {
  NESTQ_OK = 0,
  NESTQ_ERR_INVALID_ARGUMENT = 1,
  NESTQ_ERR_IO = 2,
  NESTQ_ERR_FORMAT = 3,
  NESTQ_ERR_SHAPE = 4,
  NESTQ_ERR_POLICY = 5,
  NESTQ_ERR_OVERFLOW = 6,
  NESTQ_ERR_BOUND_VIOLATION = 7,
  NESTQ_ERR_INTERNAL = 8
} nestq_status;

/* Opaque model: graph, quantization state and optional controller. */
typedef struct nestq_model nestq_model;

/* Message of the last failed call on this thread ("" if none). */
NESTQ_API const char* nestq_last_error(void);
/* Human-readable summary of the last successful report call on this thread. */
NESTQ_API const char* nestq_last_summary(void);
NESTQ_API const char* nestq_status_string(nestq_status status);

NESTQ_API nestq_status nestq_model_load(const char* manifest_path, nestq_model** out);
NESTQ_API nestq_status nestq_model_save(const nestq_model* model, const char* manifest_path);
NESTQ_API void nestq_model_free(nestq_model* model);

/* kind: "mlp" or "cnn". */
NESTQ_API nestq_status nestq_make_toy_model(const char* kind, uint64_t seed, nestq_model** out);
/* Records the creating command line in the manifest provenance. */
NESTQ_API nestq_status nestq_model_set_provenance(nestq_model* model, uint64_t seed, const char* command);
/* Attaches a seeded-random controller sized for the model. */
NESTQ_API nestq_status nestq_model_attach_controller(nestq_model* model, uint64_t seed);

NESTQ_API nestq_status nestq_model_quantize(nestq_model* model, int master_bits, const int* candidates,
                                            size_t candidate_count);
NESTQ_API nestq_status nestq_model_calibrate(nestq_model* model, const char* data_path, double gamma, int passes,
                                             size_t batch_size, const char* report_path);

NESTQ_API nestq_status nestq_model_info(const nestq_model* model, size_t* input_size, size_t* output_size,
                                        size_t* policy_length, int* master_bits);
/* One integer forward pass; policy holds policy_length bit-widths. */
NESTQ_API nestq_status nestq_model_forward(const nestq_model* model, const double* input, size_t input_size,
                                           const int* policy, size_t policy_length, double* output,
                                           size_t output_capacity);

NESTQ_API nestq_status nestq_make_dataset(uint64_t seed, size_t classes, size_t samples, size_t dims,
                                          const char* out_dir, const char* report_path);
/* labels_path may be NULL. */
NESTQ_API nestq_status nestq_infer_report(const nestq_model* model, const char* input_path, const char* labels_path,
                                          const char* policy_source, const char* report_path);
NESTQ_API nestq_status nestq_cost_report(const nestq_model* model, const char* policy_source, const char* mode,
                                         const char* report_path);
/* Writes the report even when a bound is violated; then returns
   NESTQ_ERR_BOUND_VIOLATION. */
NESTQ_API nestq_status nestq_verify_report(const char* suite, uint64_t seed, uint64_t samples,
                                           const char* report_path);

#ifdef __cplusplus
}
#endif

#endif /* NESTQ_NESTQ_H_ */

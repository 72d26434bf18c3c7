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

#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nestq/nestq.h"

namespace {

// Process exit codes; 2 is reserved for usage errors reported by the parser.
int exit_code(nestq_status s) {
  switch (s) {
    case NESTQ_OK: return 0;
    case NESTQ_ERR_INTERNAL: return 1;
    case NESTQ_ERR_IO: return 3;
    case NESTQ_ERR_FORMAT: return 4;
    case NESTQ_ERR_SHAPE: return 5;
    case NESTQ_ERR_POLICY: return 6;
    case NESTQ_ERR_BOUND_VIOLATION: return 7;
    case NESTQ_ERR_INVALID_ARGUMENT: return 8;
    case NESTQ_ERR_OVERFLOW: return 9;
  }
  return 1;
}

int report(nestq_status s) {
  if (s != NESTQ_OK) {
    std::fprintf(stderr, "error: %s: %s\n", nestq_status_string(s), nestq_last_error());
  }
  std::fputs(nestq_last_summary(), stdout);
  return exit_code(s);
}

// Explicit flag, then NESTQ_SEED, then the built-in default.
std::uint64_t resolve_seed(const CLI::Option* flag, std::uint64_t value, std::uint64_t fallback) {
  if (flag->count() > 0) return value;
  if (const char* env = std::getenv("NESTQ_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0') return v;
    throw CLI::ValidationError("NESTQ_SEED", "must be an unsigned integer");
  }
  return fallback;
}

struct Model {
  nestq_model* handle = nullptr;
  ~Model() { nestq_model_free(handle); }
};

std::vector<int> parse_candidates(const std::string& s) {
  std::vector<int> out;
  std::size_t at = 0;
  while (at <= s.size()) {
    const auto comma = s.find(',', at);
    const std::string item = s.substr(at, comma == std::string::npos ? std::string::npos : comma - at);
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--candidates", "expected comma-separated integers");
    }
    if (comma == std::string::npos) break;
    at = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  constexpr std::uint64_t kDefaultSeed = 20260101;
  std::string command_line;
  for (int i = 0; i < argc; ++i) command_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"nestq: nested-quantization integer inference toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out, model_path, data_path, labels_path, policy = "static:8", mode = "dqt", kind = "mlp";
  std::string suite = "appendix-c", report_path, candidates;
  std::size_t classes = 4, samples = 1000, dims = 16, batch = 100;
  std::uint64_t verify_samples = 100000;
  int bits = 8, passes = 1;
  double gamma = 0.9;

  auto* ds = app.add_subcommand("dataset", "write a synthetic Gaussian-blob dataset");
  auto* ds_seed = ds->add_option("--seed", seed, "RNG seed (default: NESTQ_SEED or built-in)");
  ds->add_option("--classes", classes)->check(CLI::PositiveNumber);
  ds->add_option("--samples", samples);
  ds->add_option("--dims", dims)->check(CLI::PositiveNumber);
  ds->add_option("--out", out, "output directory")->required();
  ds->add_option("--report", report_path);

  auto* toy = app.add_subcommand("toy", "build a toy model manifest");
  auto* toy_seed = toy->add_option("--seed", seed);
  toy->add_option("--kind", kind)->check(CLI::IsMember({"mlp", "cnn"}));
  toy->add_option("--out", out, "manifest path")->required();

  auto* qz = app.add_subcommand("quantize", "quantize weights at the master bit-width");
  qz->add_option("--model", model_path)->required();
  qz->add_option("--bits", bits, "master bit-width n")->check(CLI::Range(2, 16));
  qz->add_option("--candidates", candidates, "comma-separated candidate bit-widths");
  qz->add_option("--out", out)->required();

  auto* cal = app.add_subcommand("calibrate", "EMA-calibrate activation and output ranges");
  cal->add_option("--model", model_path)->required();
  cal->add_option("--data", data_path, "f32 blob [samples, ...]")->required();
  cal->add_option("--gamma", gamma)->check(CLI::Range(0.0, 1.0));
  cal->add_option("--passes", passes)->check(CLI::PositiveNumber);
  cal->add_option("--batch", batch)->check(CLI::PositiveNumber);
  cal->add_option("--out", out)->required();
  cal->add_option("--report", report_path);

  auto* inf = app.add_subcommand("infer", "integer inference under a policy source");
  inf->add_option("--model", model_path)->required();
  inf->add_option("--input", data_path)->required();
  inf->add_option("--labels", labels_path);
  inf->add_option("--policy", policy, "static:<b> | list:<b,...> | controller | random:<seed> | heuristic");
  inf->add_option("--out", out, "report path")->required();

  auto* cost = app.add_subcommand("cost", "BitOPs, transition and cycle cost report");
  cost->add_option("--model", model_path)->required();
  cost->add_option("--policy", policy, "static:<b> | list:<b,...>");
  cost->add_option("--mode", mode)->check(CLI::IsMember({"dqt", "standard"}));
  cost->add_option("--out", out, "report path")->required();

  auto* ver = app.add_subcommand("verify", "empirical bound verification suite");
  ver->add_option("--suite", suite);
  auto* ver_seed = ver->add_option("--seed", seed);
  ver->add_option("--samples", verify_samples, "random cases per operator")->check(CLI::PositiveNumber);
  ver->add_option("--out", out, "report path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (ds->parsed()) {
      const auto s = resolve_seed(ds_seed, seed, kDefaultSeed);
      const std::string rp = report_path.empty() ? out + "/dataset.report" : report_path;
      return report(nestq_make_dataset(s, classes, samples, dims, out.c_str(), rp.c_str()));
    }
    if (toy->parsed()) {
      const auto s = resolve_seed(toy_seed, seed, kDefaultSeed);
      Model m;
      nestq_status st = nestq_make_toy_model(kind.c_str(), s, &m.handle);
      if (st == NESTQ_OK) st = nestq_model_attach_controller(m.handle, s);
      if (st == NESTQ_OK) st = nestq_model_set_provenance(m.handle, s, command_line.c_str());
      if (st == NESTQ_OK) st = nestq_model_save(m.handle, out.c_str());
      if (st == NESTQ_OK) std::printf("wrote toy %s model to %s\n", kind.c_str(), out.c_str());
      return report(st);
    }
    if (ver->parsed()) {
      const auto s = resolve_seed(ver_seed, seed, kDefaultSeed);
      return report(nestq_verify_report(suite.c_str(), s, verify_samples, out.c_str()));
    }

    Model m;
    if (const nestq_status st = nestq_model_load(model_path.c_str(), &m.handle); st != NESTQ_OK) return report(st);

    if (qz->parsed()) {
      const auto cands = candidates.empty() ? std::vector<int>{} : parse_candidates(candidates);
      nestq_status st = nestq_model_quantize(m.handle, bits, cands.data(), cands.size());
      if (st == NESTQ_OK) st = nestq_model_save(m.handle, out.c_str());
      if (st == NESTQ_OK) std::printf("quantized weights at %d bits, wrote %s\n", bits, out.c_str());
      return report(st);
    }
    if (cal->parsed()) {
      const std::string rp = report_path.empty() ? out + ".calibration" : report_path;
      nestq_status st = nestq_model_calibrate(m.handle, data_path.c_str(), gamma, passes, batch, rp.c_str());
      if (st == NESTQ_OK) st = nestq_model_save(m.handle, out.c_str());
      return report(st);
    }
    if (inf->parsed()) {
      return report(nestq_infer_report(m.handle, data_path.c_str(), labels_path.empty() ? nullptr : labels_path.c_str(),
                                       policy.c_str(), out.c_str()));
    }
    if (cost->parsed()) return report(nestq_cost_report(m.handle, policy.c_str(), mode.c_str(), out.c_str()));
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}

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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nestq/calibration.hpp"
#include "nestq/controller.hpp"
#include "nestq/error_analysis.hpp"
#include "nestq/manifest.hpp"

namespace nestq {

/// Ordered key=value lines mirrored into a JSON tree (dotted keys nest).
class Report {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }
  void set(const std::string& key, double value);
  void set(const std::string& key, bool value);

  std::string text() const;
  const nlohmann::json& tree() const { return tree_; }

  /// Short human-readable lines for the terminal.
  std::vector<std::string> summary;

 private:
  void put(const std::string& key, std::string text, nlohmann::json value);

  std::vector<std::pair<std::string, std::string>> lines_;
  nlohmann::json tree_ = nlohmann::json::object();
};

/// Writes `path` (key=value) and `path`.json, each atomically.
void write_report(const std::filesystem::path& path, const Report& report);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

enum class PolicySourceKind { Static, List, Controller, Random, Heuristic };

struct PolicySource {
  PolicySourceKind kind = PolicySourceKind::Static;
  int bits = 0;
  std::vector<int> list;
  std::uint64_t seed = 0;
  std::string text;
};

/// static:<b> | list:<b1,b2,...> | controller | random:<seed> | heuristic
PolicySource parse_policy_source(std::string_view s);

/// Policy for one input row.
BitPolicy resolve_policy(const PolicySource& src, const Manifest& m, std::span<const double> input);
/// Policy that does not depend on the input (static or list only).
BitPolicy resolve_fixed_policy(const PolicySource& src, const ModelGraph& model);

Report dataset_report(std::uint64_t seed, std::size_t classes, std::size_t samples, std::size_t dims,
                      const std::filesystem::path& out_dir);
Report calibration_report(const CalibrationResult& result, const CalibrationOptions& options);
Report infer_report(const Manifest& m, std::span<const double> inputs, std::size_t samples,
                    const std::optional<std::vector<std::int64_t>>& labels, const PolicySource& src);
Report cost_report_for(const ModelGraph& model, const BitPolicy& policy, std::string_view mode);
Report verify_report(const SuiteReport& suite, std::uint64_t samples);

}  // namespace nestq

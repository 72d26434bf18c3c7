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

#include "nestq/controller.hpp"
#include "nestq/layer_engine.hpp"

namespace nestq {

inline constexpr int kManifestVersion = 1;

struct Provenance {
  std::uint64_t seed = 0;
  std::string command;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// A model on disk: one JSON document plus tensor blobs stored next to it.
struct Manifest {
  ModelGraph model;
  double gamma = 0.9;
  std::optional<ControllerSpec> controller;
  Provenance provenance;
};

/// Blobs are written as "<stem>.<layer>.<role>.bin" beside the manifest.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Parses, checks every blob against its declared shape, re-resolves shapes
/// and rebuilds kernels for calibrated models.
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace nestq

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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nestq/quant_core.hpp"

namespace nestq {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

enum class DType : std::uint8_t { F32 = 1, U8 = 2, U16 = 3, I32 = 4, I64 = 5 };

std::size_t dtype_size(DType t);
std::string to_string(DType t);

/// Binary tensor: "NQT1", u8 dtype, u8 rank, u16 reserved (0), u64 dims[rank],
/// u64 element count, then the little-endian row-major payload.
struct TensorBlob {
  DType dtype = DType::F32;
  Shape dims;
  std::vector<std::uint8_t> payload;

  std::size_t count() const { return element_count(dims); }
  friend bool operator==(const TensorBlob&, const TensorBlob&) = default;
};

inline constexpr char kBlobMagic[4] = {'N', 'Q', 'T', '1'};

std::vector<std::uint8_t> encode_blob(const TensorBlob& blob);
TensorBlob decode_blob(std::span<const std::uint8_t> bytes);

void write_blob(const std::filesystem::path& path, const TensorBlob& blob);
TensorBlob read_blob(const std::filesystem::path& path);

/// f32 storage; values must already be representable as float.
TensorBlob make_f32(const Shape& dims, std::span<const double> values);
/// Codes go to u8 when every value fits, else u16.
TensorBlob make_codes(const Shape& dims, std::span<const QValue> values);
TensorBlob make_i32(const Shape& dims, std::span<const std::int32_t> values);
TensorBlob make_i64(const Shape& dims, std::span<const std::int64_t> values);

std::vector<double> blob_to_f64(const TensorBlob& blob);
std::vector<QValue> blob_to_codes(const TensorBlob& blob);
std::vector<std::int64_t> blob_to_i64(const TensorBlob& blob);

/// Rounds every element to the nearest float.
void round_to_f32(std::vector<double>& v);

}  // namespace nestq

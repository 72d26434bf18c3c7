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

#include "nestq/tensor_blob.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <unistd.h>

namespace nestq {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::Io, "cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(!in.bad(), ErrorCode::Io, "read error on '" + path.string() + "'");
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  const auto tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::Io, "cannot open '" + tmp + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    require(out.good(), ErrorCode::Io, "write error on '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::Io, "cannot move output into place at '" + path.string() + "'");
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::F32: return 4;
    case DType::U8: return 1;
    case DType::U16: return 2;
    case DType::I32: return 4;
    case DType::I64: return 8;
  }
  fail(ErrorCode::Format, "unknown dtype");
}

std::string to_string(DType t) {
  switch (t) {
    case DType::F32: return "f32";
    case DType::U8: return "u8";
    case DType::U16: return "u16";
    case DType::I32: return "i32";
    case DType::I64: return "i64";
  }
  return "unknown";
}

namespace {

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[at + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

bool valid_dtype(std::uint8_t t) { return t >= 1 && t <= 5; }

TensorBlob make(DType t, const Shape& dims, std::size_t n) {
  require(element_count(dims) == n, ErrorCode::Shape, "blob dims do not match the element count");
  TensorBlob b;
  b.dtype = t;
  b.dims = dims;
  b.payload.reserve(n * dtype_size(t));
  return b;
}

}  // namespace

std::vector<std::uint8_t> encode_blob(const TensorBlob& blob) {
  require(blob.dims.size() <= 255, ErrorCode::Format, "blob rank exceeds 255");
  require(blob.payload.size() == blob.count() * dtype_size(blob.dtype), ErrorCode::Format,
          "blob payload length does not match its header");
  std::vector<std::uint8_t> out(kBlobMagic, kBlobMagic + 4);
  out.push_back(static_cast<std::uint8_t>(blob.dtype));
  out.push_back(static_cast<std::uint8_t>(blob.dims.size()));
  put_le(out, 0, 2);
  for (auto d : blob.dims) put_le(out, d, 8);
  put_le(out, blob.count(), 8);
  out.insert(out.end(), blob.payload.begin(), blob.payload.end());
  return out;
}

TensorBlob decode_blob(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 16 && std::memcmp(bytes.data(), kBlobMagic, 4) == 0, ErrorCode::Format,
          "not a tensor blob (bad magic)");
  require(valid_dtype(bytes[4]), ErrorCode::Format, "tensor blob has an unknown dtype");
  TensorBlob b;
  b.dtype = static_cast<DType>(bytes[4]);
  const std::size_t rank = bytes[5];
  require(get_le(bytes, 6, 2) == 0, ErrorCode::Format, "tensor blob reserved field is not zero");
  const std::size_t header = 8 + 8 * rank + 8;
  require(bytes.size() >= header, ErrorCode::Format, "tensor blob header truncated");
  for (std::size_t i = 0; i < rank; ++i) b.dims.push_back(get_le(bytes, 8 + 8 * i, 8));
  const std::uint64_t count = get_le(bytes, 8 + 8 * rank, 8);
  require(count == b.count(), ErrorCode::Format, "tensor blob element count disagrees with its dims");
  require(bytes.size() - header == count * dtype_size(b.dtype), ErrorCode::Format,
          "tensor blob payload length does not match its header");
  b.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return b;
}

void write_blob(const std::filesystem::path& path, const TensorBlob& blob) {
  const auto bytes = encode_blob(blob);
  write_file_atomic(path, bytes);
}

TensorBlob read_blob(const std::filesystem::path& path) { return decode_blob(read_file(path)); }

TensorBlob make_f32(const Shape& dims, std::span<const double> values) {
  auto b = make(DType::F32, dims, values.size());
  for (double v : values) {
    const auto f = static_cast<float>(v);
    require(static_cast<double>(f) == v || std::isnan(v), ErrorCode::Format, "value is not representable as f32");
    put_le(b.payload, std::bit_cast<std::uint32_t>(f), 4);
  }
  return b;
}

TensorBlob make_codes(const Shape& dims, std::span<const QValue> values) {
  const bool narrow = std::all_of(values.begin(), values.end(), [](QValue q) { return q <= 255; });
  auto b = make(narrow ? DType::U8 : DType::U16, dims, values.size());
  for (QValue q : values) put_le(b.payload, q, narrow ? 1 : 2);
  return b;
}

TensorBlob make_i32(const Shape& dims, std::span<const std::int32_t> values) {
  auto b = make(DType::I32, dims, values.size());
  for (auto v : values) put_le(b.payload, static_cast<std::uint32_t>(v), 4);
  return b;
}

TensorBlob make_i64(const Shape& dims, std::span<const std::int64_t> values) {
  auto b = make(DType::I64, dims, values.size());
  for (auto v : values) put_le(b.payload, static_cast<std::uint64_t>(v), 8);
  return b;
}

namespace {

template <class F>
void each_element(const TensorBlob& b, F&& f) {
  const std::size_t w = dtype_size(b.dtype);
  require(b.payload.size() == b.count() * w, ErrorCode::Format, "blob payload length does not match its header");
  for (std::size_t i = 0; i < b.count(); ++i) f(get_le(b.payload, i * w, static_cast<int>(w)));
}

}  // namespace

std::vector<double> blob_to_f64(const TensorBlob& b) {
  std::vector<double> out;
  out.reserve(b.count());
  each_element(b, [&](std::uint64_t raw) {
    switch (b.dtype) {
      case DType::F32: out.push_back(std::bit_cast<float>(static_cast<std::uint32_t>(raw))); break;
      case DType::U8:
      case DType::U16: out.push_back(static_cast<double>(raw)); break;
      case DType::I32: out.push_back(static_cast<std::int32_t>(static_cast<std::uint32_t>(raw))); break;
      case DType::I64: out.push_back(static_cast<double>(static_cast<std::int64_t>(raw))); break;
    }
  });
  return out;
}

std::vector<QValue> blob_to_codes(const TensorBlob& b) {
  require(b.dtype == DType::U8 || b.dtype == DType::U16, ErrorCode::Format, "expected a u8/u16 code blob");
  std::vector<QValue> out;
  out.reserve(b.count());
  each_element(b, [&](std::uint64_t raw) { out.push_back(static_cast<QValue>(raw)); });
  return out;
}

std::vector<std::int64_t> blob_to_i64(const TensorBlob& b) {
  require(b.dtype != DType::F32, ErrorCode::Format, "expected an integer blob");
  std::vector<std::int64_t> out;
  out.reserve(b.count());
  each_element(b, [&](std::uint64_t raw) {
    if (b.dtype == DType::I32) {
      out.push_back(static_cast<std::int32_t>(static_cast<std::uint32_t>(raw)));
    } else {
      out.push_back(static_cast<std::int64_t>(raw));
    }
  });
  return out;
}

void round_to_f32(std::vector<double>& v) {
  for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
}

}  // namespace nestq

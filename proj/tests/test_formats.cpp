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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "nestq/manifest.hpp"
#include "nestq/tensor_blob.hpp"
#include "support/fixtures.hpp"

using namespace nestq;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("nestq_formats_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

}  // namespace

TEST_CASE("blob header layout") {
  const std::vector<QValue> v{1, 2, 3, 250, 0, 7};
  const auto b = make_codes({2, 3}, v);
  CHECK(b.dtype == DType::U8);
  const auto bytes = encode_blob(b);
  REQUIRE(bytes.size() == 8 + 2 * 8 + 8 + 6);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "NQT1");
  CHECK(bytes[4] == 2);
  CHECK(bytes[5] == 2);
  CHECK(bytes[6] == 0);
  CHECK(bytes[7] == 0);
  CHECK(bytes[8] == 2);
  CHECK(bytes[16] == 3);
  CHECK(bytes[24] == 6);
  CHECK(bytes[32] == 1);
  CHECK(bytes[35] == 250);
}

TEST_CASE("blob round trips for every dtype") {
  const std::vector<double> f{0.5, -1.25, 3.0};
  const std::vector<QValue> small{0, 255}, wide{0, 256, 65535};
  const std::vector<std::int32_t> i32{-5, 7, 1 << 30};
  const std::vector<std::int64_t> i64{-(std::int64_t{1} << 40), 3};
  for (const auto& b : {make_f32({3}, f), make_codes({2}, small), make_codes({3}, wide), make_i32({3}, i32),
                        make_i64({2, 1}, i64)}) {
    CHECK(decode_blob(encode_blob(b)) == b);
  }
  CHECK(make_codes({3}, wide).dtype == DType::U16);
  CHECK(blob_to_f64(make_f32({3}, f)) == f);
  CHECK(blob_to_codes(make_codes({3}, wide)) == wide);
  CHECK(blob_to_i64(make_i32({3}, i32)) == std::vector<std::int64_t>{-5, 7, 1 << 30});
  const auto empty = make_f32({0, 16}, std::vector<double>{});
  CHECK(decode_blob(encode_blob(empty)) == empty);
}

TEST_CASE("malformed blobs are rejected") {
  const std::vector<double> f{0.5, 1.5};
  auto bytes = encode_blob(make_f32({2}, f));
  auto bad = bytes;
  bad[0] = 'X';
  CHECK(code_of([&] { decode_blob(bad); }) == ErrorCode::Format);
  bad = bytes;
  bad[4] = 9;
  CHECK(code_of([&] { decode_blob(bad); }) == ErrorCode::Format);
  bad = bytes;
  bad.pop_back();
  CHECK(code_of([&] { decode_blob(bad); }) == ErrorCode::Format);
  bad = bytes;
  bad[16] = 3;
  CHECK(code_of([&] { decode_blob(bad); }) == ErrorCode::Format);
  const std::vector<double> third{0.1};
  CHECK(code_of([&] { make_f32({1}, third); }) == ErrorCode::Format);
  CHECK(code_of([&] { blob_to_codes(make_f32({2}, f)); }) == ErrorCode::Format);
  CHECK(code_of([] { read_blob("/nonexistent/nestq.bin"); }) == ErrorCode::Io);
}

TEST_CASE("synthetic data is deterministic and separable") {
  const auto a = make_synthetic_dataset(3, 4, 500, 16);
  const auto b = make_synthetic_dataset(3, 4, 500, 16);
  const auto c = make_synthetic_dataset(4, 4, 500, 16);
  CHECK(encode_blob(make_f32({500, 16}, a.features)) == encode_blob(make_f32({500, 16}, b.features)));
  CHECK(a.features != c.features);
  CHECK(a.labels[5] == 1);
  const auto none = make_synthetic_dataset(3, 4, 0, 16);
  CHECK(none.features.empty());
  CHECK(decode_blob(encode_blob(make_f32({0, 16}, none.features))).count() == 0);

  const auto m = fixture::mlp();
  CHECK(float_accuracy(make_toy_model("mlp", fixture::kSeed), m.data) > 0.95);
}

TEST_CASE("manifest round trip") {
  TempDir dir;
  auto c = fixture::mlp();
  Manifest man;
  man.model = c.model;
  man.gamma = 0.8;
  man.controller = make_seeded_controller(16, 3, c.model.candidates, 5);
  man.provenance = {42, "toy --kind mlp"};
  const auto path = dir.path / "m.json";
  write_manifest(path, man);
  CHECK(fs::exists(dir.path / "m.fc1.weight_codes.bin"));
  const auto back = read_manifest(path);

  CHECK(back.gamma == 0.8);
  CHECK(back.provenance == man.provenance);
  REQUIRE(back.controller.has_value());
  CHECK(back.controller->w1 == man.controller->w1);
  CHECK(back.controller->b2 == man.controller->b2);
  CHECK(back.controller->seed == 5);
  const auto& a = man.model;
  const auto& b = back.model;
  CHECK(b.input_shape == a.input_shape);
  CHECK(b.input_params == a.input_params);
  CHECK(b.master_bits == a.master_bits);
  CHECK(b.candidates == a.candidates);
  CHECK(b.frac_bits == a.frac_bits);
  CHECK(b.calibrated == a.calibrated);
  REQUIRE(b.layers.size() == a.layers.size());
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& x = a.layers[i];
    const auto& y = b.layers[i];
    CHECK(y.name == x.name);
    CHECK(y.kind == x.kind);
    CHECK(y.input_shape == x.input_shape);
    CHECK(y.output_shape == x.output_shape);
    CHECK(y.input_params == x.input_params);
    CHECK(y.output_params == x.output_params);
    CHECK(y.alpha == x.alpha);
    CHECK(y.weight_f == x.weight_f);
    CHECK(y.bias_f == x.bias_f);
    CHECK(y.weight.data == x.weight.data);
    CHECK(y.weight.params == x.weight.params);
    CHECK(y.bias.data == x.bias.data);
  }
  for (std::size_t s = 0; s < 20; ++s) {
    const BitPolicy p{{8, 4, 6}};
    CHECK(forward(a, c.data.row(s), p).output == forward(b, c.data.row(s), p).output);
  }

  write_manifest(dir.path / "n.json", back);
  const auto again = read_manifest(dir.path / "n.json");
  CHECK(again.model.layers[0].weight.data == a.layers[0].weight.data);
}

TEST_CASE("manifest errors") {
  TempDir dir;
  auto c = fixture::cnn();
  Manifest man;
  man.model = c.model;
  const auto path = dir.path / "c.json";
  write_manifest(path, man);
  CHECK_NOTHROW(read_manifest(path));

  CHECK(code_of([&] { read_manifest(dir.path / "missing.json"); }) == ErrorCode::Io);

  std::ofstream(dir.path / "junk.json") << "{ not json";
  CHECK(code_of([&] { read_manifest(dir.path / "junk.json"); }) == ErrorCode::Format);

  std::string text;
  {
    std::ifstream in(path);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto edit = [&](const std::string& from, const std::string& to) {
    std::string t = text;
    const auto pos = t.find(from);
    REQUIRE(pos != std::string::npos);
    t.replace(pos, from.size(), to);
    std::ofstream(path, std::ios::trunc) << t;
  };
  edit("\"version\": 1", "\"version\": 99");
  CHECK(code_of([&] { read_manifest(path); }) == ErrorCode::Format);

  std::ofstream(path, std::ios::trunc) << text;
  const auto blob = dir.path / "c.conv1.weight_f.bin";
  REQUIRE(fs::exists(blob));
  const std::vector<double> w(5, 0.0);
  write_blob(blob, make_f32({5}, w));
  CHECK(code_of([&] { read_manifest(path); }) == ErrorCode::Shape);
  fs::remove(blob);
  CHECK(code_of([&] { read_manifest(path); }) == ErrorCode::Io);
}

TEST_CASE("atomic writes leave no temp files") {
  TempDir dir;
  write_file_atomic(dir.path / "a.txt", std::string_view("hello"));
  write_file_atomic(dir.path / "a.txt", std::string_view("world"));
  const auto bytes = read_file(dir.path / "a.txt");
  CHECK(std::string(bytes.begin(), bytes.end()) == "world");
  CHECK(std::distance(fs::directory_iterator(dir.path), fs::directory_iterator()) == 1);
}

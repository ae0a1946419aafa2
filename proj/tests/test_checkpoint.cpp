/*
 * Copyright (c) 2026, the spheredepth authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sphdepth/checkpoint.hpp"
#include "sphdepth/error.hpp"

namespace sphdepth {
namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.nsides = {1, 2, 4};
  c.channels = {8, 8, 8};
  c.heads = 2;
  c.ffn_expansion = 2;
  c.encoder_stem = 4;
  c.gsa_offset = 1;
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("sphdepth_ckpt_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

TEST(Tensors, RoundTripThroughFloat) {
  Matrix a(2, 3);
  Matrix b(1, 4);
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = 0.25 * i - 1.0;
  for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] = 1.0 / 3.0 + i;
  std::stringstream buf;
  write_tensors(buf, {{"a", &a}, {"b", &b}});
  EXPECT_EQ(buf.str().substr(0, 8), "SPHNN001");
  Matrix a2(2, 3);
  Matrix b2(1, 4);
  read_tensors(buf, {{"b", &b2}, {"a", &a2}});
  EXPECT_EQ(a2, a);
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_EQ(b2.data()[i], static_cast<double>(static_cast<float>(b.data()[i])));
  }
}

TEST(Tensors, MismatchesAreErrors) {
  Matrix a(2, 3);
  std::stringstream buf;
  write_tensors(buf, {{"a", &a}});
  const std::string bytes = buf.str();
  Matrix wrong_shape(3, 2);
  std::stringstream s1(bytes);
  EXPECT_THROW(read_tensors(s1, {{"a", &wrong_shape}}), IoError);
  Matrix other(2, 3);
  std::stringstream s2(bytes);
  EXPECT_THROW(read_tensors(s2, {{"z", &other}}), IoError);
  std::stringstream s3(bytes);
  EXPECT_THROW(read_tensors(s3, {{"a", &other}, {"z", &other}}), IoError);
  std::stringstream s4(bytes.substr(0, bytes.size() - 4));
  EXPECT_THROW(read_tensors(s4, {{"a", &other}}), IoError);
  std::stringstream s5("SPHNN999");
  EXPECT_THROW(read_tensors(s5, {{"a", &other}}), IoError);
}

TEST(Checkpoint, SaveLoadRestoresModel) {
  const auto dir = temp_dir("roundtrip");
  const ModelConfig c = small_config();
  ModelParams p = init_model(c, 3);
  save_checkpoint(dir / "m.bin", c, p);
  EXPECT_TRUE(std::filesystem::exists(sidecar_path(dir / "m.bin")));
  Checkpoint ck = load_checkpoint(dir / "m.bin");
  EXPECT_EQ(ck.config.to_json(), c.to_json());
  auto want = collect_params(p);
  auto got = collect_params(ck.params);
  ASSERT_EQ(want.size(), got.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(want[i].name, got[i].name);
    for (std::size_t k = 0; k < want[i].matrix->size(); ++k) {
      EXPECT_EQ(got[i].matrix->data()[k], static_cast<double>(static_cast<float>(want[i].matrix->data()[k])));
    }
  }
  EXPECT_EQ(load_model_config(sidecar_path(dir / "m.bin")).to_json(), c.to_json());
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, ConfigMismatchIsRejected) {
  const auto dir = temp_dir("mismatch");
  const ModelConfig c = small_config();
  save_checkpoint(dir / "m.bin", c, init_model(c, 1));
  ModelConfig wider = c;
  wider.channels = {16, 16, 16};
  std::ofstream(sidecar_path(dir / "m.bin")) << "{\"model\": " << wider.to_json() << "}";
  EXPECT_THROW(load_checkpoint(dir / "m.bin"), IoError);
  EXPECT_THROW(load_checkpoint(dir / "missing.bin"), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace sphdepth

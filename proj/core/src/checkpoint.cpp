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

#include "sphdepth/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "sphdepth/binary_io.hpp"
#include "sphdepth/error.hpp"

namespace sphdepth {
namespace {

constexpr std::string_view kMagic = "SPHNN001";

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void write_tensors(std::ostream& out, const std::vector<NamedMatrix>& tensors) {
  io::write_magic(out, kMagic);
  io::write_u32(out, kCheckpointVersion);
  io::write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    io::write_u32(out, static_cast<std::uint32_t>(t.name.size()));
    io::write_bytes(out, t.name.data(), t.name.size());
    io::write_u32(out, static_cast<std::uint32_t>(t.matrix->rows()));
    io::write_u32(out, static_cast<std::uint32_t>(t.matrix->cols()));
    io::write_u64(out, offset);
    offset += t.matrix->size();
  }
  for (const auto& t : tensors) {
    for (double v : t.matrix->values()) io::write_f32(out, static_cast<float>(v));
  }
  if (!out) throw IoError("failed to write checkpoint");
}

void read_tensors(std::istream& in, const std::vector<NamedMatrix>& tensors) {
  io::expect_magic(in, kMagic, "checkpoint");
  const auto version = io::read_u32(in);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  struct Entry {
    std::uint32_t rows;
    std::uint32_t cols;
    std::uint64_t offset;
  };
  const auto count = io::read_u32(in);
  std::map<std::string, Entry> manifest;
  std::uint64_t total = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = io::read_u32(in);
    if (len > 4096) throw IoError("corrupt checkpoint manifest");
    std::string name(len, '\0');
    io::read_bytes(in, name.data(), len);
    Entry e{};
    e.rows = io::read_u32(in);
    e.cols = io::read_u32(in);
    e.offset = io::read_u64(in);
    if (e.offset != total) throw IoError("corrupt checkpoint manifest offsets");
    total += static_cast<std::uint64_t>(e.rows) * e.cols;
    if (!manifest.emplace(name, e).second) throw IoError("duplicate tensor '" + name + "'");
  }
  std::vector<float> payload(total);
  for (float& f : payload) f = io::read_f32(in);
  if (manifest.size() != tensors.size()) {
    throw IoError("checkpoint holds " + std::to_string(manifest.size()) + " tensors, model expects " +
                  std::to_string(tensors.size()));
  }
  for (const auto& t : tensors) {
    const auto it = manifest.find(t.name);
    if (it == manifest.end()) throw IoError("checkpoint lacks tensor '" + t.name + "'");
    const Entry& e = it->second;
    if (e.rows != t.matrix->rows() || e.cols != t.matrix->cols()) {
      throw IoError("tensor '" + t.name + "' has shape " + std::to_string(e.rows) + "x" +
                    std::to_string(e.cols) + ", model expects " + std::to_string(t.matrix->rows()) +
                    "x" + std::to_string(t.matrix->cols()));
    }
    auto dst = t.matrix->values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = payload[e.offset + k];
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams& params) {
  config.validate();
  ModelParams copy = params;
  const auto tensors = collect_params(copy);
  std::ostringstream blob(std::ios::binary);
  write_tensors(blob, tensors);

  nlohmann::ordered_json side;
  side["format"] = std::string(kMagic);
  side["version"] = kCheckpointVersion;
  side["model"] = nlohmann::json::parse(config.to_json());
  side["parameters"] = parameter_count(copy);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string bytes = blob.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed to write " + path.string());
  std::ofstream js(sidecar_path(path));
  if (!js) throw IoError("cannot write " + sidecar_path(path).string());
  js << side.dump(2) << "\n";
}

ModelConfig load_model_config(const std::filesystem::path& json_path) {
  const std::string text = read_text(json_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON in " + json_path.string() + ": " + e.what());
  }
  // Accept either a bare config or a checkpoint sidecar.
  if (j.is_object() && j.contains("model")) return ModelConfig::from_json(j["model"].dump());
  return ModelConfig::from_json(text);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Checkpoint ck;
  ck.config = load_model_config(sidecar_path(path));
  ck.params = make_model_shapes(ck.config);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  read_tensors(in, collect_params(ck.params));
  return ck;
}

}  // namespace sphdepth

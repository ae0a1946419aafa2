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

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sphdepth/caf_decoder.hpp"
#include "sphdepth/sphere_nn.hpp"

namespace sphdepth {

// Binary "SPHNN001" layout, little-endian:
//   magic, u32 version, u32 tensor count,
//   per tensor: u32 name length, name bytes, u32 rows, u32 cols, u64 offset,
//   then the f32 payload (offsets count floats from the payload start).

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_tensors(std::ostream& out, const std::vector<NamedMatrix>& tensors);
/// Fills `tensors` by name. Throws IoError on unknown, missing or
/// mis-shaped entries.
void read_tensors(std::istream& in, const std::vector<NamedMatrix>& tensors);

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

/// Sidecar path holding the JSON model config: "<path>.json".
std::filesystem::path sidecar_path(const std::filesystem::path& path);

/// Writes the tensor file and its JSON sidecar.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

ModelConfig load_model_config(const std::filesystem::path& json_path);

}  // namespace sphdepth

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

#include "sphdepth/sphere_tensor.hpp"

namespace sphdepth {

/// 8-bit PNG, gray or RGB (alpha dropped). Samples are scaled to [0, 1].
ErpImage read_png(const std::filesystem::path& path);
/// Writes 1 or 3 channels, clamping samples to [0, 1].
void write_png(const std::filesystem::path& path, const ErpImage& image);

/// Portable float map: "Pf" (1 channel) or "PF" (3 channels). Rows are stored
/// bottom to top as the format requires; a negative scale marks little-endian.
ErpImage read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const ErpImage& image);

}  // namespace sphdepth

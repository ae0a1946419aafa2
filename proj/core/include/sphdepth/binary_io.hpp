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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace sphdepth::io {

// Little-endian primitive encoding shared by the grid, table and checkpoint
// file formats. Readers throw IoError on short reads.

void write_bytes(std::ostream& out, const void* data, std::size_t size);
void read_bytes(std::istream& in, void* data, std::size_t size);

void write_u8(std::ostream& out, std::uint8_t v);
void write_u32(std::ostream& out, std::uint32_t v);
void write_i32(std::ostream& out, std::int32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f32(std::ostream& out, float v);
void write_f64(std::ostream& out, double v);

std::uint8_t read_u8(std::istream& in);
std::uint32_t read_u32(std::istream& in);
std::int32_t read_i32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
float read_f32(std::istream& in);
double read_f64(std::istream& in);

/// Writes exactly magic.size() bytes.
void write_magic(std::ostream& out, std::string_view magic);
/// Throws IoError naming `what` if the next bytes are not `magic`.
void expect_magic(std::istream& in, std::string_view magic, std::string_view what);

}  // namespace sphdepth::io

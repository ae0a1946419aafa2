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

#include "sphdepth/binary_io.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "sphdepth/error.hpp"

namespace sphdepth::io {
namespace {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    return v;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    std::memcpy(&v, bytes, sizeof(T));
    return v;
  }
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  write_bytes(out, &v, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v;
  read_bytes(in, &v, sizeof(T));
  return to_little(v);
}

}  // namespace

void write_bytes(std::ostream& out, const void* data, std::size_t size) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw IoError("write failed");
}

void read_bytes(std::istream& in, void* data, std::size_t size) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in.gcount()) != size) {
    throw IoError("unexpected end of file");
  }
}

void write_u8(std::ostream& out, std::uint8_t v) { put(out, v); }
void write_u32(std::ostream& out, std::uint32_t v) { put(out, v); }
void write_i32(std::ostream& out, std::int32_t v) { put(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { put(out, v); }
void write_f32(std::ostream& out, float v) { put(out, v); }
void write_f64(std::ostream& out, double v) { put(out, v); }

std::uint8_t read_u8(std::istream& in) { return get<std::uint8_t>(in); }
std::uint32_t read_u32(std::istream& in) { return get<std::uint32_t>(in); }
std::int32_t read_i32(std::istream& in) { return get<std::int32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return get<std::uint64_t>(in); }
float read_f32(std::istream& in) { return get<float>(in); }
double read_f64(std::istream& in) { return get<double>(in); }

void write_magic(std::ostream& out, std::string_view magic) {
  write_bytes(out, magic.data(), magic.size());
}

void expect_magic(std::istream& in, std::string_view magic, std::string_view what) {
  std::string buf(magic.size(), '\0');
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != magic.size() || buf != magic) {
    throw IoError("not a " + std::string(what) + " file (bad magic)");
  }
}

}  // namespace sphdepth::io

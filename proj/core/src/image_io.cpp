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

#include "sphdepth/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sphdepth/error.hpp"

namespace sphdepth {
ErpImage read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + img.message);
  }
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  const int channels = gray ? 1 : 3;
  ErpImage out(static_cast<int>(img.width), static_cast<int>(img.height), channels);
  for (std::size_t i = 0; i < buffer.size(); ++i) out.pixels.data()[i] = buffer[i] / 255.0;
  return out;
}

void write_png(const std::filesystem::path& path, const ErpImage& image) {
  image.validate(true);
  const int channels = image.channels();
  if (channels != 1 && channels != 3) throw ShapeError("PNG output needs 1 or 3 channels");
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(image.pixels.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const double v = std::clamp(image.pixels.data()[i], 0.0, 1.0);
    buffer[i] = static_cast<png_byte>(std::lround(v * 255.0));
  }
  if (!png_image_write_to_file(&img, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

ErpImage read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in || (magic != "PF" && magic != "Pf")) throw IoError(path.string() + ": not a PFM file");
  if (width <= 0 || height <= 0 || scale == 0.0) throw IoError(path.string() + ": bad PFM header");
  in.get();  // single whitespace byte before the raster
  const int channels = magic == "PF" ? 3 : 1;
  const bool little = scale < 0.0;
  const std::size_t row_values = static_cast<std::size_t>(width) * channels;
  std::vector<float> row(row_values);
  ErpImage out(width, height, channels);
  for (int r = 0; r < height; ++r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row_values * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != row_values * sizeof(float)) {
      throw IoError(path.string() + ": truncated PFM raster");
    }
    const bool swap = little != (std::endian::native == std::endian::little);
    const int v = height - 1 - r;
    for (std::size_t k = 0; k < row_values; ++k) {
      float f = row[k];
      if (swap) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) |
               (bits >> 24);
        std::memcpy(&f, &bits, 4);
      }
      out.pixels.data()[static_cast<std::size_t>(v) * row_values + k] = f;
    }
  }
  return out;
}

void write_pfm(const std::filesystem::path& path, const ErpImage& image) {
  image.validate(true);
  const int channels = image.channels();
  if (channels != 1 && channels != 3) throw ShapeError("PFM output needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const bool little = std::endian::native == std::endian::little;
  out << (channels == 3 ? "PF" : "Pf") << '\n'
      << image.width << ' ' << image.height << '\n'
      << (little ? "-1.0" : "1.0") << '\n';
  const std::size_t row_values = static_cast<std::size_t>(image.width) * channels;
  std::vector<float> row(row_values);
  for (int v = image.height - 1; v >= 0; --v) {
    for (std::size_t k = 0; k < row_values; ++k) {
      row[k] = static_cast<float>(image.pixels.data()[static_cast<std::size_t>(v) * row_values + k]);
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row_values * sizeof(float)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace sphdepth

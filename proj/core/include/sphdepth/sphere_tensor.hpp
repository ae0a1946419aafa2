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

#include <memory>

#include "sphdepth/error.hpp"
#include "sphdepth/healpix_grid.hpp"
#include "sphdepth/matrix.hpp"

namespace sphdepth {

/// Feature map living on one grid level: npix x channels.
struct SphereTensor {
  std::shared_ptr<const SphericalGrid> grid;
  Matrix data;

  SphereTensor() = default;
  SphereTensor(std::shared_ptr<const SphericalGrid> g, Matrix d)
      : grid(std::move(g)), data(std::move(d)) {
    if (!grid) throw ShapeError("sphere tensor without grid");
    if (static_cast<std::int64_t>(data.rows()) != grid->npix()) {
      throw ShapeError("sphere tensor rows do not match grid npix");
    }
  }

  std::size_t channels() const noexcept { return data.cols(); }
};

/// Equirectangular raster. Pixel (u, v) is row v * width + u of `pixels`;
/// columns are channels. Pixel centers sit at longitude 2 pi (u + 0.5) / W and
/// colatitude pi (v + 0.5) / H.
struct ErpImage {
  int width = 0;
  int height = 0;
  Matrix pixels;

  ErpImage() = default;
  ErpImage(int w, int h, int channels, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, channels, fill) {}

  int channels() const noexcept { return static_cast<int>(pixels.cols()); }
  double& at(int u, int v, int c) {
    return pixels(static_cast<std::size_t>(v) * width + u, c);
  }
  double at(int u, int v, int c) const {
    return pixels(static_cast<std::size_t>(v) * width + u, c);
  }

  /// Throws ShapeError if pixels does not hold width*height rows, or if
  /// width != 2*height while `allow_any_aspect` is false.
  void validate(bool allow_any_aspect = false) const;
};

}  // namespace sphdepth

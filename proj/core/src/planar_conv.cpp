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

#include "sphdepth/planar_conv.hpp"

#include <algorithm>
#include <string>

#include "sphdepth/error.hpp"

namespace sphdepth {
namespace {

struct Geometry {
  int out_w;
  int out_h;
};

Geometry output_geometry(const PlanarConv& p, int w, int h) {
  if (p.stride < 1) throw InvalidParameter("planar conv stride must be positive");
  if (w % p.stride != 0 || h % p.stride != 0) {
    throw InvalidParameter("planar conv: raster " + std::to_string(w) + "x" + std::to_string(h) +
                           " not divisible by stride " + std::to_string(p.stride));
  }
  return {w / p.stride, h / p.stride};
}

// Source row in the input raster for tap (ky, kx) of output (ox, oy), or -1.
inline std::int64_t source_pixel(int ox, int oy, int kx, int ky, int stride, int w, int h) {
  const int iy = oy * stride - 1 + ky;
  if (iy < 0 || iy >= h) return -1;
  int ix = (ox * stride - 1 + kx) % w;
  if (ix < 0) ix += w;
  return static_cast<std::int64_t>(iy) * w + ix;
}

}  // namespace

ErpImage planar_conv_fwd(const PlanarConv& p, const ErpImage& x, PlanarConvCache* cache) {
  const std::size_t in = p.in_channels();
  if (static_cast<std::size_t>(x.channels()) != in) {
    throw ShapeError("planar conv: input has " + std::to_string(x.channels()) +
                     " channels, expected " + std::to_string(in));
  }
  const Geometry g = output_geometry(p, x.width, x.height);
  Matrix columns(static_cast<std::size_t>(g.out_w) * g.out_h, 9 * in);
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      double* row = columns.data() + (static_cast<std::size_t>(oy) * g.out_w + ox) * 9 * in;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const std::int64_t src = source_pixel(ox, oy, kx, ky, p.stride, x.width, x.height);
          if (src < 0) continue;
          std::copy_n(x.pixels.data() + static_cast<std::size_t>(src) * in, in,
                      row + static_cast<std::size_t>(ky * 3 + kx) * in);
        }
      }
    }
  }
  ErpImage y;
  y.width = g.out_w;
  y.height = g.out_h;
  y.pixels = matmul(columns, p.weight);
  add_row_vector(y.pixels, p.bias);
  if (cache) {
    cache->in_width = x.width;
    cache->in_height = x.height;
    cache->columns = std::move(columns);
  }
  return y;
}

ErpImage planar_conv_bwd(const PlanarConv& p, const PlanarConvCache& cache,
                         const ErpImage& grad_out, PlanarConv& grad) {
  const std::size_t in = p.in_channels();
  const Geometry g = output_geometry(p, cache.in_width, cache.in_height);
  if (grad_out.width != g.out_w || grad_out.height != g.out_h ||
      grad_out.pixels.cols() != p.out_channels()) {
    throw ShapeError("planar conv backward: gradient shape mismatch");
  }
  grad.weight += matmul_tn(cache.columns, grad_out.pixels);
  grad.bias += column_sums(grad_out.pixels);
  const Matrix dcols = matmul_nt(grad_out.pixels, p.weight);
  ErpImage dx(cache.in_width, cache.in_height, static_cast<int>(in));
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      const double* row = dcols.data() + (static_cast<std::size_t>(oy) * g.out_w + ox) * 9 * in;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const std::int64_t src =
              source_pixel(ox, oy, kx, ky, p.stride, cache.in_width, cache.in_height);
          if (src < 0) continue;
          double* d = dx.pixels.data() + static_cast<std::size_t>(src) * in;
          const double* s = row + static_cast<std::size_t>(ky * 3 + kx) * in;
          for (std::size_t c = 0; c < in; ++c) d[c] += s[c];
        }
      }
    }
  }
  return dx;
}

}  // namespace sphdepth

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

#include <string>

#include "sphdepth/matrix.hpp"
#include "sphdepth/sphere_tensor.hpp"

namespace sphdepth {

/// 3x3 convolution on an ERP raster with padding 1: columns wrap around the
/// seam, rows outside the image read zero. weight stacks the 9 taps
/// (row-major over ky, kx) of (in x out) matrices.
struct PlanarConv {
  Matrix weight;  // 9*in x out
  Matrix bias;    // 1 x out
  int stride = 1;

  PlanarConv() = default;
  PlanarConv(std::size_t in, std::size_t out, int stride_)
      : weight(9 * in, out), bias(1, out), stride(stride_) {}

  std::size_t in_channels() const noexcept { return weight.rows() / 9; }
  std::size_t out_channels() const noexcept { return weight.cols(); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "weight", weight);
    f(prefix + "bias", bias);
  }
};

struct PlanarConvCache {
  int in_width = 0;
  int in_height = 0;
  Matrix columns;  // out pixels x 9*in
};

/// Output is (W / stride) x (H / stride); both must divide exactly.
ErpImage planar_conv_fwd(const PlanarConv& p, const ErpImage& x, PlanarConvCache* cache = nullptr);
ErpImage planar_conv_bwd(const PlanarConv& p, const PlanarConvCache& cache,
                         const ErpImage& grad_out, PlanarConv& grad);

}  // namespace sphdepth

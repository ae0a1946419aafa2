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
#include <span>
#include <string>
#include <vector>

#include "sphdepth/healpix_grid.hpp"
#include "sphdepth/matrix.hpp"

// Dense kernels on (pixels x channels) matrices, each with a hand-written
// backward pass. Backward functions accumulate parameter gradients into a
// gradient object of the same type as the parameters and return the gradient
// with respect to the input.

namespace sphdepth {

/// y = x W^T + b. weight is out x in, bias is 1 x out (or empty).
struct Linear {
  Matrix weight;
  Matrix bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, bool with_bias = true)
      : weight(out, in), bias(with_bias ? Matrix(1, out) : Matrix()) {}

  std::size_t in_features() const noexcept { return weight.cols(); }
  std::size_t out_features() const noexcept { return weight.rows(); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "weight", weight);
    if (!bias.empty()) f(prefix + "bias", bias);
  }
};

Matrix linear_fwd(const Linear& p, const Matrix& x);
Matrix linear_bwd(const Linear& p, const Matrix& x, const Matrix& grad_out, Linear& grad);

inline constexpr double kLayerNormEps = 1e-5;

/// Per-row normalization across channels with affine gamma/beta (1 x C).
struct LayerNorm {
  Matrix gamma;
  Matrix beta;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t channels) : gamma(1, channels, 1.0), beta(1, channels, 0.0) {}

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "gamma", gamma);
    f(prefix + "beta", beta);
  }
};

struct LayerNormCache {
  Matrix normalized;            // (x - mean) * inv_std
  std::vector<double> inv_std;  // per row
};

Matrix layer_norm_fwd(const LayerNorm& p, const Matrix& x, LayerNormCache* cache = nullptr);
Matrix layer_norm_bwd(const LayerNorm& p, const LayerNormCache& cache, const Matrix& grad_out,
                      LayerNorm& grad);

/// Row-wise SoftMax(Q K^T * scale) V with max subtraction.
struct AttentionCache {
  Matrix probs;  // n_queries x n_keys
};

struct AttentionGrads {
  Matrix q;
  Matrix k;
  Matrix v;
};

Matrix attention_core_fwd(const Matrix& q, const Matrix& k, const Matrix& v, double scale,
                          AttentionCache* cache = nullptr);
AttentionGrads attention_core_bwd(const Matrix& q, const Matrix& k, const Matrix& v, double scale,
                                  const AttentionCache& cache, const Matrix& grad_out);

/// Splits channels into `heads` equal groups, attends each with scale
/// 1/sqrt(head_dim) and concatenates the results.
struct MultiHeadCache {
  std::vector<AttentionCache> heads;
};

Matrix multi_head_attention_fwd(const Matrix& q, const Matrix& k, const Matrix& v, int heads,
                                MultiHeadCache* cache = nullptr);
AttentionGrads multi_head_attention_bwd(const Matrix& q, const Matrix& k, const Matrix& v,
                                        int heads, const MultiHeadCache& cache,
                                        const Matrix& grad_out);

/// Neighbor convolution on a grid level: slot 0 is the pixel itself, slots
/// 1..8 follow the Compass order of the neighbor table. `weight` stacks the 9
/// (in x out) slot matrices vertically; missing neighbors contribute zero.
struct SphereConv {
  Matrix weight;  // 9*in x out
  Matrix bias;    // 1 x out

  SphereConv() = default;
  SphereConv(std::size_t in, std::size_t out) : weight(9 * in, out), bias(1, out) {}

  std::size_t in_channels() const noexcept { return weight.rows() / 9; }
  std::size_t out_channels() const noexcept { return weight.cols(); }
  /// Copy of the (in x out) matrix for slot s.
  Matrix slot(int s) const;
  void set_slot(int s, const Matrix& m);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "weight", weight);
    f(prefix + "bias", bias);
  }
};

struct SphereConvCache {
  Matrix gathered;  // npix x 9*in
};

Matrix sphere_conv_fwd(const SphereConv& p, std::span<const NeighborSlots> neighbors,
                       const Matrix& x, SphereConvCache* cache = nullptr);
Matrix sphere_conv_bwd(const SphereConv& p, std::span<const NeighborSlots> neighbors,
                       const SphereConvCache& cache, const Matrix& grad_out, SphereConv& grad);

double gelu(double x);
double gelu_derivative(double x);
Matrix gelu_fwd(const Matrix& x);
/// grad_out * gelu'(x).
Matrix gelu_bwd(const Matrix& x, const Matrix& grad_out);

/// linear -> GELU -> linear.
struct Ffn {
  Linear fc1;
  Linear fc2;

  Ffn() = default;
  Ffn(std::size_t channels, int expansion)
      : fc1(channels, channels * static_cast<std::size_t>(expansion)),
        fc2(channels * static_cast<std::size_t>(expansion), channels) {}

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    fc1.visit(prefix + "fc1.", f);
    fc2.visit(prefix + "fc2.", f);
  }
};

struct FfnCache {
  Matrix input;
  Matrix hidden_pre;
  Matrix hidden;
};

Matrix ffn_fwd(const Ffn& p, const Matrix& x, FfnCache* cache = nullptr);
Matrix ffn_bwd(const Ffn& p, const FfnCache& cache, const Matrix& grad_out, Ffn& grad);

/// Returns a copy of `params` with every visited matrix zeroed; used to
/// create gradient accumulators.
template <typename P>
P zeros_like(P params) {
  params.visit("", [](const std::string&, Matrix& m) { m.fill(0.0); });
  return params;
}

/// Flat list of (name, matrix) pointers in visit order.
struct NamedMatrix {
  std::string name;
  Matrix* matrix;
};

template <typename P>
std::vector<NamedMatrix> collect_params(P& params) {
  std::vector<NamedMatrix> out;
  params.visit("", [&](const std::string& name, Matrix& m) { out.push_back({name, &m}); });
  return out;
}

}  // namespace sphdepth

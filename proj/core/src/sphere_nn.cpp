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

#include "sphdepth/sphere_nn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sphdepth/error.hpp"

namespace sphdepth {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

Matrix linear_fwd(const Linear& p, const Matrix& x) {
  require(x.cols() == p.in_features(),
          "linear: input has " + std::to_string(x.cols()) + " channels, expected " +
              std::to_string(p.in_features()));
  Matrix y = matmul_nt(x, p.weight);
  if (!p.bias.empty()) add_row_vector(y, p.bias);
  return y;
}

Matrix linear_bwd(const Linear& p, const Matrix& x, const Matrix& grad_out, Linear& grad) {
  require(grad_out.rows() == x.rows() && grad_out.cols() == p.out_features(),
          "linear backward: gradient shape mismatch");
  grad.weight += matmul_tn(grad_out, x);
  if (!p.bias.empty()) grad.bias += column_sums(grad_out);
  return matmul(grad_out, p.weight);
}

Matrix layer_norm_fwd(const LayerNorm& p, const Matrix& x, LayerNormCache* cache) {
  const std::size_t c = x.cols();
  if (c < 2) throw InvalidParameter("layer norm needs at least 2 channels");
  require(p.gamma.cols() == c && p.beta.cols() == c, "layer norm: channel mismatch");
  Matrix y(x.rows(), c);
  Matrix normalized(x.rows(), c);
  std::vector<double> inv_std(x.rows());
  const double inv_c = 1.0 / static_cast<double>(c);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* xr = x.data() + i * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += xr[j];
    mean *= inv_c;
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var *= inv_c;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[i] = inv;
    double* nr = normalized.data() + i * c;
    double* yr = y.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) {
      nr[j] = (xr[j] - mean) * inv;
      yr[j] = nr[j] * p.gamma.data()[j] + p.beta.data()[j];
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix layer_norm_bwd(const LayerNorm& p, const LayerNormCache& cache, const Matrix& grad_out,
                      LayerNorm& grad) {
  const Matrix& xhat = cache.normalized;
  require(grad_out.same_shape(xhat), "layer norm backward: gradient shape mismatch");
  const std::size_t c = xhat.cols();
  Matrix dx(xhat.rows(), c);
  grad.beta += column_sums(grad_out);
  grad.gamma += column_sums(hadamard(grad_out, xhat));
  const double inv_c = 1.0 / static_cast<double>(c);
  std::vector<double> dxhat(c);
  for (std::size_t i = 0; i < xhat.rows(); ++i) {
    const double* g = grad_out.data() + i * c;
    const double* xh = xhat.data() + i * c;
    double sum = 0.0, sum_xh = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      dxhat[j] = g[j] * p.gamma.data()[j];
      sum += dxhat[j];
      sum_xh += dxhat[j] * xh[j];
    }
    double* d = dx.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) {
      d[j] = cache.inv_std[i] * (dxhat[j] - inv_c * sum - xh[j] * inv_c * sum_xh);
    }
  }
  return dx;
}

Matrix attention_core_fwd(const Matrix& q, const Matrix& k, const Matrix& v, double scale,
                          AttentionCache* cache) {
  require(q.cols() == k.cols(), "attention: query/key channel mismatch");
  require(k.rows() == v.rows(), "attention: key/value count mismatch");
  require(k.rows() > 0, "attention: no keys");
  Matrix probs = matmul_nt(q, k);
  const std::size_t m = probs.cols();
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double* r = probs.data() + i * m;
    double mx = r[0] * scale;
    for (std::size_t j = 0; j < m; ++j) {
      r[j] *= scale;
      mx = std::max(mx, r[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < m; ++j) r[j] *= inv;
  }
  Matrix out = matmul(probs, v);
  if (cache) cache->probs = std::move(probs);
  return out;
}

AttentionGrads attention_core_bwd(const Matrix& q, const Matrix& k, const Matrix& v, double scale,
                                  const AttentionCache& cache, const Matrix& grad_out) {
  const Matrix& p = cache.probs;
  require(grad_out.rows() == q.rows() && grad_out.cols() == v.cols(),
          "attention backward: gradient shape mismatch");
  AttentionGrads g;
  g.v = matmul_tn(p, grad_out);
  Matrix ds = matmul_nt(grad_out, v);
  const std::size_t m = ds.cols();
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    double* d = ds.data() + i * m;
    const double* pr = p.data() + i * m;
    double dot_row = 0.0;
    for (std::size_t j = 0; j < m; ++j) dot_row += d[j] * pr[j];
    for (std::size_t j = 0; j < m; ++j) d[j] = pr[j] * (d[j] - dot_row) * scale;
  }
  g.q = matmul(ds, k);
  g.k = matmul_tn(ds, q);
  return g;
}

Matrix multi_head_attention_fwd(const Matrix& q, const Matrix& k, const Matrix& v, int heads,
                                MultiHeadCache* cache) {
  if (heads < 1 || q.cols() % static_cast<std::size_t>(heads) != 0 ||
      v.cols() % static_cast<std::size_t>(heads) != 0) {
    throw InvalidParameter("head count must divide the channel count");
  }
  const std::size_t dq = q.cols() / static_cast<std::size_t>(heads);
  const std::size_t dv = v.cols() / static_cast<std::size_t>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dq));
  Matrix out(q.rows(), v.cols());
  if (cache) cache->heads.assign(static_cast<std::size_t>(heads), {});
  for (int h = 0; h < heads; ++h) {
    const auto hs = static_cast<std::size_t>(h);
    if (heads == 1) {
      return attention_core_fwd(q, k, v, scale, cache ? &cache->heads[0] : nullptr);
    }
    Matrix o = attention_core_fwd(slice_cols(q, hs * dq, dq), slice_cols(k, hs * dq, dq),
                                  slice_cols(v, hs * dv, dv), scale,
                                  cache ? &cache->heads[hs] : nullptr);
    set_cols(out, hs * dv, o);
  }
  return out;
}

AttentionGrads multi_head_attention_bwd(const Matrix& q, const Matrix& k, const Matrix& v,
                                        int heads, const MultiHeadCache& cache,
                                        const Matrix& grad_out) {
  const std::size_t dq = q.cols() / static_cast<std::size_t>(heads);
  const std::size_t dv = v.cols() / static_cast<std::size_t>(heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dq));
  if (heads == 1) return attention_core_bwd(q, k, v, scale, cache.heads.at(0), grad_out);
  AttentionGrads g{Matrix(q.rows(), q.cols()), Matrix(k.rows(), k.cols()),
                   Matrix(v.rows(), v.cols())};
  for (int h = 0; h < heads; ++h) {
    const auto hs = static_cast<std::size_t>(h);
    AttentionGrads gh = attention_core_bwd(
        slice_cols(q, hs * dq, dq), slice_cols(k, hs * dq, dq), slice_cols(v, hs * dv, dv), scale,
        cache.heads.at(hs), slice_cols(grad_out, hs * dv, dv));
    set_cols(g.q, hs * dq, gh.q);
    set_cols(g.k, hs * dq, gh.k);
    set_cols(g.v, hs * dv, gh.v);
  }
  return g;
}

Matrix SphereConv::slot(int s) const {
  if (s < 0 || s > 8) throw IndexError("sphere conv slot must lie in [0, 8]");
  const std::size_t in = in_channels();
  Matrix m(in, out_channels());
  std::copy_n(weight.data() + static_cast<std::size_t>(s) * in * weight.cols(), m.size(), m.data());
  return m;
}

void SphereConv::set_slot(int s, const Matrix& m) {
  if (s < 0 || s > 8) throw IndexError("sphere conv slot must lie in [0, 8]");
  const std::size_t in = in_channels();
  require(m.rows() == in && m.cols() == out_channels(), "sphere conv: slot shape mismatch");
  std::copy_n(m.data(), m.size(), weight.data() + static_cast<std::size_t>(s) * in * weight.cols());
}

Matrix sphere_conv_fwd(const SphereConv& p, std::span<const NeighborSlots> neighbors,
                       const Matrix& x, SphereConvCache* cache) {
  const std::size_t in = p.in_channels();
  require(x.cols() == in, "sphere conv: input has " + std::to_string(x.cols()) +
                              " channels, expected " + std::to_string(in));
  require(neighbors.size() == x.rows(), "sphere conv: neighbor table does not match pixel count");
  const std::size_t n = x.rows();
  Matrix gathered(n, 9 * in);
  for (std::size_t i = 0; i < n; ++i) {
    double* g = gathered.data() + i * 9 * in;
    std::copy_n(x.data() + i * in, in, g);
    for (int s = 0; s < 8; ++s) {
      const std::int32_t nb = neighbors[i][static_cast<std::size_t>(s)];
      if (nb == kMissing) continue;
      require(nb >= 0 && static_cast<std::size_t>(nb) < n, "sphere conv: neighbor out of range");
      std::copy_n(x.data() + static_cast<std::size_t>(nb) * in, in,
                  g + static_cast<std::size_t>(s + 1) * in);
    }
  }
  Matrix y = matmul(gathered, p.weight);
  add_row_vector(y, p.bias);
  if (cache) cache->gathered = std::move(gathered);
  return y;
}

Matrix sphere_conv_bwd(const SphereConv& p, std::span<const NeighborSlots> neighbors,
                       const SphereConvCache& cache, const Matrix& grad_out, SphereConv& grad) {
  const std::size_t in = p.in_channels();
  const std::size_t n = cache.gathered.rows();
  require(grad_out.rows() == n && grad_out.cols() == p.out_channels(),
          "sphere conv backward: gradient shape mismatch");
  grad.weight += matmul_tn(cache.gathered, grad_out);
  grad.bias += column_sums(grad_out);
  const Matrix dg = matmul_nt(grad_out, p.weight);
  Matrix dx(n, in);
  for (std::size_t i = 0; i < n; ++i) {
    const double* g = dg.data() + i * 9 * in;
    double* d = dx.data() + i * in;
    for (std::size_t c = 0; c < in; ++c) d[c] += g[c];
    for (int s = 0; s < 8; ++s) {
      const std::int32_t nb = neighbors[i][static_cast<std::size_t>(s)];
      if (nb == kMissing) continue;
      double* dn = dx.data() + static_cast<std::size_t>(nb) * in;
      const double* gs = g + static_cast<std::size_t>(s + 1) * in;
      for (std::size_t c = 0; c < in; ++c) dn[c] += gs[c];
    }
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
  return cdf + x * pdf;
}

Matrix gelu_fwd(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) v = gelu(v);
  return y;
}

Matrix gelu_bwd(const Matrix& x, const Matrix& grad_out) {
  require(x.same_shape(grad_out), "gelu backward: shape mismatch");
  Matrix d = grad_out;
  for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] *= gelu_derivative(x.data()[i]);
  return d;
}

Matrix ffn_fwd(const Ffn& p, const Matrix& x, FfnCache* cache) {
  Matrix pre = linear_fwd(p.fc1, x);
  Matrix hidden = gelu_fwd(pre);
  Matrix y = linear_fwd(p.fc2, hidden);
  if (cache) {
    cache->input = x;
    cache->hidden_pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return y;
}

Matrix ffn_bwd(const Ffn& p, const FfnCache& cache, const Matrix& grad_out, Ffn& grad) {
  const Matrix dh = linear_bwd(p.fc2, cache.hidden, grad_out, grad.fc2);
  const Matrix dpre = gelu_bwd(cache.hidden_pre, dh);
  return linear_bwd(p.fc1, cache.input, dpre, grad.fc1);
}

}  // namespace sphdepth

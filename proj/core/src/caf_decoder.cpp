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

#include "sphdepth/caf_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"
#include "sphdepth/error.hpp"
#include "sphdepth/random.hpp"

namespace sphdepth {

// ---------------------------------------------------------------------------
// Config

std::string to_string(Variant v) { return v == Variant::Base ? "base" : "fusion"; }

std::string to_string(SpeCoords c) {
  switch (c) {
    case SpeCoords::XYZ: return "xyz";
    case SpeCoords::XY: return "xy";
    case SpeCoords::YZ: return "yz";
    case SpeCoords::XZ: return "xz";
    case SpeCoords::LatLon: return "latlon";
  }
  return "xyz";
}

Variant variant_from_string(const std::string& s) {
  if (s == "base") return Variant::Base;
  if (s == "fusion") return Variant::Fusion;
  throw InvalidParameter("unknown variant '" + s + "' (expected base or fusion)");
}

SpeCoords spe_coords_from_string(const std::string& s) {
  for (auto c : {SpeCoords::XYZ, SpeCoords::XY, SpeCoords::YZ, SpeCoords::XZ, SpeCoords::LatLon}) {
    if (to_string(c) == s) return c;
  }
  throw InvalidParameter("unknown SPE coordinates '" + s + "' (expected xyz, xy, yz, xz or latlon)");
}

int spe_dims(SpeCoords c) { return c == SpeCoords::XYZ ? 3 : 2; }

void ModelConfig::validate() const {
  if (nsides.empty()) throw InvalidParameter("model needs at least one level");
  if (channels.size() != nsides.size()) {
    throw InvalidParameter("channels must list one width per level");
  }
  for (std::size_t i = 0; i < nsides.size(); ++i) {
    const int n = nsides[i];
    if (n < 1 || n > 1024 || (n & (n - 1)) != 0) {
      throw InvalidParameter("nside " + std::to_string(n) + " is not a power of two in [1, 1024]");
    }
    if (i > 0 && n != nsides[i - 1] && n != 2 * nsides[i - 1]) {
      throw InvalidParameter("consecutive levels must repeat or double nside");
    }
    if (channels[i] < 2) throw InvalidParameter("every level needs at least 2 channels");
    if (variant == Variant::Fusion && (heads < 1 || channels[i] % heads != 0)) {
      throw InvalidParameter("heads must divide every level's channel count");
    }
  }
  if (gsa_offset < 0) throw InvalidParameter("gsa_offset must be nonnegative");
  if (ffn_expansion < 1) throw InvalidParameter("ffn_expansion must be at least 1");
  if (encoder_stem < 1) throw InvalidParameter("encoder_stem must be at least 1");
  if (input_channels < 1) throw InvalidParameter("input_channels must be at least 1");
}

int ModelConfig::encoder_stride(std::size_t level) const {
  if (level >= levels()) throw InvalidParameter("level out of range");
  return 4 << (levels() - 1 - level);
}

int ModelConfig::input_multiple() const { return encoder_stride(0); }

std::string ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["nsides"] = nsides;
  j["channels"] = channels;
  j["variant"] = to_string(variant);
  j["gsa_offset"] = gsa_offset;
  j["ffn_expansion"] = ffn_expansion;
  j["heads"] = heads;
  j["spe_coords"] = to_string(spe_coords);
  j["encoder_stem"] = encoder_stem;
  j["input_channels"] = input_channels;
  return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw InvalidParameter("model config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "nsides") c.nsides = value.get<std::vector<int>>();
      else if (key == "channels") c.channels = value.get<std::vector<int>>();
      else if (key == "variant") c.variant = variant_from_string(value.get<std::string>());
      else if (key == "gsa_offset") c.gsa_offset = value.get<int>();
      else if (key == "ffn_expansion") c.ffn_expansion = value.get<int>();
      else if (key == "heads") c.heads = value.get<int>();
      else if (key == "spe_coords") c.spe_coords = spe_coords_from_string(value.get<std::string>());
      else if (key == "encoder_stem") c.encoder_stem = value.get<int>();
      else if (key == "input_channels") c.input_channels = value.get<int>();
      else throw InvalidParameter("unknown model config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidParameter(std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// SPE

Matrix spe_features(std::span<const Vec3> centers, SpeCoords coords) {
  Matrix out(centers.size(), static_cast<std::size_t>(spe_dims(coords)));
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const Vec3& v = centers[i];
    switch (coords) {
      case SpeCoords::XYZ:
        out(i, 0) = v.x;
        out(i, 1) = v.y;
        out(i, 2) = v.z;
        break;
      case SpeCoords::XY:
        out(i, 0) = v.x;
        out(i, 1) = v.y;
        break;
      case SpeCoords::YZ:
        out(i, 0) = v.y;
        out(i, 1) = v.z;
        break;
      case SpeCoords::XZ:
        out(i, 0) = v.x;
        out(i, 1) = v.z;
        break;
      case SpeCoords::LatLon: {
        double lon = std::atan2(v.y, v.x);
        if (lon < 0.0) lon += 2.0 * std::numbers::pi;
        out(i, 0) = std::asin(std::clamp(v.z, -1.0, 1.0));
        out(i, 1) = lon;
        break;
      }
    }
  }
  return out;
}

Matrix spe_embed(const SpeParams& p, const Matrix& features) {
  if (features.cols() != p.c.cols()) throw ShapeError("SPE feature width does not match C");
  return matmul_nt(features, p.c);
}

SphereTensor spe_embed(const SpeParams& p, std::shared_ptr<const SphericalGrid> grid,
                       SpeCoords coords) {
  if (!grid) throw ShapeError("SPE needs a grid");
  Matrix z = spe_embed(p, spe_features(grid->centers(), coords));
  return SphereTensor(std::move(grid), std::move(z));
}

void spe_embed_bwd(const Matrix& features, const Matrix& grad_out, SpeParams& grad) {
  grad.c += matmul_tn(grad_out, features);
}

// ---------------------------------------------------------------------------
// Topology

LevelTopology LevelTopology::from_grid(const SphericalGrid& grid, int gsa_offset,
                                       SpeCoords coords) {
  if (gsa_offset < 0) throw InvalidParameter("gsa_offset must be nonnegative");
  LevelTopology t;
  t.nside = grid.nside();
  const auto table = grid.neighbor_table();
  t.neighbors.assign(table.begin(), table.end());
  t.windows = window_partition(grid, std::min(gsa_offset, grid.order()));
  t.spe_features = sphdepth::spe_features(grid.centers(), coords);
  return t;
}

LevelTopology LevelTopology::permuted(std::span<const std::int32_t> perm) const {
  const std::size_t n = npix();
  if (perm.size() != n) throw ShapeError("permutation size does not match pixel count");
  std::vector<std::uint8_t> seen(n, 0);
  for (auto p : perm) {
    if (p < 0 || static_cast<std::size_t>(p) >= n || seen[p]) {
      throw InvalidParameter("not a permutation");
    }
    seen[p] = 1;
  }
  LevelTopology t;
  t.nside = nside;
  t.neighbors.resize(n);
  t.windows = windows;
  t.spe_features = Matrix(n, spe_features.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(perm[i]);
    for (int s = 0; s < 8; ++s) {
      const auto nb = neighbors[i][s];
      t.neighbors[j][s] = nb == kMissing ? kMissing : perm[nb];
    }
    t.windows.window_of[j] = windows.window_of[i];
    for (std::size_t c = 0; c < spe_features.cols(); ++c) t.spe_features(j, c) = spe_features(i, c);
  }
  for (auto& m : t.windows.members) m = perm[m];
  return t;
}

Matrix gsa_subsample(const Matrix& x, const WindowPartition& windows) {
  if (static_cast<std::int64_t>(x.rows()) != windows.n_windows * windows.window_size) {
    throw ShapeError("window partition does not match the pixel count");
  }
  const auto nw = static_cast<std::size_t>(windows.n_windows);
  const auto ws = static_cast<std::size_t>(windows.window_size);
  const double inv = 1.0 / static_cast<double>(ws);
  Matrix out(nw, x.cols());
  for (std::size_t w = 0; w < nw; ++w) {
    auto dst = out.row(w);
    for (std::size_t k = 0; k < ws; ++k) {
      const auto src = x.row(static_cast<std::size_t>(windows.members[w * ws + k]));
      for (std::size_t c = 0; c < x.cols(); ++c) dst[c] += src[c];
    }
    for (double& v : dst) v *= inv;
  }
  return out;
}

Matrix gsa_subsample_bwd(const Matrix& grad_reps, const WindowPartition& windows) {
  const auto nw = static_cast<std::size_t>(windows.n_windows);
  const auto ws = static_cast<std::size_t>(windows.window_size);
  if (grad_reps.rows() != nw) throw ShapeError("gradient rows do not match window count");
  const double inv = 1.0 / static_cast<double>(ws);
  Matrix out(nw * ws, grad_reps.cols());
  for (std::size_t w = 0; w < nw; ++w) {
    const auto src = grad_reps.row(w);
    for (std::size_t k = 0; k < ws; ++k) {
      auto dst = out.row(static_cast<std::size_t>(windows.members[w * ws + k]));
      for (std::size_t c = 0; c < out.cols(); ++c) dst[c] += src[c] * inv;
    }
  }
  return out;
}

Matrix gsa_subsample(const SphereTensor& x, const GridHierarchy& hierarchy, std::size_t level,
                     int offset) {
  if (!x.grid || x.grid->nside() != hierarchy.level(level).nside()) {
    throw ShapeError("tensor does not live on the requested level");
  }
  return gsa_subsample(x.data, hierarchy.window_partition(level, offset));
}

// ---------------------------------------------------------------------------
// RCU

Matrix rcu_fwd(const ResidualConvUnit& p, std::span<const NeighborSlots> neighbors,
               const Matrix& x, RcuCache* cache) {
  SphereConvCache c1;
  SphereConvCache c2;
  Matrix h = sphere_conv_fwd(p.conv1, neighbors, gelu_fwd(x), cache ? &c1 : nullptr);
  Matrix y = sphere_conv_fwd(p.conv2, neighbors, gelu_fwd(h), cache ? &c2 : nullptr);
  y += x;
  if (cache) {
    cache->input = x;
    cache->hidden_pre = std::move(h);
    cache->conv1 = std::move(c1);
    cache->conv2 = std::move(c2);
  }
  return y;
}

Matrix rcu_bwd(const ResidualConvUnit& p, std::span<const NeighborSlots> neighbors,
               const RcuCache& cache, const Matrix& grad_out, ResidualConvUnit& grad) {
  Matrix g = sphere_conv_bwd(p.conv2, neighbors, cache.conv2, grad_out, grad.conv2);
  g = gelu_bwd(cache.hidden_pre, g);
  g = sphere_conv_bwd(p.conv1, neighbors, cache.conv1, g, grad.conv1);
  Matrix gx = gelu_bwd(cache.input, g);
  gx += grad_out;
  return gx;
}

// ---------------------------------------------------------------------------
// CAF

CafParams::CafParams(std::size_t channels, int spe_dim, int heads_, int ffn_expansion)
    : mid_norm(channels), ffn(channels, ffn_expansion), rescon(channels), heads(heads_) {
  if (heads < 1 || channels % static_cast<std::size_t>(heads) != 0) {
    throw InvalidParameter("heads must divide the channel count");
  }
  for (auto& p : path) {
    p.spe = SpeParams(channels, spe_dim);
    p.norm = LayerNorm(channels);
    p.wq = Linear(channels, channels, false);
    p.wk = Linear(channels, channels, false);
    p.wv = Linear(channels, channels, false);
  }
}

namespace {

void check_fuse_inputs(const LevelTopology& level, const Matrix& f0, const Matrix& f1,
                       std::size_t channels) {
  if (!f0.same_shape(f1)) throw ShapeError("fusion inputs have different shapes");
  if (f0.rows() != level.npix()) throw ShapeError("fusion inputs do not match the level's pixel count");
  if (f0.cols() != channels) throw ShapeError("fusion inputs do not match the block's channel count");
}

}  // namespace

Matrix caf_forward(const CafParams& p, const LevelTopology& level, const Matrix& f0,
                   const Matrix& f1, CafCache* cache) {
  check_fuse_inputs(level, f0, f1, p.channels());
  CafCache local;
  CafCache& c = cache ? *cache : local;
  const Matrix* inputs[2] = {&f0, &f1};
  for (int i = 0; i < 2; ++i) {
    const CafPath& pp = p.path[i];
    CafPathCache& pc = c.path[i];
    pc.zeta_in = *inputs[i] + spe_embed(pp.spe, level.spe_features);
    pc.x = layer_norm_fwd(pp.norm, pc.zeta_in, &pc.norm);
    pc.q = linear_fwd(pp.wq, pc.x);
    pc.pooled = gsa_subsample(pc.x, level.windows);
    pc.k = linear_fwd(pp.wk, pc.pooled);
    pc.v = linear_fwd(pp.wv, pc.pooled);
  }
  // Each path's queries attend to the other path's pooled keys and values.
  Matrix att0 = multi_head_attention_fwd(c.path[1].q, c.path[0].k, c.path[0].v, p.heads, &c.att[0]);
  Matrix att1 = multi_head_attention_fwd(c.path[0].q, c.path[1].k, c.path[1].v, p.heads, &c.att[1]);
  Matrix a = c.path[0].x + att0;
  Matrix b = c.path[1].x + att1;
  c.sum = a + b;
  c.mid = layer_norm_fwd(p.mid_norm, c.sum, &c.mid_norm);
  Matrix z = c.sum + ffn_fwd(p.ffn, c.mid, &c.ffn);
  return rcu_fwd(p.rescon, level.neighbors, z, &c.rescon);
}

FuseGrads caf_backward(const CafParams& p, const LevelTopology& level, const CafCache& c,
                       const Matrix& grad_out, CafParams& grad) {
  Matrix gz = rcu_bwd(p.rescon, level.neighbors, c.rescon, grad_out, grad.rescon);
  Matrix gs = gz;
  gs += layer_norm_bwd(p.mid_norm, c.mid_norm, ffn_bwd(p.ffn, c.ffn, gz, grad.ffn), grad.mid_norm);

  const AttentionGrads g0 = multi_head_attention_bwd(c.path[1].q, c.path[0].k, c.path[0].v,
                                                     p.heads, c.att[0], gs);
  const AttentionGrads g1 = multi_head_attention_bwd(c.path[0].q, c.path[1].k, c.path[1].v,
                                                     p.heads, c.att[1], gs);
  const Matrix* dq[2] = {&g1.q, &g0.q};
  const Matrix* dk[2] = {&g0.k, &g1.k};
  const Matrix* dv[2] = {&g0.v, &g1.v};

  FuseGrads out;
  Matrix* targets[2] = {&out.skip, &out.decoder};
  for (int i = 0; i < 2; ++i) {
    const CafPath& pp = p.path[i];
    const CafPathCache& pc = c.path[i];
    CafPath& gp = grad.path[i];
    Matrix gx = gs;
    gx += linear_bwd(pp.wq, pc.x, *dq[i], gp.wq);
    Matrix gpool = linear_bwd(pp.wk, pc.pooled, *dk[i], gp.wk);
    gpool += linear_bwd(pp.wv, pc.pooled, *dv[i], gp.wv);
    gx += gsa_subsample_bwd(gpool, level.windows);
    Matrix gin = layer_norm_bwd(pp.norm, pc.norm, gx, gp.norm);
    spe_embed_bwd(level.spe_features, gin, gp.spe);
    *targets[i] = std::move(gin);
  }
  return out;
}

SphereTensor caf_forward(const CafParams& p, const LevelTopology& level, const SphereTensor& f0,
                         const SphereTensor& f1) {
  if (!f0.grid || !f1.grid || f0.grid->nside() != level.nside || f1.grid->nside() != level.nside) {
    throw ShapeError("fusion inputs must live on the block's grid level");
  }
  if (f0.channels() != f1.channels()) throw ShapeError("fusion inputs have different channel counts");
  return SphereTensor(f0.grid, caf_forward(p, level, f0.data, f1.data));
}

Matrix base_fuse(const BaseFuseParams& p, const LevelTopology& level, const Matrix& f0,
                 const Matrix& f1, BaseFuseCache* cache) {
  check_fuse_inputs(level, f0, f1, p.rcu1.conv1.in_channels());
  const Matrix r1 = rcu_fwd(p.rcu1, level.neighbors, f0 + f1, cache ? &cache->rcu1 : nullptr);
  return rcu_fwd(p.rcu2, level.neighbors, r1, cache ? &cache->rcu2 : nullptr);
}

FuseGrads base_fuse_backward(const BaseFuseParams& p, const LevelTopology& level,
                             const BaseFuseCache& cache, const Matrix& grad_out,
                             BaseFuseParams& grad) {
  Matrix g = rcu_bwd(p.rcu2, level.neighbors, cache.rcu2, grad_out, grad.rcu2);
  g = rcu_bwd(p.rcu1, level.neighbors, cache.rcu1, g, grad.rcu1);
  return {g, g};
}

// ---------------------------------------------------------------------------
// Nested resampling

Matrix upsample_nested(const Matrix& x, const GridHierarchy& hierarchy, std::size_t level) {
  if (level + 1 >= hierarchy.size()) throw InvalidParameter("finest level cannot be upsampled");
  if (static_cast<std::int64_t>(x.rows()) != hierarchy.level(level).npix()) {
    throw ShapeError("tensor rows do not match the level's pixel count");
  }
  if (!hierarchy.refines(level)) return x;
  Matrix out(4 * x.rows(), x.cols());
  for (std::size_t j = 0; j < out.rows(); ++j) {
    const auto src = x.row(j >> 2);
    std::copy(src.begin(), src.end(), out.row(j).begin());
  }
  return out;
}

Matrix upsample_nested_bwd(const Matrix& grad_out, const GridHierarchy& hierarchy,
                           std::size_t level) {
  if (level + 1 >= hierarchy.size()) throw InvalidParameter("finest level cannot be upsampled");
  if (static_cast<std::int64_t>(grad_out.rows()) != hierarchy.level(level + 1).npix()) {
    throw ShapeError("gradient rows do not match the finer level's pixel count");
  }
  if (!hierarchy.refines(level)) return grad_out;
  Matrix out(grad_out.rows() / 4, grad_out.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < 4; ++k) {
      const auto src = grad_out.row(4 * i + k);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  }
  return out;
}

SphereTensor upsample_nested(const SphereTensor& x, const GridHierarchy& hierarchy,
                             std::size_t level) {
  if (!x.grid || x.grid->nside() != hierarchy.level(level).nside()) {
    throw ShapeError("tensor does not live on the requested level");
  }
  return SphereTensor(hierarchy.level_ptr(level + 1), upsample_nested(x.data, hierarchy, level));
}

Matrix downsample_mean(const Matrix& fine, const GridHierarchy& hierarchy, std::size_t level) {
  Matrix out = upsample_nested_bwd(fine, hierarchy, level);
  if (hierarchy.refines(level)) out *= 0.25;
  return out;
}

// ---------------------------------------------------------------------------
// Encoder

ToyEncoder::ToyEncoder(const ModelConfig& config) {
  config.validate();
  const std::size_t L = config.levels();
  stages.emplace_back(static_cast<std::size_t>(config.input_channels),
                      static_cast<std::size_t>(config.encoder_stem), 2);
  std::size_t in = static_cast<std::size_t>(config.encoder_stem);
  // Stage j (1-based) has stride 2^(j+1) and feeds level L - j.
  for (std::size_t j = 1; j <= L; ++j) {
    const auto out = static_cast<std::size_t>(config.channels[L - j]);
    stages.emplace_back(in, out, 2);
    in = out;
  }
}

std::vector<ErpImage> toy_encoder_forward(const ToyEncoder& p, const ErpImage& image,
                                          EncoderCache* cache) {
  image.validate(true);
  if (p.stages.size() < 2) throw InvalidParameter("encoder has no feature stages");
  const int multiple = 1 << p.stages.size();
  if (image.width % multiple != 0 || image.height % multiple != 0) {
    throw InvalidParameter("input width and height must be multiples of " + std::to_string(multiple));
  }
  if (static_cast<std::size_t>(image.channels()) != p.stages[0].in_channels()) {
    throw ShapeError("input channel count does not match the encoder");
  }
  if (cache) {
    cache->convs.assign(p.stages.size(), {});
    cache->pre_activation.assign(p.stages.size(), {});
  }
  std::vector<ErpImage> features;
  ErpImage h = image;
  for (std::size_t s = 0; s < p.stages.size(); ++s) {
    ErpImage pre = planar_conv_fwd(p.stages[s], h, cache ? &cache->convs[s] : nullptr);
    h = ErpImage{};
    h.width = pre.width;
    h.height = pre.height;
    h.pixels = gelu_fwd(pre.pixels);
    if (cache) cache->pre_activation[s] = std::move(pre);
    if (s >= 1) features.push_back(h);
  }
  return features;
}

ErpImage toy_encoder_backward(const ToyEncoder& p, const EncoderCache& cache,
                              const std::vector<ErpImage>& grad_features, ToyEncoder& grad) {
  const std::size_t S = p.stages.size();
  if (grad_features.size() + 1 != S || cache.convs.size() != S) {
    throw ShapeError("encoder gradient list does not match the stage count");
  }
  ErpImage g;
  for (std::size_t s = S; s-- > 0;) {
    ErpImage gh = s >= 1 ? grad_features[s - 1] : ErpImage{};
    if (s + 1 < S) {
      if (s >= 1) {
        gh.pixels += g.pixels;
      } else {
        gh = std::move(g);
      }
    }
    const ErpImage& pre = cache.pre_activation[s];
    if (!gh.pixels.same_shape(pre.pixels)) throw ShapeError("encoder feature gradient has the wrong shape");
    ErpImage gpre = pre;
    gpre.pixels = gelu_bwd(pre.pixels, gh.pixels);
    g = planar_conv_bwd(p.stages[s], cache.convs[s], gpre, grad.stages[s]);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Model

ModelParams make_model_shapes(const ModelConfig& config) {
  config.validate();
  const std::size_t L = config.levels();
  const auto D = [&](std::size_t l) { return static_cast<std::size_t>(config.channels[l]); };
  ModelParams m;
  m.encoder = ToyEncoder(config);
  for (std::size_t l = 0; l < L; ++l) m.proj.emplace_back(D(l), D(l), true);
  m.coarse = ResidualConvUnit(D(0));
  for (std::size_t l = 1; l < L; ++l) {
    m.up.emplace_back(D(l - 1), D(l));
    if (config.variant == Variant::Fusion) {
      m.caf.emplace_back(D(l), spe_dims(config.spe_coords), config.heads, config.ffn_expansion);
    } else {
      m.base.emplace_back(D(l));
    }
  }
  m.head = SphereConv(D(L - 1), 1);
  return m;
}

namespace {

void init_uniform(Matrix& m, double bound, Rng& rng) {
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
}

void init_linear(Linear& p, Rng& rng) {
  init_uniform(p.weight, 1.0 / std::sqrt(static_cast<double>(p.in_features())), rng);
}

void init_conv(Matrix& weight, Rng& rng, double gain = 1.0) {
  init_uniform(weight, gain / std::sqrt(static_cast<double>(weight.rows())), rng);
}

void init_rcu(ResidualConvUnit& p, Rng& rng) {
  init_conv(p.conv1.weight, rng);
  init_conv(p.conv2.weight, rng);
}

}  // namespace

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  ModelParams m = make_model_shapes(config);
  Rng rng(seed);
  for (auto& s : m.encoder.stages) init_conv(s.weight, rng, std::sqrt(2.0));
  for (auto& p : m.proj) init_linear(p, rng);
  init_rcu(m.coarse, rng);
  for (auto& u : m.up) init_conv(u.weight, rng);
  for (auto& c : m.caf) {
    for (auto& p : c.path) {
      init_uniform(p.spe.c, 1.0 / std::sqrt(static_cast<double>(p.spe.c.cols())), rng);
      init_linear(p.wq, rng);
      init_linear(p.wk, rng);
      init_linear(p.wv, rng);
    }
    init_linear(c.ffn.fc1, rng);
    init_linear(c.ffn.fc2, rng);
    init_rcu(c.rescon, rng);
  }
  for (auto& b : m.base) {
    init_rcu(b.rcu1, rng);
    init_rcu(b.rcu2, rng);
  }
  init_conv(m.head.weight, rng, 0.1);
  return m;
}

std::size_t parameter_count(ModelParams& params) {
  std::size_t n = 0;
  params.visit("", [&](const std::string&, Matrix& m) { n += m.size(); });
  return n;
}

DecoderGeometry::DecoderGeometry(const ModelConfig& config) : hierarchy_(config.nsides) {
  config.validate();
  for (std::size_t l = 0; l < hierarchy_.size(); ++l) {
    levels_.push_back(LevelTopology::from_grid(hierarchy_.level(l), config.gsa_offset, config.spe_coords));
  }
}

ModelTables build_model_tables(const ModelConfig& config, const DecoderGeometry& geometry,
                               int width, int height, int workers) {
  config.validate();
  const int multiple = config.input_multiple();
  if (width <= 0 || height <= 0 || width % multiple != 0 || height % multiple != 0) {
    throw InvalidParameter("input width and height must be positive multiples of " +
                           std::to_string(multiple));
  }
  ModelTables t;
  t.width = width;
  t.height = height;
  const auto& hier = geometry.hierarchy();
  for (std::size_t l = 0; l < config.levels(); ++l) {
    const int s = config.encoder_stride(l);
    t.to_sphere.push_back(cached_table(TransferDirection::PlaneToSphere, hier.level(l), width / s,
                                       height / s, workers));
  }
  const auto& finest = hier.level(config.levels() - 1);
  t.to_erp = cached_table(TransferDirection::SphereToPlane, finest, width, height, workers);
  t.input_to_sphere = cached_table(TransferDirection::PlaneToSphere, finest, width, height, workers);
  return t;
}

namespace {

void check_tables(const ModelConfig& config, const DecoderGeometry& geometry,
                  const ModelTables& tables, const ErpImage& image) {
  const std::size_t L = config.levels();
  if (geometry.size() != L) throw PreconditionError("decoder geometry does not match the config");
  if (tables.to_sphere.size() != L || tables.to_erp.rows.empty()) {
    throw PreconditionError("transfer tables are missing for some levels");
  }
  if (tables.width != image.width || tables.height != image.height) {
    throw PreconditionError("transfer tables were built for a different input size");
  }
  for (std::size_t l = 0; l < L; ++l) {
    const auto& t = tables.to_sphere[l];
    const int s = config.encoder_stride(l);
    if (t.direction != TransferDirection::PlaneToSphere ||
        t.nside != static_cast<std::uint32_t>(config.nsides[l]) ||
        t.erp_width != static_cast<std::uint32_t>(image.width / s) ||
        t.erp_height != static_cast<std::uint32_t>(image.height / s)) {
      throw PreconditionError("transfer table for level " + std::to_string(l) + " does not match");
    }
  }
  const auto& back = tables.to_erp;
  if (back.direction != TransferDirection::SphereToPlane ||
      back.nside != static_cast<std::uint32_t>(config.nsides.back()) ||
      back.erp_width != static_cast<std::uint32_t>(image.width) ||
      back.erp_height != static_cast<std::uint32_t>(image.height)) {
    throw PreconditionError("output transfer table does not match");
  }
}

}  // namespace

ModelOutput model_forward(const ModelConfig& config, const DecoderGeometry& geometry,
                          const ModelTables& tables, const ModelParams& params,
                          const ErpImage& image, ModelCache* cache) {
  image.validate(true);
  check_tables(config, geometry, tables, image);
  const std::size_t L = config.levels();
  const auto& hier = geometry.hierarchy();

  ModelCache local;
  ModelCache& c = cache ? *cache : local;
  c.features = toy_encoder_forward(params.encoder, image, cache ? &c.encoder : nullptr);
  c.sphere_features.assign(L, {});
  c.skip.assign(L, {});
  c.upsampled.assign(L, {});
  c.up.assign(L, {});
  c.caf.assign(L, {});
  c.base.assign(L, {});
  c.decoded.assign(L, {});

  for (std::size_t l = 0; l < L; ++l) {
    c.sphere_features[l] = resample(tables.to_sphere[l], c.features[L - 1 - l].pixels);
    c.skip[l] = linear_fwd(params.proj[l], c.sphere_features[l]);
  }
  c.decoded[0] = rcu_fwd(params.coarse, geometry.level(0).neighbors, c.skip[0], &c.coarse);
  for (std::size_t l = 1; l < L; ++l) {
    const auto& topo = geometry.level(l);
    c.upsampled[l] = upsample_nested(c.decoded[l - 1], hier, l - 1);
    const Matrix u = sphere_conv_fwd(params.up[l - 1], topo.neighbors, c.upsampled[l], &c.up[l]);
    c.decoded[l] = config.variant == Variant::Fusion
                       ? caf_forward(params.caf[l - 1], topo, c.skip[l], u, &c.caf[l])
                       : base_fuse(params.base[l - 1], topo, c.skip[l], u, &c.base[l]);
  }

  ModelOutput out;
  out.log_depth = sphere_conv_fwd(params.head, geometry.level(L - 1).neighbors, c.decoded[L - 1], &c.head);
  Matrix meters = out.log_depth;
  for (double& v : meters.values()) v = std::exp(v);
  const Matrix erp = resample(tables.to_erp, meters);
  out.depth = DepthFrame::prediction(image.width, image.height,
                                     std::vector<double>(erp.values().begin(), erp.values().end()));
  return out;
}

ErpImage model_backward(const ModelConfig& config, const DecoderGeometry& geometry,
                        const ModelTables& tables, const ModelParams& params,
                        const ModelCache& c, const Matrix& grad_log_depth, ModelParams& grad) {
  const std::size_t L = config.levels();
  const auto& hier = geometry.hierarchy();
  if (c.decoded.size() != L || c.encoder.convs.empty()) {
    throw PreconditionError("model cache was not filled by model_forward");
  }
  if (grad_log_depth.rows() != geometry.level(L - 1).npix() || grad_log_depth.cols() != 1) {
    throw ShapeError("log-depth gradient has the wrong shape");
  }

  std::vector<Matrix> grad_skip(L);
  Matrix g = sphere_conv_bwd(params.head, geometry.level(L - 1).neighbors, c.head, grad_log_depth, grad.head);
  for (std::size_t l = L - 1; l >= 1; --l) {
    const auto& topo = geometry.level(l);
    FuseGrads fg = config.variant == Variant::Fusion
                       ? caf_backward(params.caf[l - 1], topo, c.caf[l], g, grad.caf[l - 1])
                       : base_fuse_backward(params.base[l - 1], topo, c.base[l], g, grad.base[l - 1]);
    grad_skip[l] = std::move(fg.skip);
    const Matrix gu = sphere_conv_bwd(params.up[l - 1], topo.neighbors, c.up[l], fg.decoder, grad.up[l - 1]);
    g = upsample_nested_bwd(gu, hier, l - 1);
  }
  grad_skip[0] = rcu_bwd(params.coarse, geometry.level(0).neighbors, c.coarse, g, grad.coarse);

  std::vector<ErpImage> grad_features(L);
  for (std::size_t l = 0; l < L; ++l) {
    const Matrix gs = linear_bwd(params.proj[l], c.sphere_features[l], grad_skip[l], grad.proj[l]);
    const ErpImage& f = c.features[L - 1 - l];
    ErpImage gf;
    gf.width = f.width;
    gf.height = f.height;
    gf.pixels = resample_adjoint(tables.to_sphere[l], gs);
    grad_features[L - 1 - l] = std::move(gf);
  }
  return toy_encoder_backward(params.encoder, c.encoder, grad_features, grad.encoder);
}

}  // namespace sphdepth

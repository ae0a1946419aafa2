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

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sphdepth/depth_eval.hpp"
#include "sphdepth/erp_transfer.hpp"
#include "sphdepth/healpix_grid.hpp"
#include "sphdepth/planar_conv.hpp"
#include "sphdepth/sphere_nn.hpp"
#include "sphdepth/sphere_tensor.hpp"

namespace sphdepth {

enum class Variant { Base, Fusion };

/// Coordinates fed to the spherical positional embedding.
enum class SpeCoords { XYZ, XY, YZ, XZ, LatLon };

std::string to_string(Variant v);
std::string to_string(SpeCoords c);
Variant variant_from_string(const std::string& s);
SpeCoords spe_coords_from_string(const std::string& s);
int spe_dims(SpeCoords c);

struct ModelConfig {
  std::vector<int> nsides{4, 8, 16, 32};         // coarse -> fine
  std::vector<int> channels{512, 320, 256, 256};  // decoder width per level
  Variant variant = Variant::Fusion;
  int gsa_offset = 2;  // window = ancestor this many quadtree levels up
  int ffn_expansion = 4;
  int heads = 4;
  SpeCoords spe_coords = SpeCoords::XYZ;
  int encoder_stem = 16;
  int input_channels = 3;

  void validate() const;
  std::size_t levels() const noexcept { return nsides.size(); }
  /// Encoder stride feeding `level`: 4 on the finest level, doubling coarser.
  int encoder_stride(std::size_t level) const;
  /// Input width and height must be multiples of this.
  int input_multiple() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

// ---------------------------------------------------------------------------
// Spherical positional embedding

struct SpeParams {
  Matrix c;  // M x k, k = spe_dims(coords)

  SpeParams() = default;
  SpeParams(std::size_t channels, int dims) : c(channels, static_cast<std::size_t>(dims)) {}

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "C", c);
  }
};

/// Per-pixel coordinate features (n x k); XYZ are the unit-vector components,
/// LatLon is (latitude, longitude) in radians.
Matrix spe_features(std::span<const Vec3> centers, SpeCoords coords);
/// zeta = features * C^T; no bias.
Matrix spe_embed(const SpeParams& p, const Matrix& features);
SphereTensor spe_embed(const SpeParams& p, std::shared_ptr<const SphericalGrid> grid,
                       SpeCoords coords = SpeCoords::XYZ);
void spe_embed_bwd(const Matrix& features, const Matrix& grad_out, SpeParams& grad);

// ---------------------------------------------------------------------------
// Per-level structure used by the decoder

/// Everything the decoder needs to know about one level: neighbor table,
/// attention windows and positional features. Can be relabeled with
/// permuted() to test equivariance.
struct LevelTopology {
  int nside = 0;
  std::vector<NeighborSlots> neighbors;
  WindowPartition windows;
  Matrix spe_features;

  std::size_t npix() const noexcept { return neighbors.size(); }

  /// Window offset is clamped to the grid's quadtree depth.
  static LevelTopology from_grid(const SphericalGrid& grid, int gsa_offset, SpeCoords coords);
  /// Pixel i becomes pixel perm[i]; window ids and member order are kept.
  LevelTopology permuted(std::span<const std::int32_t> perm) const;
};

/// Window representatives: mean of member rows (n_windows x C).
Matrix gsa_subsample(const Matrix& x, const WindowPartition& windows);
Matrix gsa_subsample_bwd(const Matrix& grad_reps, const WindowPartition& windows);
Matrix gsa_subsample(const SphereTensor& x, const GridHierarchy& hierarchy, std::size_t level,
                     int offset);

// ---------------------------------------------------------------------------
// Residual convolution unit: y = x + conv2(gelu(conv1(gelu(x))))

struct ResidualConvUnit {
  SphereConv conv1;
  SphereConv conv2;

  ResidualConvUnit() = default;
  explicit ResidualConvUnit(std::size_t channels) : conv1(channels, channels), conv2(channels, channels) {}

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    conv1.visit(prefix + "conv1.", f);
    conv2.visit(prefix + "conv2.", f);
  }
};

struct RcuCache {
  Matrix input;
  Matrix hidden_pre;
  SphereConvCache conv1;
  SphereConvCache conv2;
};

Matrix rcu_fwd(const ResidualConvUnit& p, std::span<const NeighborSlots> neighbors,
               const Matrix& x, RcuCache* cache = nullptr);
Matrix rcu_bwd(const ResidualConvUnit& p, std::span<const NeighborSlots> neighbors,
               const RcuCache& cache, const Matrix& grad_out, ResidualConvUnit& grad);

// ---------------------------------------------------------------------------
// Fusion blocks

/// Parameters of one input path (0 = skip, 1 = decoder) of a CAF block.
struct CafPath {
  SpeParams spe;
  LayerNorm norm;
  Linear wq;
  Linear wk;
  Linear wv;

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    spe.visit(prefix + "spe.", f);
    norm.visit(prefix + "norm.", f);
    wq.visit(prefix + "wq.", f);
    wk.visit(prefix + "wk.", f);
    wv.visit(prefix + "wv.", f);
  }
};

/// Cross attention fusion block:
///   X_i  = LN_i(F_i + zeta_i)
///   Att0 = MHA(Q_1, pool(K_0), pool(V_0)),  Att1 = MHA(Q_0, pool(K_1), pool(V_1))
///   S    = (X_0 + Att0) + (X_1 + Att1)
///   Z    = S + FFN(LN(S))
///   out  = RCU(Z)
struct CafParams {
  std::array<CafPath, 2> path;
  LayerNorm mid_norm;
  Ffn ffn;
  ResidualConvUnit rescon;
  int heads = 1;

  CafParams() = default;
  CafParams(std::size_t channels, int spe_dim, int heads, int ffn_expansion);

  std::size_t channels() const noexcept { return mid_norm.gamma.cols(); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    path[0].visit(prefix + "path0.", f);
    path[1].visit(prefix + "path1.", f);
    mid_norm.visit(prefix + "mid_norm.", f);
    ffn.visit(prefix + "ffn.", f);
    rescon.visit(prefix + "rescon.", f);
  }
};

struct CafPathCache {
  Matrix zeta_in;  // F_i + zeta_i
  LayerNormCache norm;
  Matrix x;       // X_i
  Matrix q;
  Matrix pooled;  // window means of X_i
  Matrix k;
  Matrix v;
};

struct CafCache {
  std::array<CafPathCache, 2> path;
  std::array<MultiHeadCache, 2> att;  // att[0] = Att0 (Q_1 vs path 0), att[1] = Att1
  Matrix sum;                         // S
  LayerNormCache mid_norm;
  Matrix mid;                         // LN(S)
  FfnCache ffn;
  RcuCache rescon;
};

struct FuseGrads {
  Matrix skip;     // d/dF0
  Matrix decoder;  // d/dF1
};

Matrix caf_forward(const CafParams& p, const LevelTopology& level, const Matrix& f0,
                   const Matrix& f1, CafCache* cache = nullptr);
FuseGrads caf_backward(const CafParams& p, const LevelTopology& level, const CafCache& cache,
                       const Matrix& grad_out, CafParams& grad);
/// Checks both tensors live on the same grid level as `level` with equal channels.
SphereTensor caf_forward(const CafParams& p, const LevelTopology& level, const SphereTensor& f0,
                         const SphereTensor& f1);

/// Base fusion: two residual conv units applied to F0 + F1.
struct BaseFuseParams {
  ResidualConvUnit rcu1;
  ResidualConvUnit rcu2;

  BaseFuseParams() = default;
  explicit BaseFuseParams(std::size_t channels) : rcu1(channels), rcu2(channels) {}

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    rcu1.visit(prefix + "rcu1.", f);
    rcu2.visit(prefix + "rcu2.", f);
  }
};

struct BaseFuseCache {
  RcuCache rcu1;
  RcuCache rcu2;
};

Matrix base_fuse(const BaseFuseParams& p, const LevelTopology& level, const Matrix& f0,
                 const Matrix& f1, BaseFuseCache* cache = nullptr);
FuseGrads base_fuse_backward(const BaseFuseParams& p, const LevelTopology& level,
                             const BaseFuseCache& cache, const Matrix& grad_out,
                             BaseFuseParams& grad);

// ---------------------------------------------------------------------------
// Nested resampling between hierarchy levels

/// Broadcasts each parent row to its 4 children on level+1 (plain copy when
/// the next level repeats the nside).
Matrix upsample_nested(const Matrix& x, const GridHierarchy& hierarchy, std::size_t level);
Matrix upsample_nested_bwd(const Matrix& grad_out, const GridHierarchy& hierarchy,
                           std::size_t level);
SphereTensor upsample_nested(const SphereTensor& x, const GridHierarchy& hierarchy,
                             std::size_t level);
/// Mean of the 4 children of each parent on level (from level+1).
Matrix downsample_mean(const Matrix& fine, const GridHierarchy& hierarchy, std::size_t level);

// ---------------------------------------------------------------------------
// Reference ERP encoder

/// Strided planar conv pyramid with GELU: a stride-2 stem followed by one
/// stride-2 stage per decoder level.
struct ToyEncoder {
  std::vector<PlanarConv> stages;

  ToyEncoder() = default;
  explicit ToyEncoder(const ModelConfig& config);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < stages.size(); ++i) {
      stages[i].visit(prefix + "stage" + std::to_string(i) + ".", f);
    }
  }
};

struct EncoderCache {
  std::vector<PlanarConvCache> convs;
  std::vector<ErpImage> pre_activation;
};

/// Feature rasters ordered fine to coarse (strides 4, 8, 16, ...).
std::vector<ErpImage> toy_encoder_forward(const ToyEncoder& p, const ErpImage& image,
                                          EncoderCache* cache = nullptr);
/// grad_features ordered like the forward output; returns d/d image.
ErpImage toy_encoder_backward(const ToyEncoder& p, const EncoderCache& cache,
                              const std::vector<ErpImage>& grad_features, ToyEncoder& grad);

// ---------------------------------------------------------------------------
// Full network

struct ModelParams {
  ToyEncoder encoder;
  std::vector<Linear> proj;          // per level: encoder channels -> D
  ResidualConvUnit coarse;           // refines the coarsest level
  std::vector<SphereConv> up;        // entry l-1 maps level l-1 -> l after broadcast
  std::vector<CafParams> caf;        // FUSION, entry l-1 fuses level l
  std::vector<BaseFuseParams> base;  // BASE, entry l-1 fuses level l
  SphereConv head;                   // finest D -> 1 log-depth

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    encoder.visit(prefix + "encoder.", f);
    for (std::size_t i = 0; i < proj.size(); ++i) proj[i].visit(prefix + "proj" + std::to_string(i) + ".", f);
    coarse.visit(prefix + "coarse.", f);
    for (std::size_t i = 0; i < up.size(); ++i) up[i].visit(prefix + "up" + std::to_string(i + 1) + ".", f);
    for (std::size_t i = 0; i < caf.size(); ++i) caf[i].visit(prefix + "caf" + std::to_string(i + 1) + ".", f);
    for (std::size_t i = 0; i < base.size(); ++i) base[i].visit(prefix + "base" + std::to_string(i + 1) + ".", f);
    head.visit(prefix + "head.", f);
  }
};

/// Zero-filled parameters with the shapes implied by config.
ModelParams make_model_shapes(const ModelConfig& config);
/// Deterministic random initialization.
ModelParams init_model(const ModelConfig& config, std::uint64_t seed);
std::size_t parameter_count(ModelParams& params);

/// Grid hierarchy plus per-level topology for a config.
class DecoderGeometry {
 public:
  explicit DecoderGeometry(const ModelConfig& config);

  const GridHierarchy& hierarchy() const noexcept { return hierarchy_; }
  const LevelTopology& level(std::size_t i) const { return levels_.at(i); }
  std::size_t size() const noexcept { return levels_.size(); }

 private:
  GridHierarchy hierarchy_;
  std::vector<LevelTopology> levels_;
};

/// Transfer tables binding an input raster size to the decoder levels.
struct ModelTables {
  int width = 0;
  int height = 0;
  std::vector<TransferTable> to_sphere;  // encoder raster of level l -> grid l
  TransferTable to_erp;                  // finest grid -> input raster
  TransferTable input_to_sphere;         // input raster -> finest grid (ground truth)
};

ModelTables build_model_tables(const ModelConfig& config, const DecoderGeometry& geometry,
                               int width, int height, int workers = 1);

struct ModelCache {
  EncoderCache encoder;
  std::vector<ErpImage> features;  // fine -> coarse
  std::vector<Matrix> sphere_features;
  std::vector<Matrix> skip;
  RcuCache coarse;
  std::vector<Matrix> upsampled;
  std::vector<SphereConvCache> up;
  std::vector<CafCache> caf;
  std::vector<BaseFuseCache> base;
  std::vector<Matrix> decoded;
  SphereConvCache head;
};

struct ModelOutput {
  Matrix log_depth;  // finest npix x 1
  DepthFrame depth;  // ERP raster, meters
};

/// Throws PreconditionError if tables do not match the config or image size.
ModelOutput model_forward(const ModelConfig& config, const DecoderGeometry& geometry,
                          const ModelTables& tables, const ModelParams& params,
                          const ErpImage& image, ModelCache* cache = nullptr);
/// Backpropagates d loss / d log_depth; returns d loss / d image.
ErpImage model_backward(const ModelConfig& config, const DecoderGeometry& geometry,
                        const ModelTables& tables, const ModelParams& params,
                        const ModelCache& cache, const Matrix& grad_log_depth, ModelParams& grad);

}  // namespace sphdepth

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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gradcheck.hpp"
#include "sphdepth/caf_decoder.hpp"
#include "sphdepth/error.hpp"

namespace sphdepth {
namespace {

using testing::frobenius_dot;
using testing::gradient_error;
using testing::random_matrix;

constexpr double kTol = 1e-6;

template <typename P>
void randomize(P& p, Rng& rng, double scale = 0.5) {
  p.visit("", [&](const std::string&, Matrix& m) {
    for (double& v : m.values()) v = rng.uniform(-scale, scale);
  });
}

/// Every parameter tensor of `p` checked against `g` under loss().
template <typename P>
double worst_param_error(P& p, P& g, const std::function<double()>& loss, std::size_t max_entries = 40) {
  const auto ps = collect_params(p);
  const auto gs = collect_params(g);
  double worst = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double e = gradient_error(*ps[i].matrix, *gs[i].matrix, loss, 1e-5, max_entries);
    EXPECT_LT(e, kTol) << ps[i].name;
    worst = std::max(worst, e);
  }
  return worst;
}

ModelConfig mini_config(Variant v = Variant::Fusion) {
  ModelConfig c;
  c.nsides = {1, 2, 4};
  c.channels = {8, 8, 8};
  c.variant = v;
  c.heads = 2;
  c.ffn_expansion = 2;
  c.encoder_stem = 4;
  c.gsa_offset = 1;
  return c;
}

TEST(Config, JsonRoundTrip) {
  ModelConfig c = mini_config();
  c.spe_coords = SpeCoords::LatLon;
  const ModelConfig back = ModelConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
}

TEST(Config, RejectsBadValues) {
  ModelConfig c = mini_config();
  c.nsides = {2, 8};
  c.channels = {8, 8};
  EXPECT_THROW(c.validate(), InvalidParameter);
  c = mini_config();
  c.heads = 3;
  EXPECT_THROW(c.validate(), InvalidParameter);
  EXPECT_THROW(ModelConfig::from_json("{\"bogus\": 1}"), InvalidParameter);
  EXPECT_THROW(ModelConfig::from_json("{\"nsides\": \"x\"}"), InvalidParameter);
}

TEST(Config, DefaultsMatchDocumentedLayout) {
  const ModelConfig c;
  EXPECT_EQ(c.nsides, (std::vector<int>{4, 8, 16, 32}));
  EXPECT_EQ(c.channels, (std::vector<int>{512, 320, 256, 256}));
  EXPECT_EQ(c.heads, 4);
  EXPECT_EQ(c.input_multiple(), 32);
}

TEST(Spe, EmbeddingIsLinearInCoordinates) {
  Rng rng(1);
  const auto grid = std::make_shared<const SphericalGrid>(2);
  SpeParams p(5, 3);
  p.c = random_matrix(5, 3, rng);
  const SphereTensor z = spe_embed(p, grid);
  for (std::int64_t i = 0; i < grid->npix(); ++i) {
    const Vec3& v = grid->center(i);
    for (std::size_t m = 0; m < 5; ++m) {
      EXPECT_NEAR(z.data(i, m), p.c(m, 0) * v.x + p.c(m, 1) * v.y + p.c(m, 2) * v.z, 1e-15);
    }
  }
}

TEST(Spe, CoordinateSubsetsHaveTwoColumns) {
  const SphericalGrid grid(1);
  for (auto c : {SpeCoords::XY, SpeCoords::YZ, SpeCoords::XZ, SpeCoords::LatLon}) {
    EXPECT_EQ(spe_features(grid.centers(), c).cols(), 2u);
  }
  const Matrix ll = spe_features(grid.centers(), SpeCoords::LatLon);
  for (std::size_t i = 0; i < ll.rows(); ++i) {
    EXPECT_LE(std::abs(ll(i, 0)), std::numbers::pi / 2);
    EXPECT_GE(ll(i, 1), 0.0);
    EXPECT_LT(ll(i, 1), 2 * std::numbers::pi);
  }
}

TEST(Spe, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  const SphericalGrid grid(2);
  const Matrix f = spe_features(grid.centers(), SpeCoords::XYZ);
  SpeParams p(4, 3);
  p.c = random_matrix(4, 3, rng);
  const Matrix r = random_matrix(48, 4, rng);
  SpeParams g(4, 3);
  spe_embed_bwd(f, r, g);
  EXPECT_LT(gradient_error(p.c, g.c, [&] { return frobenius_dot(spe_embed(p, f), r); }), kTol);
}

TEST(Gsa, RepresentativesAreWindowMeans) {
  Rng rng(3);
  const SphericalGrid grid(4);
  const Matrix x = random_matrix(192, 3, rng);
  const GridHierarchy h({4});
  const SphereTensor t(h.level_ptr(0), x);
  const Matrix reps = gsa_subsample(t, h, 0, 2);
  ASSERT_EQ(reps.rows(), 12u);
  for (std::size_t w = 0; w < 12; ++w) {
    for (std::size_t c = 0; c < 3; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < 16; ++k) s += x(16 * w + k, c);
      EXPECT_NEAR(reps(w, c), s / 16.0, 1e-15);
    }
  }
  EXPECT_THROW(gsa_subsample(t, h, 0, 3), InvalidParameter);
}

TEST(Gsa, BackwardIsAdjoint) {
  Rng rng(4);
  const SphericalGrid grid(4);
  const WindowPartition w = window_partition(grid, 1);
  const Matrix x = random_matrix(192, 2, rng);
  const Matrix y = random_matrix(static_cast<std::size_t>(w.n_windows), 2, rng);
  EXPECT_NEAR(frobenius_dot(gsa_subsample(x, w), y), frobenius_dot(x, gsa_subsample_bwd(y, w)), 1e-12);
}

TEST(Topology, WindowsAreThoseOfWindowPartition) {
  const SphericalGrid grid(8);
  const LevelTopology t = LevelTopology::from_grid(grid, 2, SpeCoords::XYZ);
  const WindowPartition w = window_partition(grid, 2);
  EXPECT_EQ(t.windows.window_of, w.window_of);
  EXPECT_EQ(t.windows.members, w.members);
}

TEST(Topology, OffsetIsClampedToGridDepth) {
  const SphericalGrid grid(2);
  const LevelTopology t = LevelTopology::from_grid(grid, 5, SpeCoords::XYZ);
  EXPECT_EQ(t.windows.offset, 1);
  EXPECT_EQ(t.windows.n_windows, 12);
}

TEST(Rcu, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  const SphericalGrid grid(2);
  ResidualConvUnit p(3);
  randomize(p, rng);
  Matrix x = random_matrix(48, 3, rng);
  const Matrix r = random_matrix(48, 3, rng);
  const auto nb = grid.neighbor_table();
  auto loss = [&] { return frobenius_dot(rcu_fwd(p, nb, x), r); };
  RcuCache cache;
  rcu_fwd(p, nb, x, &cache);
  ResidualConvUnit g = zeros_like(p);
  const Matrix gx = rcu_bwd(p, nb, cache, r, g);
  EXPECT_LT(gradient_error(x, gx, loss), kTol);
  worst_param_error(p, g, loss);
}

struct CafFixture {
  LevelTopology level;
  CafParams params;
  Matrix f0;
  Matrix f1;

  CafFixture(int nside, std::size_t channels, int heads, std::uint64_t seed)
      : level(LevelTopology::from_grid(SphericalGrid(nside), 1, SpeCoords::XYZ)),
        params(channels, 3, heads, 2) {
    Rng rng(seed);
    randomize(params, rng);
    f0 = random_matrix(level.npix(), channels, rng);
    f1 = random_matrix(level.npix(), channels, rng);
  }
};

TEST(Caf, GradientMatchesFiniteDifferences) {
  for (int heads : {1, 2}) {
    CafFixture fx(2, 4, heads, 6);
    Rng rng(7);
    const Matrix r = random_matrix(fx.level.npix(), 4, rng);
    auto loss = [&] { return frobenius_dot(caf_forward(fx.params, fx.level, fx.f0, fx.f1), r); };
    CafCache cache;
    caf_forward(fx.params, fx.level, fx.f0, fx.f1, &cache);
    CafParams g = zeros_like(fx.params);
    const FuseGrads fg = caf_backward(fx.params, fx.level, cache, r, g);
    EXPECT_LT(gradient_error(fx.f0, fg.skip, loss), kTol) << heads;
    EXPECT_LT(gradient_error(fx.f1, fg.decoder, loss), kTol) << heads;
    worst_param_error(fx.params, g, loss);
  }
}

TEST(Caf, PathSwapSymmetryIsExact) {
  CafFixture fx(2, 8, 2, 8);
  const Matrix out = caf_forward(fx.params, fx.level, fx.f0, fx.f1);
  CafParams swapped = fx.params;
  std::swap(swapped.path[0], swapped.path[1]);
  EXPECT_EQ(caf_forward(swapped, fx.level, fx.f1, fx.f0), out);
}

Matrix permute_rows(const Matrix& m, const std::vector<std::int32_t>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto src = m.row(i);
    std::copy(src.begin(), src.end(), out.row(static_cast<std::size_t>(perm[i])).begin());
  }
  return out;
}

// Rotation by 90 degrees about the polar axis: each base face moves to the
// next one in its ring, local face coordinates are kept.
std::vector<std::int32_t> quarter_turn(const SphericalGrid& grid) {
  std::vector<std::int32_t> perm(static_cast<std::size_t>(grid.npix()));
  for (std::int64_t p = 0; p < grid.npix(); ++p) {
    const FacePos f = grid.nest2xyf(p);
    const int face = (f.face / 4) * 4 + (f.face % 4 + 1) % 4;
    perm[static_cast<std::size_t>(p)] = static_cast<std::int32_t>(grid.xyf2nest(f.ix, f.iy, face));
  }
  return perm;
}

TEST(Caf, QuarterTurnIsAGridAutomorphism) {
  const SphericalGrid grid(2);
  const auto perm = quarter_turn(grid);
  const LevelTopology base = LevelTopology::from_grid(grid, 1, SpeCoords::XYZ);
  const LevelTopology moved = base.permuted(perm);
  for (std::int64_t p = 0; p < grid.npix(); ++p) {
    EXPECT_EQ(moved.neighbors[static_cast<std::size_t>(p)], grid.neighbors8(p)) << p;
    const Vec3 a = grid.center(p);
    const Vec3 b = grid.center(perm[static_cast<std::size_t>(p)]);
    EXPECT_NEAR(a.z, b.z, 1e-15);
    EXPECT_NEAR(b.x, -a.y, 1e-12);
    EXPECT_NEAR(b.y, a.x, 1e-12);
  }
  // Same partition of the pixels into windows.
  std::set<std::set<std::int32_t>> lhs;
  std::set<std::set<std::int32_t>> rhs;
  const auto ws = static_cast<std::size_t>(base.windows.window_size);
  for (std::int64_t w = 0; w < base.windows.n_windows; ++w) {
    const auto o = static_cast<std::size_t>(w) * ws;
    lhs.insert({moved.windows.members.begin() + o, moved.windows.members.begin() + o + ws});
    rhs.insert({base.windows.members.begin() + o, base.windows.members.begin() + o + ws});
  }
  EXPECT_EQ(lhs, rhs);
}

TEST(Caf, PermutationEquivarianceIsExact) {
  CafFixture fx(2, 8, 2, 9);
  const Matrix out = caf_forward(fx.params, fx.level, fx.f0, fx.f1);
  std::vector<std::vector<std::int32_t>> perms{quarter_turn(SphericalGrid(2))};
  std::vector<std::int32_t> shuffled(fx.level.npix());
  for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i] = static_cast<std::int32_t>(i);
  Rng rng(10);
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    std::swap(shuffled[i - 1], shuffled[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  }
  perms.push_back(shuffled);
  for (const auto& perm : perms) {
    const LevelTopology moved = fx.level.permuted(perm);
    const Matrix got = caf_forward(fx.params, moved, permute_rows(fx.f0, perm), permute_rows(fx.f1, perm));
    EXPECT_EQ(got, permute_rows(out, perm));
  }
}

TEST(Caf, ZeroCompensationReducesToSumPath) {
  CafFixture fx(2, 4, 2, 11);
  CafParams p = fx.params;
  for (auto& path : p.path) {
    path.spe.c.fill(0.0);
    path.norm = LayerNorm(4);
    path.wq.weight.fill(0.0);
    path.wk.weight.fill(0.0);
    path.wv.weight.fill(0.0);
  }
  p.ffn = zeros_like(p.ffn);
  const Matrix got = caf_forward(p, fx.level, fx.f0, fx.f1);
  const LayerNorm ln(4);
  const Matrix sum = layer_norm_fwd(ln, fx.f0) + layer_norm_fwd(ln, fx.f1);
  const Matrix want = rcu_fwd(p.rescon, fx.level.neighbors, sum);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.data()[i], want.data()[i], 1e-14);
}

TEST(Caf, RejectsMismatchedLevels) {
  CafFixture fx(2, 4, 2, 12);
  const GridHierarchy h({2, 4});
  const SphereTensor a(h.level_ptr(0), fx.f0);
  const SphereTensor b(h.level_ptr(1), Matrix(192, 4));
  EXPECT_THROW(caf_forward(fx.params, fx.level, a, b), ShapeError);
  EXPECT_THROW(caf_forward(fx.params, fx.level, fx.f0, Matrix(48, 5)), ShapeError);
}

TEST(BaseFuse, GradientMatchesFiniteDifferences) {
  Rng rng(13);
  const LevelTopology level = LevelTopology::from_grid(SphericalGrid(2), 1, SpeCoords::XYZ);
  BaseFuseParams p(3);
  randomize(p, rng);
  Matrix f0 = random_matrix(48, 3, rng);
  Matrix f1 = random_matrix(48, 3, rng);
  const Matrix r = random_matrix(48, 3, rng);
  auto loss = [&] { return frobenius_dot(base_fuse(p, level, f0, f1), r); };
  BaseFuseCache cache;
  base_fuse(p, level, f0, f1, &cache);
  BaseFuseParams g = zeros_like(p);
  const FuseGrads fg = base_fuse_backward(p, level, cache, r, g);
  EXPECT_LT(gradient_error(f0, fg.skip, loss), kTol);
  EXPECT_LT(gradient_error(f1, fg.decoder, loss), kTol);
  worst_param_error(p, g, loss);
}

TEST(Upsample, BroadcastsToNestedChildren) {
  Rng rng(14);
  const GridHierarchy h({2, 4, 4});
  const Matrix x = random_matrix(48, 2, rng);
  const Matrix up = upsample_nested(x, h, 0);
  ASSERT_EQ(up.rows(), 192u);
  for (std::int64_t p = 0; p < 48; ++p) {
    for (auto c : h.children(0, p)) EXPECT_EQ(up(c, 1), x(p, 1));
  }
  EXPECT_EQ(downsample_mean(up, h, 0), x);
  EXPECT_EQ(upsample_nested(up, h, 1), up);
  const Matrix y = random_matrix(192, 2, rng);
  EXPECT_NEAR(frobenius_dot(up, y), frobenius_dot(x, upsample_nested_bwd(y, h, 0)), 1e-12);
  EXPECT_THROW(upsample_nested(x, h, 2), InvalidParameter);
}

TEST(Encoder, FeatureRasterSizes) {
  ModelConfig c;
  c.channels = {8, 8, 8, 8};
  c.encoder_stem = 4;
  const ToyEncoder enc(c);
  const ErpImage img(256, 128, 3, 0.5);
  const auto f = toy_encoder_forward(enc, img);
  ASSERT_EQ(f.size(), 4u);
  const int widths[] = {64, 32, 16, 8};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(f[i].width, widths[i]);
    EXPECT_EQ(f[i].height, widths[i] / 2);
    EXPECT_EQ(f[i].channels(), 8);
  }
  EXPECT_THROW(toy_encoder_forward(enc, ErpImage(240, 120, 3)), InvalidParameter);
}

TEST(Encoder, ChannelsFollowTheLevelTheyFeed) {
  ModelConfig c = mini_config();
  c.channels = {12, 10, 8};
  const auto f = toy_encoder_forward(ToyEncoder(c), ErpImage(32, 16, 3, 0.1));
  EXPECT_EQ(f[0].channels(), 8);
  EXPECT_EQ(f[1].channels(), 10);
  EXPECT_EQ(f[2].channels(), 12);
}

TEST(Encoder, ShiftByCoarsestStrideShiftsEveryFeature) {
  const ModelConfig c = mini_config();
  ToyEncoder enc(c);
  Rng rng(15);
  randomize(enc, rng);
  ErpImage img(64, 16, 3);
  img.pixels = random_matrix(64 * 16, 3, rng);
  ErpImage shifted = img;
  const int shift = 16;
  for (int v = 0; v < 16; ++v) {
    for (int u = 0; u < 64; ++u) {
      for (int ch = 0; ch < 3; ++ch) shifted.at((u + shift) % 64, v, ch) = img.at(u, v, ch);
    }
  }
  const auto a = toy_encoder_forward(enc, img);
  const auto b = toy_encoder_forward(enc, shifted);
  for (std::size_t s = 0; s < a.size(); ++s) {
    const int k = shift * a[s].width / 64;
    for (int v = 0; v < a[s].height; ++v) {
      for (int u = 0; u < a[s].width; ++u) {
        for (int ch = 0; ch < a[s].channels(); ++ch) {
          EXPECT_EQ(b[s].at((u + k) % a[s].width, v, ch), a[s].at(u, v, ch));
        }
      }
    }
  }
}

TEST(Encoder, GradientMatchesFiniteDifferences) {
  const ModelConfig c = mini_config();
  ToyEncoder enc(c);
  Rng rng(16);
  randomize(enc, rng);
  ErpImage img(32, 16, 3);
  img.pixels = random_matrix(32 * 16, 3, rng);
  EncoderCache cache;
  const auto f = toy_encoder_forward(enc, img, &cache);
  std::vector<Matrix> r;
  for (const auto& x : f) r.push_back(random_matrix(x.pixels.rows(), x.pixels.cols(), rng));
  auto loss = [&] {
    const auto y = toy_encoder_forward(enc, img);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += frobenius_dot(y[i].pixels, r[i]);
    return s;
  };
  std::vector<ErpImage> gf;
  for (std::size_t i = 0; i < f.size(); ++i) {
    ErpImage e = f[i];
    e.pixels = r[i];
    gf.push_back(e);
  }
  ToyEncoder g = zeros_like(enc);
  const ErpImage gi = toy_encoder_backward(enc, cache, gf, g);
  EXPECT_LT(gradient_error(img.pixels, gi.pixels, loss, 1e-5, 200), kTol);
  worst_param_error(enc, g, loss);
}

struct MiniModel {
  ModelConfig config;
  DecoderGeometry geometry;
  ModelTables tables;
  ModelParams params;

  explicit MiniModel(ModelConfig c, std::uint64_t seed = 17, int width = 32, int height = 16)
      : config(c), geometry(c), tables(build_model_tables(c, geometry, width, height)),
        params(init_model(c, seed)) {}
};

TEST(Model, GradientMatchesFiniteDifferences) {
  for (auto variant : {Variant::Fusion, Variant::Base}) {
    MiniModel m(mini_config(variant));
    Rng rng(18);
    randomize(m.params, rng, 0.3);
    ErpImage img(32, 16, 3);
    img.pixels = random_matrix(32 * 16, 3, rng);
    ModelCache cache;
    const ModelOutput out = model_forward(m.config, m.geometry, m.tables, m.params, img, &cache);
    const Matrix r = random_matrix(out.log_depth.rows(), 1, rng);
    auto loss = [&] {
      return frobenius_dot(model_forward(m.config, m.geometry, m.tables, m.params, img).log_depth, r);
    };
    ModelParams g = zeros_like(m.params);
    const ErpImage gi = model_backward(m.config, m.geometry, m.tables, m.params, cache, r, g);
    EXPECT_LT(gradient_error(img.pixels, gi.pixels, loss, 1e-5, 100), 5e-4);
    const auto ps = collect_params(m.params);
    const auto gs = collect_params(g);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      EXPECT_LT(gradient_error(*ps[i].matrix, *gs[i].matrix, loss, 1e-5, 12), 5e-4) << ps[i].name;
    }
  }
}

TEST(Model, OutputMatchesInputSizeAndIsPositive) {
  MiniModel m(mini_config());
  const ErpImage img(32, 16, 3, 0.4);
  const ModelOutput out = model_forward(m.config, m.geometry, m.tables, m.params, img);
  EXPECT_EQ(out.depth.width, 32);
  EXPECT_EQ(out.depth.height, 16);
  EXPECT_EQ(out.log_depth.rows(), 192u);
  for (double d : out.depth.depth) EXPECT_GT(d, 0.0);
}

TEST(Model, LevelsCarryConfiguredChannels) {
  ModelConfig c = mini_config();
  c.channels = {8, 6, 4};
  c.heads = 2;
  MiniModel m(c);
  ModelCache cache;
  model_forward(m.config, m.geometry, m.tables, m.params, ErpImage(32, 16, 3, 0.2), &cache);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_EQ(cache.decoded[l].cols(), static_cast<std::size_t>(c.channels[l]));
    EXPECT_EQ(static_cast<std::int64_t>(cache.decoded[l].rows()), m.geometry.hierarchy().level(l).npix());
  }
}

TEST(Model, MissingTablesArePreconditionErrors) {
  MiniModel m(mini_config());
  const ErpImage img(32, 16, 3, 0.4);
  ModelTables empty;
  empty.width = 32;
  empty.height = 16;
  EXPECT_THROW(model_forward(m.config, m.geometry, empty, m.params, img), PreconditionError);
  EXPECT_THROW(model_forward(m.config, m.geometry, m.tables, m.params, ErpImage(64, 32, 3)), PreconditionError);
  EXPECT_THROW(build_model_tables(m.config, m.geometry, 40, 20), InvalidParameter);
}

TEST(Model, RepeatedLevelIsSupported) {
  ModelConfig c = mini_config();
  c.nsides = {1, 2, 2};
  MiniModel m(c);
  const ModelOutput out = model_forward(m.config, m.geometry, m.tables, m.params, ErpImage(32, 16, 3, 0.3));
  EXPECT_EQ(out.log_depth.rows(), 48u);
}

TEST(Model, SeamJumpsLookLikeInteriorJumps) {
  // The ERP output is a resampling of a field on a closed sphere, so the
  // wrap-around column pair should not stand out.
  std::vector<double> ratios;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    MiniModel m(mini_config(), 100 + seed, 64, 32);
    Rng rng(200 + seed);
    randomize(m.params, rng, 0.3);
    ErpImage img(64, 32, 3);
    img.pixels = random_matrix(64 * 32, 3, rng, 0.5);
    for (double& v : img.pixels.values()) v += 0.5;
    const DepthFrame d = model_forward(m.config, m.geometry, m.tables, m.params, img).depth;
    auto jump = [&](int u0, int u1) {
      double s = 0.0;
      for (int v = 0; v < d.height; ++v) {
        s += std::abs(d.depth[static_cast<std::size_t>(v) * d.width + u0] -
                      d.depth[static_cast<std::size_t>(v) * d.width + u1]);
      }
      return s / d.height;
    };
    double interior = 0.0;
    for (int u = 0; u + 1 < d.width; ++u) interior += jump(u, u + 1);
    interior /= d.width - 1;
    ratios.push_back(jump(d.width - 1, 0) / interior);
  }
  std::sort(ratios.begin(), ratios.end());
  EXPECT_LT(0.5 * (ratios[9] + ratios[10]), 2.0);
}

TEST(Model, InitIsDeterministic) {
  ModelParams a = init_model(mini_config(), 5);
  ModelParams b = init_model(mini_config(), 5);
  ModelParams c = init_model(mini_config(), 6);
  const auto pa = collect_params(a);
  const auto pb = collect_params(b);
  const auto pc = collect_params(c);
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(*pa[i].matrix, *pb[i].matrix);
    differs = differs || !(*pa[i].matrix == *pc[i].matrix);
  }
  EXPECT_TRUE(differs);
}

}  // namespace
}  // namespace sphdepth

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

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "gradcheck.hpp"
#include "sphdepth/erp_transfer.hpp"
#include "sphdepth/error.hpp"

namespace sphdepth {
namespace {

using testing::frobenius_dot;
using testing::random_matrix;

constexpr double kPi = std::numbers::pi;

ErpImage smooth_field(int w, int h) {
  ErpImage img(w, h, 1);
  for (int v = 0; v < h; ++v) {
    const double theta = kPi * (v + 0.5) / h;
    for (int u = 0; u < w; ++u) {
      const double phi = 2 * kPi * (u + 0.5) / w;
      img.at(u, v, 0) = 0.5 + 0.5 * std::sin(phi) * std::sin(theta);
    }
  }
  return img;
}

TEST(ForwardTable, RowsAreConvexCombinations) {
  const SphericalGrid g(8);
  const TransferTable t = build_forward_table(g, 64, 32);
  EXPECT_EQ(t.rows.size(), 768u);
  EXPECT_EQ(t.source_size(), 64u * 32u);
  const TableCheck c = check_table(t);
  EXPECT_EQ(c.bad_rows, 0u);
  EXPECT_LT(c.max_sum_error, 1e-6);
}

TEST(ForwardTable, FullResolutionRowCount) {
  const SphericalGrid g(32);
  const TransferTable t = build_forward_table(g, 1024, 512, 0.0, 2);
  EXPECT_EQ(t.rows.size(), 12288u);
  EXPECT_EQ(check_table(t).bad_rows, 0u);
}

// Bilinear weights reproduce any field affine in the raster coordinates,
// away from the seam and the clamped polar rows.
TEST(ForwardTable, ReproducesAffineFields) {
  const int w = 128;
  const int h = 64;
  const SphericalGrid g(16);
  const TransferTable t = build_forward_table(g, w, h);
  Matrix f(static_cast<std::size_t>(w) * h, 2);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      f(static_cast<std::size_t>(v) * w + u, 0) = u;
      f(static_cast<std::size_t>(v) * w + u, 1) = v;
    }
  }
  const Matrix s = resample(t, f);
  int checked = 0;
  for (std::int64_t i = 0; i < g.npix(); ++i) {
    const Angles a = g.pix2ang(i);
    const double x = a.longitude * w / (2 * kPi) - 0.5;
    const double y = a.colatitude * h / kPi - 0.5;
    if (y >= 0.0 && y <= h - 1.0) {
      EXPECT_NEAR(s(i, 1), y, 1e-5) << i;
      ++checked;
    }
    if (x >= 0.0 && x <= w - 1.0) {
      EXPECT_NEAR(s(i, 0), x, 1e-4) << i;
    }
  }
  EXPECT_GT(checked, 3000);
}

TEST(ForwardTable, ConstantFieldIsPreserved) {
  const SphericalGrid g(4);
  const TransferTable t = build_forward_table(g, 32, 16);
  const Matrix s = resample(t, Matrix(32 * 16, 3, 0.25));
  for (double v : s.values()) EXPECT_NEAR(v, 0.25, 1e-7);
}

TEST(InverseTable, TapsIncludeContainingPixel) {
  const SphericalGrid g(8);
  const int w = 64;
  const int h = 32;
  const TransferTable t = build_inverse_table(g, w, h);
  EXPECT_EQ(t.rows.size(), static_cast<std::size_t>(w * h));
  EXPECT_EQ(check_table(t).bad_rows, 0u);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const auto pix = g.ang2pix(kPi * (v + 0.5) / h, 2 * kPi * (u + 0.5) / w);
      const TapRow& row = t.rows[static_cast<std::size_t>(v) * w + u];
      bool found = false;
      for (const Tap& tap : row) found = found || tap.index == pix;
      EXPECT_TRUE(found) << u << "," << v;
    }
  }
}

TEST(Resample, AdjointIdentity) {
  Rng rng(5);
  const SphericalGrid g(4);
  for (const auto& t : {build_forward_table(g, 32, 16), build_inverse_table(g, 32, 16)}) {
    const Matrix x = random_matrix(t.source_size(), 3, rng);
    const Matrix y = random_matrix(t.target_size(), 3, rng);
    const double lhs = frobenius_dot(resample(t, x), y);
    const double rhs = frobenius_dot(x, resample_adjoint(t, y));
    EXPECT_NEAR(lhs, rhs, 1e-12 * (std::abs(lhs) + 1.0));
  }
}

TEST(Resample, WorkerCountDoesNotChangeResult) {
  Rng rng(6);
  const SphericalGrid g(8);
  const TransferTable t = build_forward_table(g, 64, 32);
  EXPECT_EQ(build_forward_table(g, 64, 32, 0.0, 3), t);
  const Matrix x = random_matrix(64 * 32, 4, rng);
  EXPECT_EQ(resample(t, x, 1), resample(t, x, 4));
}

TEST(Resample, RejectsMismatchedInputs) {
  const SphericalGrid g(4);
  auto gp = std::make_shared<const SphericalGrid>(8);
  const TransferTable fwd = build_forward_table(g, 32, 16);
  const TransferTable inv = build_inverse_table(g, 32, 16);
  EXPECT_THROW(resample(fwd, Matrix(10, 1)), ShapeError);
  EXPECT_THROW(resample_adjoint(fwd, Matrix(10, 1)), ShapeError);
  EXPECT_THROW(resample(fwd, ErpImage(64, 32, 1), gp), ShapeError);
  EXPECT_THROW(resample(fwd, ErpImage(32, 16, 1), gp), ShapeError);
  EXPECT_THROW(resample(inv, ErpImage(32, 16, 1), gp), ShapeError);
  EXPECT_THROW(build_forward_table(g, 0, 16), InvalidParameter);
  EXPECT_THROW(build_forward_table(g, 32, 16, std::nan("")), InvalidParameter);
}

TEST(Roundtrip, ErrorShrinksAsGridRefines) {
  const ErpImage img = smooth_field(512, 256);
  const GridHierarchy h({8, 16, 32});
  double prev = 1e9;
  for (std::size_t l = 0; l < 3; ++l) {
    const RoundtripReport r = roundtrip_report(img, h, l);
    EXPECT_LT(r.mae, prev) << r.nside;
    EXPECT_EQ(r.band_mae.size(), 8u);
    prev = r.mae;
  }
  EXPECT_LT(prev, 0.01);
}

TEST(Roundtrip, SeamIsNoWorseThanInterior) {
  const ErpImage img = smooth_field(512, 256);
  const auto grid = std::make_shared<const SphericalGrid>(16);
  const SphereTensor s = resample(build_forward_table(*grid, 512, 256), img, grid);
  const ErpImage back = resample(build_inverse_table(*grid, 512, 256), s);
  double seam = 0.0;
  double interior = 0.0;
  for (int v = 0; v < 256; ++v) {
    seam = std::max(seam, std::abs(back.at(0, v, 0) - back.at(511, v, 0)));
    for (int u = 0; u + 1 < 512; ++u) {
      interior = std::max(interior, std::abs(back.at(u + 1, v, 0) - back.at(u, v, 0)));
    }
  }
  EXPECT_LE(seam, interior);
}

TEST(TableFile, RoundTrip) {
  const SphericalGrid g(4);
  for (const auto& t : {build_forward_table(g, 32, 16), build_inverse_table(g, 32, 16)}) {
    std::stringstream buf;
    t.save(buf);
    EXPECT_EQ(buf.str().substr(0, 8), std::string("SPHLUT1\0", 8));
    EXPECT_EQ(TransferTable::load(buf), t);
  }
}

TEST(TableFile, RejectsCorruption) {
  const SphericalGrid g(2);
  std::stringstream buf;
  build_forward_table(g, 8, 4).save(buf);
  const std::string bytes = buf.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(TransferTable::load(truncated), IoError);
  std::string bad_dir = bytes;
  bad_dir[12] = 7;
  std::stringstream s2(bad_dir);
  EXPECT_THROW(TransferTable::load(s2), IoError);
  std::stringstream s3("garbage!");
  EXPECT_THROW(TransferTable::load(s3), IoError);
}

TEST(TableCache, StoresAndReloads) {
  const auto dir = std::filesystem::temp_directory_path() / "sphdepth_cache_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  ::setenv("SPHERE_CACHE_DIR", dir.c_str(), 1);
  const SphericalGrid g(4);
  const TransferTable a = cached_table(TransferDirection::PlaneToSphere, g, 32, 16);
  EXPECT_FALSE(std::filesystem::is_empty(dir));
  const TransferTable b = cached_table(TransferDirection::PlaneToSphere, g, 32, 16);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, build_forward_table(g, 32, 16));
  const TransferTable c = cached_table(TransferDirection::SphereToPlane, g, 32, 16);
  EXPECT_EQ(c, build_inverse_table(g, 32, 16));
  ::unsetenv("SPHERE_CACHE_DIR");
  std::filesystem::remove_all(dir);
}

TEST(PixelCounts, MapToNsides) {
  EXPECT_EQ(nsides_from_pixel_counts({48, 192, 768, 3072}), (std::vector<int>{2, 4, 8, 16}));
  EXPECT_EQ(nsides_from_pixel_counts({768, 3072, 12288, 12288}), (std::vector<int>{8, 16, 32, 32}));
  EXPECT_THROW(nsides_from_pixel_counts({100}), InvalidParameter);
}

}  // namespace
}  // namespace sphdepth

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
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>

#include "sphdepth/error.hpp"
#include "sphdepth/random.hpp"
#include "sphdepth/synth_data.hpp"

namespace sphdepth {
namespace {

bool inside_box(const Vec3& p, const Vec3& c, const Vec3& h) {
  return std::abs(p.x - c.x) < h.x && std::abs(p.y - c.y) < h.y && std::abs(p.z - c.z) < h.z;
}

// Free space: inside the room, outside every obstacle.
bool free_point(const BoxScene& s, const Vec3& p) {
  if (!inside_box(p, {}, s.half_extents)) return false;
  for (const auto& o : s.obstacles) {
    if (inside_box(p, o.center, o.half_extents)) return false;
  }
  return true;
}

// Dense march followed by bisection on the free-space indicator.
double march(const BoxScene& s, const Vec3& o, const Vec3& d) {
  const double step = 1e-3;
  double t = 0.0;
  while (free_point(s, o + t * d)) t += step;
  double lo = t - step;
  double hi = t;
  for (int k = 0; k < 40; ++k) {
    const double mid = 0.5 * (lo + hi);
    (free_point(s, o + mid * d) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Vec3 random_unit(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2 * std::numbers::pi);
  const double r = std::sqrt(1.0 - z * z);
  return {r * std::cos(phi), r * std::sin(phi), z};
}

TEST(Trace, CenteredCubeDistances) {
  BoxScene s;
  const double r3 = 1.0 / std::sqrt(3.0);
  for (const Vec3& d : {Vec3{1, 0, 0}, Vec3{-1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, -1, 0}, Vec3{0, 0, 1},
                        Vec3{0, 0, -1}}) {
    EXPECT_NEAR(trace(s, s.camera, d).distance, 1.0, 1e-15);
  }
  EXPECT_NEAR(trace(s, s.camera, {r3, r3, r3}).distance, std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(trace(s, s.camera, {-r3, r3, -r3}).distance, std::sqrt(3.0), 1e-12);
}

TEST(Trace, HitPointsLieOnTheirFace) {
  Rng rng(1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const BoxScene s = random_scene(seed);
    for (int k = 0; k < 200; ++k) {
      const Hit h = trace(s, s.camera, random_unit(rng));
      ASSERT_GE(h.surface, 0);
      const int face = h.surface < 6 ? h.surface : (h.surface - 6) % 6;
      const Vec3 c = h.surface < 6 ? Vec3{} : s.obstacles[(h.surface - 6) / 6].center;
      const Vec3 e = h.surface < 6 ? s.half_extents : s.obstacles[(h.surface - 6) / 6].half_extents;
      const double sign = face % 2 == 0 ? -1.0 : 1.0;
      const double coord[3] = {h.point.x - c.x, h.point.y - c.y, h.point.z - c.z};
      const double ext[3] = {e.x, e.y, e.z};
      EXPECT_NEAR(coord[face / 2], sign * ext[face / 2], 1e-9);
      EXPECT_NEAR(norm(h.point - s.camera), h.distance, 1e-9);
    }
  }
}

TEST(Trace, AgreesWithRayMarchOracle) {
  Rng rng(2);
  int rays = 0;
  for (std::uint64_t seed = 100; rays < 1000; ++seed) {
    const BoxScene s = random_scene(seed);
    for (int k = 0; k < 50; ++k, ++rays) {
      const Vec3 d = random_unit(rng);
      EXPECT_NEAR(trace(s, s.camera, d).distance, march(s, s.camera, d), 1e-4) << seed;
    }
  }
}

TEST(Render, DepthIsPositiveAndBounded) {
  const BoxScene s = random_scene(5);
  const Render r = render_erp(s, 64, 32);
  const double diag = 2.0 * norm(s.half_extents);
  for (double d : r.depth.depth) {
    EXPECT_GT(d, 0.0);
    EXPECT_LE(d, diag);
  }
  for (double c : r.color.pixels.values()) {
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(Render, RotationConsistency) {
  BoxScene s = random_scene(6);
  const double n = std::sqrt(0.09 + 0.25 + 0.81 * 0.81);
  s.rotation = axis_angle({0.3 / n, -0.5 / n, 0.81 / n}, 0.7);
  const Render rotated = render_erp(s, 48, 24);
  BoxScene plain = s;
  plain.rotation = Mat3::identity();
  for (int v = 0; v < 24; ++v) {
    for (int u = 0; u < 48; ++u) {
      const Vec3 d = pixel_direction(s, 48, 24, u, v);
      EXPECT_NEAR(rotated.depth.depth[static_cast<std::size_t>(v) * 48 + u],
                  trace(plain, plain.camera, d).distance, 1e-12);
    }
  }
}

TEST(Render, RejectsInvalidScenes) {
  BoxScene s;
  s.camera = {2.0, 0.0, 0.0};
  EXPECT_THROW(s.validate(), InvalidScene);
  EXPECT_THROW(render_erp(s, 8, 4), InvalidScene);
  BoxScene t;
  t.obstacles.push_back({{0, 0, 0}, {0.2, 0.2, 0.2}, {}});
  EXPECT_THROW(t.validate(), InvalidScene);
  BoxScene u;
  u.rotation.m[0][0] = 1.1;
  EXPECT_THROW(u.validate(), InvalidScene);
}

TEST(Scene, JsonRoundTrip) {
  BoxScene s = random_scene(7);
  s.rotation = s.rotation * tilt_rotation(3.0);
  const BoxScene back = BoxScene::from_json(s.to_json());
  EXPECT_EQ(back.half_extents, s.half_extents);
  EXPECT_EQ(back.camera, s.camera);
  EXPECT_EQ(back.obstacles.size(), s.obstacles.size());
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(back.rotation.m[i][j], s.rotation.m[i][j], 1e-12);
  }
  EXPECT_THROW(BoxScene::from_json("{\"camera\": 3}"), InvalidScene);
}

TEST(RandomScene, ClearanceAndDeterminism) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const BoxScene s = random_scene(seed);
    EXPECT_NO_THROW(s.validate());
    EXPECT_GE(camera_clearance(s), kCameraClearance);
    EXPECT_LE(s.obstacles.size(), 3u);
    for (double e : {s.half_extents.x, s.half_extents.y, s.half_extents.z}) {
      EXPECT_GE(2 * e, 2.0);
      EXPECT_LE(2 * e, 8.0);
    }
  }
  EXPECT_EQ(random_scene(42).to_json(), random_scene(42).to_json());
  EXPECT_NE(random_scene(42).to_json(), random_scene(43).to_json());
}

TEST(Tilt, ZeroTiltIsIdentical) {
  const BoxScene s = random_scene(8);
  const auto set = render_tilted_set(s, {0.0, 2.0, 5.0}, 32, 16);
  const Render plain = render_erp(s, 32, 16);
  ASSERT_EQ(set.size(), 3u);
  EXPECT_EQ(set[0].depth.depth, plain.depth.depth);
  EXPECT_EQ(set[0].color.pixels, plain.color.pixels);
  EXPECT_NE(set[2].depth.depth, plain.depth.depth);
}

TEST(Tilt, PreservesGeometry) {
  const BoxScene s = random_scene(9);
  const Mat3 t = tilt_rotation(5.0);
  const Mat3 tt = t * t.transposed();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(tt.m[i][j], i == j ? 1.0 : 0.0, 1e-15);
  }
  const Vec3 y_axis{0, 1, 0};
  EXPECT_EQ(t * y_axis, y_axis);
  const Render r = render_tilted_set(s, {5.0}, 64, 32)[0];
  const double diag = 2.0 * norm(s.half_extents);
  const double lo = camera_clearance(s);
  for (double d : r.depth.depth) {
    EXPECT_GE(d, lo - 1e-12);
    EXPECT_LE(d, diag);
  }
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Dataset, SameSeedGivesIdenticalFiles) {
  const auto root = std::filesystem::temp_directory_path() / "sphdepth_ds_test";
  std::filesystem::remove_all(root);
  const auto a = write_dataset(root / "a", 3, 3, 2, 32, 16);
  write_dataset(root / "b", 3, 3, 2, 32, 16, {}, 2);
  ASSERT_EQ(a.entries.size(), 5u);
  EXPECT_EQ(a.split("train").size(), 3u);
  EXPECT_EQ(a.split("test").size(), 2u);
  for (const auto& f : std::filesystem::directory_iterator(root / "a")) {
    EXPECT_EQ(slurp(f.path()), slurp(root / "b" / f.path().filename())) << f.path();
  }
  const DatasetManifest m = load_manifest(root / "a" / "manifest.json");
  EXPECT_EQ(m.width, 32);
  EXPECT_EQ(m.tilt_axis, "pitch");
  EXPECT_EQ(m.entries[4].split, "test");
  EXPECT_TRUE(std::filesystem::exists(m.entries[0].depth));
  EXPECT_THROW(write_dataset(root / "c", 3, 0, 0, 32, 16), InvalidParameter);
  std::filesystem::remove_all(root);
}

TEST(Dataset, FullSizeRenderBudget) {
  const auto root = std::filesystem::temp_directory_path() / "sphdepth_ds_budget";
  std::filesystem::remove_all(root);
  const auto t0 = std::chrono::steady_clock::now();
  write_dataset(root, 1, 128, 32, 256, 128);
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(sec, 120.0);
  std::filesystem::remove_all(root);
}

}  // namespace
}  // namespace sphdepth

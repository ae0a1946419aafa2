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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sphdepth/depth_eval.hpp"
#include "sphdepth/geometry.hpp"
#include "sphdepth/sphere_tensor.hpp"

namespace sphdepth {

/// Axis-aligned box inside the room.
struct Obstacle {
  Vec3 center;
  Vec3 half_extents;
  Vec3 albedo{0.5, 0.5, 0.5};
};

/// Axis-aligned room centered at the origin, z up. `rotation` maps camera
/// directions to world directions.
struct BoxScene {
  Vec3 half_extents{1.0, 1.0, 1.0};
  Vec3 camera;
  Mat3 rotation = Mat3::identity();
  std::array<Vec3, 6> face_albedo{};  // -x, +x, -y, +y, -z, +z
  std::vector<Obstacle> obstacles;

  /// Throws InvalidScene if the camera is not strictly inside the room and
  /// outside every obstacle, or the rotation is not orthonormal.
  void validate() const;

  /// {half_extents, camera, rotation (quaternion w,x,y,z), face_albedo, obstacles}
  std::string to_json() const;
  static BoxScene from_json(const std::string& text);
};

/// Nearest intersection along a ray. surface 0..5 are the room faces in
/// face_albedo order; 6 + 6*k + f is face f of obstacle k.
struct Hit {
  double distance = 0.0;
  int surface = -1;
  Vec3 point;
  Vec3 normal;  // facing the ray origin
  Vec3 albedo;
};

/// `direction` must be a unit vector in world coordinates.
Hit trace(const BoxScene& scene, const Vec3& origin, const Vec3& direction);

/// Fixed world-space light direction used for shading.
Vec3 light_direction();

struct Render {
  ErpImage color;    // 3 channels in [0, 1]
  DepthFrame depth;  // ray length in meters
};

/// Ray-length depth and Lambert-shaded color for every pixel center.
Render render_erp(const BoxScene& scene, int width, int height, DepthRange range = {},
                  int workers = 1);

/// Applies the precision loss of the dataset files (8-bit color, f32 depth)
/// so in-memory renders match renders read back from disk.
void quantize_for_storage(Render& render);

/// World direction of ERP pixel (u, v) for the scene's camera rotation.
Vec3 pixel_direction(const BoxScene& scene, int width, int height, int u, int v);

/// Camera pitch (rotation about the camera's y axis) by `degrees`.
Mat3 tilt_rotation(double degrees);
BoxScene tilted(const BoxScene& scene, double degrees);
std::vector<Render> render_tilted_set(const BoxScene& scene, const std::vector<double>& degrees,
                                      int width, int height, DepthRange range = {},
                                      int workers = 1);

/// Random indoor-like room: floor span 3-8 m, ceiling 2.4-3.2 m, 0-3 floor
/// standing obstacles, camera 1.4-1.7 m above the floor with >= 0.3 m
/// clearance from every surface, random yaw.
BoxScene random_scene(std::uint64_t seed);
inline constexpr double kCameraClearance = 0.3;
/// Distance from the camera to the nearest wall or obstacle surface.
double camera_clearance(const BoxScene& scene);

struct DatasetEntry {
  std::string id;
  std::string split;  // "train" or "test"
  std::uint64_t seed = 0;
  std::filesystem::path color;
  std::filesystem::path depth;
  BoxScene scene;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  int width = 0;
  int height = 0;
  DepthRange range;
  std::string tilt_axis = "pitch";
  std::vector<DatasetEntry> entries;  // paths resolved against the manifest directory

  std::vector<const DatasetEntry*> split(const std::string& name) const;
};

/// Renders n_train + n_test scenes into `dir` (PNG color, PFM depth) and
/// writes dir/manifest.json. Same arguments give identical files.
DatasetManifest write_dataset(const std::filesystem::path& dir, std::uint64_t seed, int n_train,
                              int n_test, int width, int height, DepthRange range = {},
                              int workers = 1);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace sphdepth

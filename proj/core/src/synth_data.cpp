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

#include "sphdepth/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "sphdepth/error.hpp"
#include "sphdepth/image_io.hpp"
#include "sphdepth/parallel.hpp"
#include "sphdepth/random.hpp"

namespace sphdepth {
namespace {

using nlohmann::ordered_json;

double axis(const Vec3& v, int a) { return a == 0 ? v.x : (a == 1 ? v.y : v.z); }

Vec3 unit_axis(int a, double sign) {
  Vec3 e;
  (a == 0 ? e.x : (a == 1 ? e.y : e.z)) = sign;
  return e;
}

bool inside_box(const Vec3& p, const Vec3& center, const Vec3& half) {
  for (int a = 0; a < 3; ++a) {
    if (std::abs(axis(p, a) - axis(center, a)) >= axis(half, a)) return false;
  }
  return true;
}

// Distance from p to the surface of a box that contains p.
double inner_distance(const Vec3& p, const Vec3& center, const Vec3& half) {
  double d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) d = std::min(d, axis(half, a) - std::abs(axis(p, a) - axis(center, a)));
  return d;
}

// Distance from p to a box that does not contain p.
double outer_distance(const Vec3& p, const Vec3& center, const Vec3& half) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double e = std::max(0.0, std::abs(axis(p, a) - axis(center, a)) - axis(half, a));
    s += e * e;
  }
  return std::sqrt(s);
}

// Quaternion (w, x, y, z) of an orthonormal matrix.
std::array<double, 4> to_quaternion(const Mat3& r) {
  const auto& m = r.m;
  const double tr = m[0][0] + m[1][1] + m[2][2];
  std::array<double, 4> q{};
  if (tr > 0.0) {
    const double s = 2.0 * std::sqrt(tr + 1.0);
    q = {0.25 * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s};
  } else if (m[0][0] > m[1][1] && m[0][0] > m[2][2]) {
    const double s = 2.0 * std::sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]);
    q = {(m[2][1] - m[1][2]) / s, 0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s};
  } else if (m[1][1] > m[2][2]) {
    const double s = 2.0 * std::sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]);
    q = {(m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s};
  } else {
    const double s = 2.0 * std::sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]);
    q = {(m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s};
  }
  return q;
}

Mat3 from_quaternion(std::array<double, 4> q) {
  const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (!(n > 0.0) || !std::isfinite(n)) throw InvalidScene("rotation quaternion has zero norm");
  for (double& v : q) v /= n;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r.m[0][0] = 1 - 2 * (y * y + z * z);
  r.m[0][1] = 2 * (x * y - w * z);
  r.m[0][2] = 2 * (x * z + w * y);
  r.m[1][0] = 2 * (x * y + w * z);
  r.m[1][1] = 1 - 2 * (x * x + z * z);
  r.m[1][2] = 2 * (y * z - w * x);
  r.m[2][0] = 2 * (x * z - w * y);
  r.m[2][1] = 2 * (y * z + w * x);
  r.m[2][2] = 1 - 2 * (x * x + y * y);
  return r;
}

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw InvalidScene("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

ordered_json scene_json(const BoxScene& s) {
  ordered_json j;
  j["half_extents"] = vec_json(s.half_extents);
  j["camera"] = vec_json(s.camera);
  const auto q = to_quaternion(s.rotation);
  j["rotation"] = ordered_json::array({q[0], q[1], q[2], q[3]});
  j["face_albedo"] = ordered_json::array();
  for (const auto& a : s.face_albedo) j["face_albedo"].push_back(vec_json(a));
  j["obstacles"] = ordered_json::array();
  for (const auto& o : s.obstacles) {
    ordered_json oj;
    oj["center"] = vec_json(o.center);
    oj["half_extents"] = vec_json(o.half_extents);
    oj["albedo"] = vec_json(o.albedo);
    j["obstacles"].push_back(oj);
  }
  return j;
}

BoxScene scene_from(const nlohmann::json& j) {
  BoxScene s;
  try {
    s.half_extents = vec_from(j.at("half_extents"));
    s.camera = vec_from(j.at("camera"));
    const auto& q = j.at("rotation");
    if (!q.is_array() || q.size() != 4) throw InvalidScene("rotation must be a quaternion [w, x, y, z]");
    s.rotation = from_quaternion({q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>()});
    const auto& fa = j.at("face_albedo");
    if (!fa.is_array() || fa.size() != 6) throw InvalidScene("face_albedo needs 6 colors");
    for (std::size_t i = 0; i < 6; ++i) s.face_albedo[i] = vec_from(fa[i]);
    if (j.contains("obstacles")) {
      for (const auto& oj : j["obstacles"]) {
        s.obstacles.push_back({vec_from(oj.at("center")), vec_from(oj.at("half_extents")),
                               vec_from(oj.at("albedo"))});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidScene(std::string("malformed scene: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace

void BoxScene::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!(axis(half_extents, a) > 0.0) || !std::isfinite(axis(half_extents, a))) {
      throw InvalidScene("room half extents must be positive");
    }
  }
  if (!inside_box(camera, {}, half_extents)) throw InvalidScene("camera is outside the room");
  for (const auto& o : obstacles) {
    for (int a = 0; a < 3; ++a) {
      if (!(axis(o.half_extents, a) > 0.0)) throw InvalidScene("obstacle extents must be positive");
    }
    if (outer_distance(camera, o.center, o.half_extents) <= 0.0) {
      throw InvalidScene("camera is inside an obstacle");
    }
  }
  const Mat3 p = rotation * rotation.transposed();
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) {
      if (std::abs(p.m[i][k] - (i == k ? 1.0 : 0.0)) > 1e-10) {
        throw InvalidScene("camera rotation is not orthonormal");
      }
    }
  }
}

std::string BoxScene::to_json() const { return scene_json(*this).dump(2); }

BoxScene BoxScene::from_json(const std::string& text) {
  try {
    return scene_from(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidScene(std::string("malformed scene JSON: ") + e.what());
  }
}

Hit trace(const BoxScene& scene, const Vec3& origin, const Vec3& direction) {
  Hit best;
  best.distance = std::numeric_limits<double>::infinity();
  // Room walls, seen from inside: the first wall reached on each axis. Ties
  // at edges go to the lowest axis.
  for (int a = 0; a < 3; ++a) {
    const double d = axis(direction, a);
    if (d == 0.0) continue;
    const double h = axis(scene.half_extents, a);
    const double t = ((d > 0.0 ? h : -h) - axis(origin, a)) / d;
    if (t < best.distance) {
      best.distance = t;
      best.surface = 2 * a + (d > 0.0 ? 1 : 0);
      best.normal = unit_axis(a, d > 0.0 ? -1.0 : 1.0);
      best.albedo = scene.face_albedo[static_cast<std::size_t>(best.surface)];
    }
  }
  // Obstacles, seen from outside: slab method.
  for (std::size_t k = 0; k < scene.obstacles.size(); ++k) {
    const Obstacle& o = scene.obstacles[k];
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    int near_axis = -1;
    bool miss = false;
    for (int a = 0; a < 3; ++a) {
      const double d = axis(direction, a);
      const double lo = axis(o.center, a) - axis(o.half_extents, a);
      const double hi = axis(o.center, a) + axis(o.half_extents, a);
      const double p = axis(origin, a);
      if (d == 0.0) {
        if (p < lo || p > hi) miss = true;
        continue;
      }
      double t1 = (lo - p) / d;
      double t2 = (hi - p) / d;
      if (t1 > t2) std::swap(t1, t2);
      if (t1 > t_near) {
        t_near = t1;
        near_axis = a;
      }
      t_far = std::min(t_far, t2);
    }
    if (miss || near_axis < 0 || t_near > t_far || t_near <= 0.0) continue;
    if (t_near < best.distance) {
      const double d = axis(direction, near_axis);
      best.distance = t_near;
      best.surface = 6 + 6 * static_cast<int>(k) + 2 * near_axis + (d > 0.0 ? 0 : 1);
      best.normal = unit_axis(near_axis, d > 0.0 ? -1.0 : 1.0);
      best.albedo = o.albedo;
    }
  }
  best.point = origin + best.distance * direction;
  return best;
}

Vec3 light_direction() {
  const Vec3 l{0.35, 0.25, 0.9};
  return (1.0 / norm(l)) * l;
}

Vec3 pixel_direction(const BoxScene& scene, int width, int height, int u, int v) {
  const double lon = 2.0 * std::numbers::pi * (u + 0.5) / width;
  const double colat = std::numbers::pi * (v + 0.5) / height;
  return scene.rotation * direction_from_angles(colat, lon);
}

Render render_erp(const BoxScene& scene, int width, int height, DepthRange range, int workers) {
  scene.validate();
  if (width <= 0 || height <= 0) throw InvalidParameter("render size must be positive");
  Render r;
  r.color = ErpImage(width, height, 3);
  std::vector<double> depth(static_cast<std::size_t>(width) * height);
  const Vec3 light = light_direction();
  parallel_for(static_cast<std::size_t>(height), workers, [&](std::size_t vi) {
    const int v = static_cast<int>(vi);
    for (int u = 0; u < width; ++u) {
      const Hit hit = trace(scene, scene.camera, pixel_direction(scene, width, height, u, v));
      const std::size_t idx = static_cast<std::size_t>(v) * width + u;
      depth[idx] = hit.distance;
      const double shade = 0.3 + 0.7 * std::max(0.0, dot(hit.normal, light));
      r.color.pixels(idx, 0) = std::clamp(hit.albedo.x * shade, 0.0, 1.0);
      r.color.pixels(idx, 1) = std::clamp(hit.albedo.y * shade, 0.0, 1.0);
      r.color.pixels(idx, 2) = std::clamp(hit.albedo.z * shade, 0.0, 1.0);
    }
  });
  r.depth = DepthFrame::ground_truth(width, height, std::move(depth), range);
  return r;
}

void quantize_for_storage(Render& render) {
  for (double& v : render.color.pixels.values()) {
    v = static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0;
  }
  for (double& d : render.depth.depth) d = static_cast<double>(static_cast<float>(d));
  render.depth.valid = valid_mask(render.depth.depth, render.depth.range);
}

Mat3 tilt_rotation(double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(a);
  const double s = std::sin(a);
  Mat3 r;
  r.m[0][0] = c;
  r.m[0][2] = s;
  r.m[2][0] = -s;
  r.m[2][2] = c;
  return r;
}

BoxScene tilted(const BoxScene& scene, double degrees) {
  BoxScene t = scene;
  if (degrees != 0.0) t.rotation = scene.rotation * tilt_rotation(degrees);
  return t;
}

std::vector<Render> render_tilted_set(const BoxScene& scene, const std::vector<double>& degrees,
                                      int width, int height, DepthRange range, int workers) {
  std::vector<Render> out;
  out.reserve(degrees.size());
  for (double d : degrees) out.push_back(render_erp(tilted(scene, d), width, height, range, workers));
  return out;
}

double camera_clearance(const BoxScene& scene) {
  double c = inner_distance(scene.camera, {}, scene.half_extents);
  for (const auto& o : scene.obstacles) {
    c = std::min(c, outer_distance(scene.camera, o.center, o.half_extents));
  }
  return c;
}

BoxScene random_scene(std::uint64_t seed) {
  // Indoor-like layout: z is up, ceiling height and camera height vary in a
  // narrow band (tripod capture), so absolute depth is visible in the image.
  Rng rng(seed);
  BoxScene s;
  s.half_extents = {0.5 * rng.uniform(3.0, 8.0), 0.5 * rng.uniform(3.0, 8.0), 0.5 * rng.uniform(2.4, 3.2)};
  for (auto& a : s.face_albedo) a = {rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9)};
  const double floor_z = -s.half_extents.z;
  const auto n_obstacles = rng.uniform_int(0, 3);
  for (std::int64_t k = 0; k < n_obstacles; ++k) {
    Obstacle o;
    o.half_extents = {rng.uniform(0.2, 0.6), rng.uniform(0.2, 0.6), 0.5 * rng.uniform(0.4, 1.2)};
    o.center = {rng.uniform(-s.half_extents.x + o.half_extents.x, s.half_extents.x - o.half_extents.x),
                rng.uniform(-s.half_extents.y + o.half_extents.y, s.half_extents.y - o.half_extents.y),
                floor_z + o.half_extents.z};
    o.albedo = {rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9), rng.uniform(0.2, 0.9)};
    s.obstacles.push_back(o);
  }
  // Rejection-sample the camera; drop obstacles if no spot is free.
  for (;;) {
    for (int attempt = 0; attempt < 2000; ++attempt) {
      const double lx = s.half_extents.x - kCameraClearance;
      const double ly = s.half_extents.y - kCameraClearance;
      s.camera = {rng.uniform(-lx, lx), rng.uniform(-ly, ly), floor_z + rng.uniform(1.4, 1.7)};
      bool free = true;
      for (const auto& o : s.obstacles) {
        if (outer_distance(s.camera, o.center, o.half_extents) < kCameraClearance) free = false;
      }
      if (free && camera_clearance(s) >= kCameraClearance) {
        s.rotation = axis_angle({0.0, 0.0, 1.0}, rng.uniform(0.0, 2.0 * std::numbers::pi));
        return s;
      }
    }
    s.obstacles.pop_back();
  }
}

std::vector<const DatasetEntry*> DatasetManifest::split(const std::string& name) const {
  std::vector<const DatasetEntry*> out;
  for (const auto& e : entries) {
    if (e.split == name) out.push_back(&e);
  }
  return out;
}

DatasetManifest write_dataset(const std::filesystem::path& dir, std::uint64_t seed, int n_train,
                              int n_test, int width, int height, DepthRange range, int workers) {
  if (n_train < 0 || n_test < 0 || n_train + n_test < 1) {
    throw InvalidParameter("dataset needs at least one scene");
  }
  if (width <= 0 || height <= 0) throw InvalidParameter("render size must be positive");
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.seed = seed;
  m.width = width;
  m.height = height;
  m.range = range;
  ordered_json j;
  j["format"] = "sphdepth-dataset";
  j["version"] = 1;
  j["seed"] = seed;
  j["width"] = width;
  j["height"] = height;
  j["depth_range"] = ordered_json::array({range.min_depth, range.max_depth});
  j["depth_convention"] = "ray_length";
  j["tilt_axis"] = m.tilt_axis;
  j["samples"] = ordered_json::array();
  const int total = n_train + n_test;
  for (int i = 0; i < total; ++i) {
    DatasetEntry e;
    e.split = i < n_train ? "train" : "test";
    const int local = i < n_train ? i : i - n_train;
    char name[32];
    std::snprintf(name, sizeof(name), "%s_%04d", e.split.c_str(), local);
    e.id = name;
    e.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    e.scene = random_scene(e.seed);
    const Render r = render_erp(e.scene, width, height, range, workers);
    e.color = dir / (e.id + ".png");
    e.depth = dir / (e.id + ".pfm");
    write_png(e.color, r.color);
    ErpImage d(width, height, 1);
    for (std::size_t k = 0; k < r.depth.size(); ++k) d.pixels(k, 0) = r.depth.depth[k];
    write_pfm(e.depth, d);
    ordered_json ej;
    ej["id"] = e.id;
    ej["split"] = e.split;
    ej["seed"] = e.seed;
    ej["color"] = e.id + ".png";
    ej["depth"] = e.id + ".pfm";
    ej["scene"] = scene_json(e.scene);
    j["samples"].push_back(ej);
    m.entries.push_back(std::move(e));
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << j.dump(2) << "\n";
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset manifest " + path.string());
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.seed = j.at("seed").get<std::uint64_t>();
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    if (j.contains("depth_range")) {
      m.range = {j["depth_range"].at(0).get<double>(), j["depth_range"].at(1).get<double>()};
    }
    if (j.contains("tilt_axis")) m.tilt_axis = j["tilt_axis"].get<std::string>();
    const auto base = path.parent_path();
    for (const auto& sj : j.at("samples")) {
      DatasetEntry e;
      e.id = sj.at("id").get<std::string>();
      e.split = sj.at("split").get<std::string>();
      e.seed = sj.at("seed").get<std::uint64_t>();
      e.color = base / sj.at("color").get<std::string>();
      e.depth = base / sj.at("depth").get<std::string>();
      e.scene = scene_from(sj.at("scene"));
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed dataset manifest " + path.string() + ": " + e.what());
  }
  if (m.entries.empty()) throw IoError("dataset manifest lists no samples");
  return m;
}

}  // namespace sphdepth

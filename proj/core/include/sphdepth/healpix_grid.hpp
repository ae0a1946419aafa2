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
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "sphdepth/geometry.hpp"

namespace sphdepth {

/// Sentinel stored in neighbor slots that have no pixel.
inline constexpr std::int32_t kMissing = -1;

/// Neighbor slot order of NeighborSlots.
enum class Compass : int { SW = 0, W, NW, N, NE, E, SE, S };

using NeighborSlots = std::array<std::int32_t, 8>;

struct Angles {
  double colatitude = 0.0;  // [0, pi]
  double longitude = 0.0;   // [0, 2 pi)
};

/// Position of a nested pixel inside one of the 12 base faces.
struct FacePos {
  int ix = 0;
  int iy = 0;
  int face = 0;
};

/// One HEALPix resolution level in nested ordering. Centers and the
/// 8-neighbor table are computed eagerly; the object is immutable afterwards.
class SphericalGrid {
 public:
  /// nside must be a power of two in [1, 1024].
  explicit SphericalGrid(int nside);

  int nside() const noexcept { return nside_; }
  /// log2(nside): depth of the implicit quadtree below the 12 base pixels.
  int order() const noexcept { return order_; }
  std::int64_t npix() const noexcept { return npix_; }

  std::span<const Vec3> centers() const noexcept { return centers_; }
  const Vec3& center(std::int64_t pix) const;

  std::span<const NeighborSlots> neighbor_table() const noexcept { return neighbors_; }
  const NeighborSlots& neighbors8(std::int64_t pix) const;
  /// Number of non-missing neighbor slots.
  int degree(std::int64_t pix) const;

  Angles pix2ang(std::int64_t pix) const;
  std::int64_t ang2pix(double colatitude, double longitude) const;
  std::int64_t vec2pix(const Vec3& dir) const;

  FacePos nest2xyf(std::int64_t pix) const;
  std::int64_t xyf2nest(int ix, int iy, int face) const;

  /// Binary "SPHGRID1" layout: u32 version, u32 nside, f64 centers, i32 neighbors.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  /// Reads the stored tables verbatim (no recomputation); see verify_grid.
  static SphericalGrid load(std::istream& in);
  static SphericalGrid load(const std::filesystem::path& path);

  static constexpr std::uint32_t kFileVersion = 1;

 private:
  struct Raw {};
  SphericalGrid(Raw, int nside);

  std::int64_t loc2pix(double z, double phi, double sin_theta, bool have_sin) const;
  void compute_tables();

  int nside_ = 0;
  int order_ = 0;
  std::int64_t npix_ = 0;
  std::vector<Vec3> centers_;
  std::vector<NeighborSlots> neighbors_;
};

/// Differences found between a stored grid and a freshly built one plus the
/// invariant checks (unit centers, symmetric neighbors).
struct GridVerifyReport {
  bool ok = true;
  std::int64_t center_mismatches = 0;
  std::int64_t neighbor_mismatches = 0;
  double max_norm_error = 0.0;
  std::int64_t asymmetric_pairs = 0;
  std::int64_t seven_neighbor_pixels = 0;
};

GridVerifyReport verify_grid(const SphericalGrid& grid);

/// Non-overlapping windows on one level: window id of a pixel is its nested
/// ancestor `offset` quadtree levels up, i.e. pix >> (2 * offset).
struct WindowPartition {
  int offset = 0;
  std::int64_t n_windows = 0;
  std::int64_t window_size = 0;
  std::vector<std::int32_t> window_of;  // per pixel
  /// Member pixels of window w are members[w*window_size .. (w+1)*window_size).
  std::vector<std::int32_t> members;
};

/// Throws InvalidParameter when offset is negative or exceeds grid.order().
WindowPartition window_partition(const SphericalGrid& grid, int offset);

/// Coarse-to-fine list of grids. Consecutive levels either double nside or
/// repeat it (a repeated level maps pixels one-to-one).
class GridHierarchy {
 public:
  explicit GridHierarchy(const std::vector<int>& nsides);

  std::size_t size() const noexcept { return levels_.size(); }
  const SphericalGrid& level(std::size_t i) const;
  std::shared_ptr<const SphericalGrid> level_ptr(std::size_t i) const;
  std::vector<int> nsides() const;

  /// True when level i+1 has twice the nside of level i.
  bool refines(std::size_t coarse_level) const;
  /// Parent on level-1 of pixel `pix` of `level`.
  std::int64_t parent(std::size_t level, std::int64_t pix) const;
  /// The 4 nested children 4i..4i+3 on coarse_level+1 (requires refines()).
  std::array<std::int64_t, 4> children(std::size_t coarse_level, std::int64_t pix) const;

  WindowPartition window_partition(std::size_t fine_level, int coarse_offset) const;

 private:
  std::vector<std::shared_ptr<const SphericalGrid>> levels_;
};

}  // namespace sphdepth

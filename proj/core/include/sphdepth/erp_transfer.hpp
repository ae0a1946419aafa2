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
#include <optional>
#include <vector>

#include "sphdepth/healpix_grid.hpp"
#include "sphdepth/matrix.hpp"
#include "sphdepth/sphere_tensor.hpp"

namespace sphdepth {

enum class TransferDirection : std::uint8_t { PlaneToSphere = 0, SphereToPlane = 1 };

struct Tap {
  std::uint32_t index = 0;
  float weight = 0.0f;
  friend bool operator==(const Tap&, const Tap&) = default;
};

using TapRow = std::array<Tap, 4>;

/// Sparse 4-tap interpolation between an ERP raster and a grid level.
/// PlaneToSphere has one row per spherical pixel with taps into the raster;
/// SphereToPlane has one row per raster pixel with taps into the grid.
struct TransferTable {
  TransferDirection direction = TransferDirection::PlaneToSphere;
  std::uint32_t erp_width = 0;
  std::uint32_t erp_height = 0;
  std::uint32_t nside = 0;
  std::vector<TapRow> rows;

  std::size_t source_size() const noexcept;
  std::size_t target_size() const noexcept;

  /// "SPHLUT1\0" layout; see README for field order.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static TransferTable load(std::istream& in);
  static TransferTable load(const std::filesystem::path& path);

  friend bool operator==(const TransferTable&, const TransferTable&) = default;

  static constexpr std::uint32_t kFileVersion = 1;
};

/// Bilinear raster -> sphere taps. Longitudes are wrapped across the seam and
/// rows are clamped at the poles. `longitude_offset` is added to every pixel
/// center longitude before sampling.
TransferTable build_forward_table(const SphericalGrid& grid, int width, int height,
                                  double longitude_offset = 0.0, int workers = 1);

/// Sphere -> raster taps: containing pixel plus its three nearest neighbors,
/// weighted by inverse great-circle distance.
TransferTable build_inverse_table(const SphericalGrid& grid, int width, int height,
                                  int workers = 1);

/// Loads the table from $SPHERE_CACHE_DIR when present and valid, otherwise
/// builds it (and stores it there if the variable is set).
TransferTable cached_table(TransferDirection direction, const SphericalGrid& grid, int width,
                           int height, int workers = 1);

/// out[r][c] = sum over taps of w * src[idx][c].
Matrix resample(const TransferTable& table, const Matrix& src, int workers = 1);
/// Adjoint of resample: scatters grad_out back onto the source rows.
Matrix resample_adjoint(const TransferTable& table, const Matrix& grad_out);

SphereTensor resample(const TransferTable& table, const ErpImage& image,
                      std::shared_ptr<const SphericalGrid> grid, int workers = 1);
ErpImage resample(const TransferTable& table, const SphereTensor& field, int workers = 1);

struct TableCheck {
  std::size_t rows = 0;
  std::size_t bad_rows = 0;   // negative weight, sum off by > 1e-6, or index out of range
  double max_sum_error = 0.0;
};

TableCheck check_table(const TransferTable& table);

struct RoundtripReport {
  int nside = 0;
  double mae = 0.0;
  double max_abs = 0.0;
  std::vector<double> band_mae;  // equal-colatitude bands, north to south
};

/// Compares `image` with its sphere round trip through hierarchy level `level`.
RoundtripReport roundtrip_report(const ErpImage& image, const GridHierarchy& hierarchy,
                                 std::size_t level, int bands = 8, int workers = 1);

/// Maps pixel counts such as {48, 192, 768, 3072} to nsides.
std::vector<int> nsides_from_pixel_counts(const std::vector<std::int64_t>& npix);

}  // namespace sphdepth

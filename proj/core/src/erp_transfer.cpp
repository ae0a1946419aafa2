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

#include "sphdepth/erp_transfer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <string>

#include "sphdepth/binary_io.hpp"
#include "sphdepth/error.hpp"
#include "sphdepth/parallel.hpp"

namespace sphdepth {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr char kLutMagic[8] = {'S', 'P', 'H', 'L', 'U', 'T', '1', '\0'};
constexpr std::string_view kLutMagicView(kLutMagic, 8);

void check_raster(int width, int height) {
  if (width < 1 || height < 1) {
    throw InvalidParameter("ERP raster must be at least 1x1, got " + std::to_string(width) +
                           "x" + std::to_string(height));
  }
}

double wrap(double v, double period) {
  double r = std::fmod(v, period);
  if (r < 0.0) r += period;
  return r >= period ? 0.0 : r;
}

}  // namespace

void ErpImage::validate(bool allow_any_aspect) const {
  if (width <= 0 || height <= 0) throw ShapeError("ERP image has empty dimensions");
  if (pixels.rows() != static_cast<std::size_t>(width) * height) {
    throw ShapeError("ERP image pixel rows do not match width*height");
  }
  if (!allow_any_aspect && width != 2 * height) {
    throw ShapeError("ERP image must have width == 2*height (" + std::to_string(width) + "x" +
                     std::to_string(height) + ")");
  }
}

std::size_t TransferTable::source_size() const noexcept {
  const std::size_t raster = static_cast<std::size_t>(erp_width) * erp_height;
  const std::size_t npix = 12u * static_cast<std::size_t>(nside) * nside;
  return direction == TransferDirection::PlaneToSphere ? raster : npix;
}

std::size_t TransferTable::target_size() const noexcept {
  const std::size_t raster = static_cast<std::size_t>(erp_width) * erp_height;
  const std::size_t npix = 12u * static_cast<std::size_t>(nside) * nside;
  return direction == TransferDirection::PlaneToSphere ? npix : raster;
}

void TransferTable::save(std::ostream& out) const {
  io::write_magic(out, kLutMagicView);
  io::write_u32(out, kFileVersion);
  io::write_u8(out, static_cast<std::uint8_t>(direction));
  io::write_u32(out, erp_width);
  io::write_u32(out, erp_height);
  io::write_u32(out, nside);
  io::write_u64(out, rows.size());
  for (const TapRow& row : rows) {
    for (const Tap& t : row) {
      io::write_u32(out, t.index);
      io::write_f32(out, t.weight);
    }
  }
}

void TransferTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save(out);
}

TransferTable TransferTable::load(std::istream& in) {
  io::expect_magic(in, kLutMagicView, "transfer table");
  const std::uint32_t version = io::read_u32(in);
  if (version != kFileVersion) {
    throw IoError("unsupported transfer table version " + std::to_string(version));
  }
  TransferTable t;
  const std::uint8_t dir = io::read_u8(in);
  if (dir > 1) throw IoError("transfer table: bad direction byte");
  t.direction = static_cast<TransferDirection>(dir);
  t.erp_width = io::read_u32(in);
  t.erp_height = io::read_u32(in);
  t.nside = io::read_u32(in);
  const std::uint64_t count = io::read_u64(in);
  if (t.nside == 0 || t.nside > 1024 || (t.nside & (t.nside - 1)) != 0) {
    throw IoError("transfer table: invalid nside");
  }
  if (count != t.target_size()) throw IoError("transfer table: row count does not match header");
  t.rows.resize(count);
  const std::size_t src = t.source_size();
  for (TapRow& row : t.rows) {
    for (Tap& tap : row) {
      tap.index = io::read_u32(in);
      tap.weight = io::read_f32(in);
      if (tap.index >= src) throw IoError("transfer table: tap index out of range");
    }
  }
  return t;
}

TransferTable TransferTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load(in);
}

TransferTable build_forward_table(const SphericalGrid& grid, int width, int height,
                                  double longitude_offset, int workers) {
  check_raster(width, height);
  if (!std::isfinite(longitude_offset)) throw InvalidParameter("non-finite longitude offset");
  TransferTable t;
  t.direction = TransferDirection::PlaneToSphere;
  t.erp_width = static_cast<std::uint32_t>(width);
  t.erp_height = static_cast<std::uint32_t>(height);
  t.nside = static_cast<std::uint32_t>(grid.nside());
  t.rows.resize(static_cast<std::size_t>(grid.npix()));

  parallel_for(t.rows.size(), workers, [&](std::size_t p) {
    const Angles a = grid.pix2ang(static_cast<std::int64_t>(p));
    const double lon = wrap(a.longitude + longitude_offset, kTwoPi);
    double u = lon / kTwoPi * width - 0.5;
    if (u < 0.0) u += width;
    double v = std::clamp(a.colatitude / kPi * height - 0.5, 0.0, static_cast<double>(height - 1));

    int u0 = static_cast<int>(std::floor(u));
    double fu = u - u0;
    if (u0 >= width) {
      u0 = 0;
      fu = 0.0;
    }
    const int u1 = (u0 + 1) % width;
    const int v0 = std::min(static_cast<int>(std::floor(v)), height - 1);
    const double fv = v0 == height - 1 ? 0.0 : v - v0;
    const int v1 = std::min(v0 + 1, height - 1);

    auto idx = [width](int uu, int vv) {
      return static_cast<std::uint32_t>(vv) * static_cast<std::uint32_t>(width) +
             static_cast<std::uint32_t>(uu);
    };
    t.rows[p] = {Tap{idx(u0, v0), static_cast<float>((1.0 - fu) * (1.0 - fv))},
                 Tap{idx(u1, v0), static_cast<float>(fu * (1.0 - fv))},
                 Tap{idx(u0, v1), static_cast<float>((1.0 - fu) * fv)},
                 Tap{idx(u1, v1), static_cast<float>(fu * fv)}};
  });
  return t;
}

TransferTable build_inverse_table(const SphericalGrid& grid, int width, int height, int workers) {
  check_raster(width, height);
  TransferTable t;
  t.direction = TransferDirection::SphereToPlane;
  t.erp_width = static_cast<std::uint32_t>(width);
  t.erp_height = static_cast<std::uint32_t>(height);
  t.nside = static_cast<std::uint32_t>(grid.nside());
  t.rows.resize(static_cast<std::size_t>(width) * height);

  const auto centers = grid.centers();
  parallel_for(t.rows.size(), workers, [&](std::size_t r) {
    const int u = static_cast<int>(r % static_cast<std::size_t>(width));
    const int v = static_cast<int>(r / static_cast<std::size_t>(width));
    const Vec3 dir = direction_from_angles(kPi * (v + 0.5) / height, kTwoPi * (u + 0.5) / width);
    const std::int64_t home = grid.vec2pix(dir);

    struct Candidate {
      std::int32_t pix;
      double dist;
    };
    Candidate near[9];
    int count = 0;
    near[count++] = {static_cast<std::int32_t>(home),
                     angular_distance(dir, centers[static_cast<std::size_t>(home)])};
    for (std::int32_t nb : grid.neighbors8(home)) {
      if (nb == kMissing) continue;
      near[count++] = {nb, angular_distance(dir, centers[static_cast<std::size_t>(nb)])};
    }
    // Keep the home pixel first; order neighbors by distance (stable on ties).
    std::stable_sort(near + 1, near + count,
                     [](const Candidate& a, const Candidate& b) { return a.dist < b.dist; });

    TapRow row;
    const auto exact = std::find_if(near, near + 4, [](const Candidate& c) { return c.dist < 1e-12; });
    if (exact != near + 4) {
      for (int k = 0; k < 4; ++k) {
        row[k] = Tap{static_cast<std::uint32_t>(near[k].pix), near + k == exact ? 1.0f : 0.0f};
      }
    } else {
      double total = 0.0;
      double inv[4];
      for (int k = 0; k < 4; ++k) {
        inv[k] = 1.0 / near[k].dist;
        total += inv[k];
      }
      for (int k = 0; k < 4; ++k) {
        row[k] = Tap{static_cast<std::uint32_t>(near[k].pix), static_cast<float>(inv[k] / total)};
      }
    }
    t.rows[r] = row;
  });
  return t;
}

TransferTable cached_table(TransferDirection direction, const SphericalGrid& grid, int width,
                           int height, int workers) {
  auto build = [&] {
    return direction == TransferDirection::PlaneToSphere
               ? build_forward_table(grid, width, height, 0.0, workers)
               : build_inverse_table(grid, width, height, workers);
  };
  const char* dir_env = std::getenv("SPHERE_CACHE_DIR");
  if (dir_env == nullptr || *dir_env == '\0') return build();

  const std::filesystem::path dir(dir_env);
  const std::string name = std::string(direction == TransferDirection::PlaneToSphere ? "fwd" : "inv") +
                           "_W" + std::to_string(width) + "_H" + std::to_string(height) + "_n" +
                           std::to_string(grid.nside()) + "_v" +
                           std::to_string(TransferTable::kFileVersion) + ".lut";
  const std::filesystem::path path = dir / name;
  std::error_code ec;
  if (std::filesystem::exists(path, ec)) {
    try {
      TransferTable t = TransferTable::load(path);
      if (t.direction == direction && t.erp_width == static_cast<std::uint32_t>(width) &&
          t.erp_height == static_cast<std::uint32_t>(height) &&
          t.nside == static_cast<std::uint32_t>(grid.nside())) {
        return t;
      }
    } catch (const IoError&) {
      // Corrupt cache entry; rebuilt below.
    }
  }
  TransferTable t = build();
  std::filesystem::create_directories(dir, ec);
  const std::filesystem::path tmp = path.string() + ".tmp";
  try {
    t.save(tmp);
    std::filesystem::rename(tmp, path, ec);
  } catch (const IoError&) {
    // Cache is best effort.
  }
  return t;
}

Matrix resample(const TransferTable& table, const Matrix& src, int workers) {
  if (src.rows() != table.source_size()) {
    throw ShapeError("resample: source has " + std::to_string(src.rows()) + " rows, table expects " +
                     std::to_string(table.source_size()));
  }
  const std::size_t channels = src.cols();
  Matrix out(table.rows.size(), channels);
  parallel_for(table.rows.size(), workers, [&](std::size_t r) {
    const TapRow& row = table.rows[r];
    double* o = out.data() + r * channels;
    for (std::size_t c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (const Tap& tap : row) {
        acc += static_cast<double>(tap.weight) * src(tap.index, c);
      }
      o[c] = acc;
    }
  });
  return out;
}

Matrix resample_adjoint(const TransferTable& table, const Matrix& grad_out) {
  if (grad_out.rows() != table.rows.size()) throw ShapeError("resample_adjoint: row mismatch");
  const std::size_t channels = grad_out.cols();
  Matrix grad_src(table.source_size(), channels);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double* g = grad_out.data() + r * channels;
    for (const Tap& tap : table.rows[r]) {
      if (tap.weight == 0.0f) continue;
      double* d = grad_src.data() + static_cast<std::size_t>(tap.index) * channels;
      const double w = tap.weight;
      for (std::size_t c = 0; c < channels; ++c) d[c] += w * g[c];
    }
  }
  return grad_src;
}

SphereTensor resample(const TransferTable& table, const ErpImage& image,
                      std::shared_ptr<const SphericalGrid> grid, int workers) {
  if (table.direction != TransferDirection::PlaneToSphere) {
    throw ShapeError("resample: table does not map raster to sphere");
  }
  if (image.width != static_cast<int>(table.erp_width) ||
      image.height != static_cast<int>(table.erp_height)) {
    throw ShapeError("resample: image size does not match table");
  }
  if (!grid || grid->nside() != static_cast<int>(table.nside)) {
    throw ShapeError("resample: grid does not match table nside");
  }
  return SphereTensor(std::move(grid), resample(table, image.pixels, workers));
}

ErpImage resample(const TransferTable& table, const SphereTensor& field, int workers) {
  if (table.direction != TransferDirection::SphereToPlane) {
    throw ShapeError("resample: table does not map sphere to raster");
  }
  if (!field.grid || field.grid->nside() != static_cast<int>(table.nside)) {
    throw ShapeError("resample: field grid does not match table nside");
  }
  ErpImage out;
  out.width = static_cast<int>(table.erp_width);
  out.height = static_cast<int>(table.erp_height);
  out.pixels = resample(table, field.data, workers);
  return out;
}

TableCheck check_table(const TransferTable& table) {
  TableCheck c;
  c.rows = table.rows.size();
  const std::size_t src = table.source_size();
  if (c.rows != table.target_size()) c.bad_rows = c.rows;
  for (const TapRow& row : table.rows) {
    double sum = 0.0;
    bool bad = false;
    for (const Tap& tap : row) {
      if (!(tap.weight >= 0.0f) || tap.index >= src) bad = true;
      sum += tap.weight;
    }
    const double err = std::abs(sum - 1.0);
    c.max_sum_error = std::max(c.max_sum_error, err);
    if (bad || err > 1e-6) ++c.bad_rows;
  }
  return c;
}

RoundtripReport roundtrip_report(const ErpImage& image, const GridHierarchy& hierarchy,
                                 std::size_t level, int bands, int workers) {
  image.validate(true);
  if (bands < 1 || bands > image.height) {
    throw InvalidParameter("band count must be in [1, image height]");
  }
  const auto grid = hierarchy.level_ptr(level);
  const TransferTable fwd = cached_table(TransferDirection::PlaneToSphere, *grid, image.width,
                                         image.height, workers);
  const TransferTable inv = cached_table(TransferDirection::SphereToPlane, *grid, image.width,
                                         image.height, workers);
  const Matrix back = resample(inv, resample(fwd, image.pixels, workers), workers);

  RoundtripReport r;
  r.nside = grid->nside();
  r.band_mae.assign(static_cast<std::size_t>(bands), 0.0);
  std::vector<double> band_count(static_cast<std::size_t>(bands), 0.0);
  double total = 0.0;
  const std::size_t channels = image.pixels.cols();
  for (int v = 0; v < image.height; ++v) {
    const auto band = static_cast<std::size_t>(static_cast<std::int64_t>(v) * bands / image.height);
    for (int u = 0; u < image.width; ++u) {
      const std::size_t row = static_cast<std::size_t>(v) * image.width + u;
      for (std::size_t c = 0; c < channels; ++c) {
        const double e = std::abs(back(row, c) - image.pixels(row, c));
        total += e;
        r.max_abs = std::max(r.max_abs, e);
        r.band_mae[band] += e;
        band_count[band] += 1.0;
      }
    }
  }
  r.mae = total / static_cast<double>(image.pixels.size());
  for (std::size_t b = 0; b < r.band_mae.size(); ++b) r.band_mae[b] /= band_count[b];
  return r;
}

std::vector<int> nsides_from_pixel_counts(const std::vector<std::int64_t>& npix) {
  std::vector<int> out;
  for (std::int64_t n : npix) {
    const std::int64_t face = n / 12;
    const auto side = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(face))));
    if (n <= 0 || n % 12 != 0 || side * side != face || (side & (side - 1)) != 0) {
      throw InvalidParameter("pixel count " + std::to_string(n) + " is not 12*nside^2");
    }
    out.push_back(static_cast<int>(side));
  }
  return out;
}

}  // namespace sphdepth

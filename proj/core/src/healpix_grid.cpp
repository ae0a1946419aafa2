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

#include "sphdepth/healpix_grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "sphdepth/binary_io.hpp"
#include "sphdepth/error.hpp"

namespace sphdepth {
namespace {

constexpr double kTwoThird = 2.0 / 3.0;
constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::string_view kGridMagic = "SPHGRID1";

// Ring and longitude offsets of the 12 base faces.
constexpr int kJrll[12] = {2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4};
constexpr int kJpll[12] = {1, 3, 5, 7, 0, 2, 4, 6, 1, 3, 5, 7};

// Offsets and face transitions in Compass order (SW, W, NW, N, NE, E, SE, S).
constexpr int kXOffset[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kYOffset[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kFaceArray[9][12] = {
    {8, 9, 10, 11, -1, -1, -1, -1, 10, 11, 8, 9},   // S
    {5, 6, 7, 4, 8, 9, 10, 11, 9, 10, 11, 8},       // SE
    {-1, -1, -1, -1, 5, 6, 7, 4, -1, -1, -1, -1},   // E
    {4, 5, 6, 7, 11, 8, 9, 10, 11, 8, 9, 10},       // SW
    {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11},         // center
    {1, 2, 3, 0, 0, 1, 2, 3, 5, 6, 7, 4},           // NE
    {-1, -1, -1, -1, 7, 4, 5, 6, -1, -1, -1, -1},   // W
    {3, 0, 1, 2, 3, 0, 1, 2, 4, 5, 6, 7},           // NW
    {2, 3, 0, 1, -1, -1, -1, -1, 0, 1, 2, 3}};      // N
constexpr int kSwapArray[9][12] = {
    {0, 0, 0, 0, 0, 0, 0, 0, 3, 3, 3, 3},
    {0, 0, 0, 0, 0, 0, 0, 0, 6, 6, 6, 6},
    {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
    {0, 0, 0, 0, 0, 0, 0, 0, 5, 5, 5, 5},
    {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
    {5, 5, 5, 5, 0, 0, 0, 0, 0, 0, 0, 0},
    {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
    {6, 6, 6, 6, 0, 0, 0, 0, 0, 0, 0, 0},
    {3, 3, 3, 3, 0, 0, 0, 0, 0, 0, 0, 0}};

std::uint64_t spread_bits(std::uint64_t v) {
  v &= 0xffffffffULL;
  v = (v | (v << 16)) & 0x0000ffff0000ffffULL;
  v = (v | (v << 8)) & 0x00ff00ff00ff00ffULL;
  v = (v | (v << 4)) & 0x0f0f0f0f0f0f0f0fULL;
  v = (v | (v << 2)) & 0x3333333333333333ULL;
  v = (v | (v << 1)) & 0x5555555555555555ULL;
  return v;
}

std::uint64_t compress_bits(std::uint64_t v) {
  v &= 0x5555555555555555ULL;
  v = (v | (v >> 1)) & 0x3333333333333333ULL;
  v = (v | (v >> 2)) & 0x0f0f0f0f0f0f0f0fULL;
  v = (v | (v >> 4)) & 0x00ff00ff00ff00ffULL;
  v = (v | (v >> 8)) & 0x0000ffff0000ffffULL;
  v = (v | (v >> 16)) & 0x00000000ffffffffULL;
  return v;
}

// Result in [0, period).
double wrap(double v, double period) {
  double r = std::fmod(v, period);
  if (r < 0.0) r += period;
  return r >= period ? 0.0 : r;
}

int order_of(int nside) {
  if (nside < 1 || nside > 1024 || (nside & (nside - 1)) != 0) {
    throw InvalidParameter("nside must be a power of two in [1, 1024], got " +
                           std::to_string(nside));
  }
  return std::countr_zero(static_cast<unsigned>(nside));
}

}  // namespace

SphericalGrid::SphericalGrid(Raw, int nside)
    : nside_(nside),
      order_(order_of(nside)),
      npix_(12LL * nside * nside) {}

SphericalGrid::SphericalGrid(int nside) : SphericalGrid(Raw{}, nside) {
  compute_tables();
}

void SphericalGrid::compute_tables() {
  centers_.resize(static_cast<std::size_t>(npix_));
  neighbors_.resize(static_cast<std::size_t>(npix_));

  const double fact2 = 4.0 / static_cast<double>(npix_);
  const double fact1 = 2.0 * nside_ * fact2;
  const int nl4 = 4 * nside_;

  for (std::int64_t pix = 0; pix < npix_; ++pix) {
    const FacePos f = nest2xyf(pix);
    const int jr = (kJrll[f.face] << order_) - f.ix - f.iy - 1;

    double z, sin_theta;
    int nr, kshift;
    if (jr < nside_) {
      nr = jr;
      const double tmp = nr * nr * fact2;
      z = 1.0 - tmp;
      sin_theta = std::sqrt(tmp * (2.0 - tmp));
      kshift = 0;
    } else if (jr > 3 * nside_) {
      nr = nl4 - jr;
      const double tmp = nr * nr * fact2;
      z = tmp - 1.0;
      sin_theta = std::sqrt(tmp * (2.0 - tmp));
      kshift = 0;
    } else {
      nr = nside_;
      z = (2 * nside_ - jr) * fact1;
      sin_theta = std::sqrt((1.0 - z) * (1.0 + z));
      kshift = (jr - nside_) & 1;
    }

    int jp = (kJpll[f.face] * nr + f.ix - f.iy + 1 + kshift) / 2;
    if (jp > nl4) jp -= nl4;
    if (jp < 1) jp += nl4;
    const double phi = (jp - (kshift + 1) * 0.5) * (kHalfPi / nr);

    centers_[static_cast<std::size_t>(pix)] = {sin_theta * std::cos(phi),
                                               sin_theta * std::sin(phi), z};

    NeighborSlots& slots = neighbors_[static_cast<std::size_t>(pix)];
    for (int s = 0; s < 8; ++s) {
      int x = f.ix + kXOffset[s];
      int y = f.iy + kYOffset[s];
      int nbnum = 4;
      if (x < 0) {
        x += nside_;
        nbnum -= 1;
      } else if (x >= nside_) {
        x -= nside_;
        nbnum += 1;
      }
      if (y < 0) {
        y += nside_;
        nbnum -= 3;
      } else if (y >= nside_) {
        y -= nside_;
        nbnum += 3;
      }
      const int face = kFaceArray[nbnum][f.face];
      if (face < 0) {
        slots[s] = kMissing;
        continue;
      }
      const int swap = kSwapArray[nbnum][f.face];
      if (swap & 1) x = nside_ - x - 1;
      if (swap & 2) y = nside_ - y - 1;
      if (swap & 4) std::swap(x, y);
      slots[s] = static_cast<std::int32_t>(xyf2nest(x, y, face));
    }
  }
}

const Vec3& SphericalGrid::center(std::int64_t pix) const {
  if (pix < 0 || pix >= npix_) {
    throw IndexError("pixel index " + std::to_string(pix) + " out of range [0, " +
                     std::to_string(npix_) + ")");
  }
  return centers_[static_cast<std::size_t>(pix)];
}

const NeighborSlots& SphericalGrid::neighbors8(std::int64_t pix) const {
  if (pix < 0 || pix >= npix_) {
    throw IndexError("pixel index " + std::to_string(pix) + " out of range [0, " +
                     std::to_string(npix_) + ")");
  }
  return neighbors_[static_cast<std::size_t>(pix)];
}

int SphericalGrid::degree(std::int64_t pix) const {
  const auto& slots = neighbors8(pix);
  return static_cast<int>(
      std::count_if(slots.begin(), slots.end(), [](std::int32_t v) { return v != kMissing; }));
}

Angles SphericalGrid::pix2ang(std::int64_t pix) const {
  const Vec3& c = center(pix);
  const double sin_theta = std::hypot(c.x, c.y);
  Angles a;
  a.colatitude = std::atan2(sin_theta, c.z);
  a.longitude = sin_theta > 0.0 ? wrap(std::atan2(c.y, c.x), kTwoPi) : 0.0;
  return a;
}

std::int64_t SphericalGrid::ang2pix(double colatitude, double longitude) const {
  if (!std::isfinite(colatitude) || !std::isfinite(longitude)) {
    throw InvalidParameter("ang2pix: non-finite angle");
  }
  if (colatitude < 0.0 || colatitude > std::numbers::pi) {
    throw InvalidParameter("ang2pix: colatitude outside [0, pi]");
  }
  return loc2pix(std::cos(colatitude), wrap(longitude, kTwoPi), std::sin(colatitude), true);
}

std::int64_t SphericalGrid::vec2pix(const Vec3& dir) const {
  if (!std::isfinite(dir.x) || !std::isfinite(dir.y) || !std::isfinite(dir.z)) {
    throw InvalidParameter("vec2pix: non-finite direction");
  }
  const double len = norm(dir);
  if (len == 0.0) throw InvalidParameter("vec2pix: zero direction");
  const double xl = 1.0 / len;
  const double sin_theta = std::hypot(dir.x, dir.y) * xl;
  const double phi = (dir.x == 0.0 && dir.y == 0.0) ? 0.0 : wrap(std::atan2(dir.y, dir.x), kTwoPi);
  return loc2pix(dir.z * xl, phi, sin_theta, true);
}

std::int64_t SphericalGrid::loc2pix(double z, double phi, double sin_theta, bool have_sin) const {
  const double za = std::abs(z);
  const double tt = wrap(phi / kHalfPi, 4.0);

  if (za <= kTwoThird) {
    const double temp1 = nside_ * (0.5 + tt);
    const double temp2 = nside_ * (z * 0.75);
    const std::int64_t jp = static_cast<std::int64_t>(temp1 - temp2);
    const std::int64_t jm = static_cast<std::int64_t>(temp1 + temp2);
    const std::int64_t ifp = jp >> order_;
    const std::int64_t ifm = jm >> order_;
    const int face = static_cast<int>((ifp == ifm) ? (ifp | 4) : ((ifp < ifm) ? ifp : (ifm + 8)));
    const int ix = static_cast<int>(jm & (nside_ - 1));
    const int iy = static_cast<int>(nside_ - (jp & (nside_ - 1)) - 1);
    return xyf2nest(ix, iy, face);
  }

  const int ntt = std::min(3, static_cast<int>(tt));
  const double tp = tt - ntt;
  const double tmp = (za < 0.99 || !have_sin)
                         ? nside_ * std::sqrt(3.0 * (1.0 - za))
                         : nside_ * sin_theta / std::sqrt((1.0 + za) / 3.0);
  std::int64_t jp = static_cast<std::int64_t>(tp * tmp);
  std::int64_t jm = static_cast<std::int64_t>((1.0 - tp) * tmp);
  jp = std::min<std::int64_t>(jp, nside_ - 1);
  jm = std::min<std::int64_t>(jm, nside_ - 1);
  if (z >= 0.0) {
    return xyf2nest(static_cast<int>(nside_ - jm - 1), static_cast<int>(nside_ - jp - 1), ntt);
  }
  return xyf2nest(static_cast<int>(jp), static_cast<int>(jm), ntt + 8);
}

FacePos SphericalGrid::nest2xyf(std::int64_t pix) const {
  if (pix < 0 || pix >= npix_) {
    throw IndexError("pixel index " + std::to_string(pix) + " out of range");
  }
  const auto upix = static_cast<std::uint64_t>(pix);
  const std::uint64_t face_pixels = static_cast<std::uint64_t>(nside_) * nside_;
  FacePos f;
  f.face = static_cast<int>(upix >> (2 * order_));
  const std::uint64_t local = upix & (face_pixels - 1);
  f.ix = static_cast<int>(compress_bits(local));
  f.iy = static_cast<int>(compress_bits(local >> 1));
  return f;
}

std::int64_t SphericalGrid::xyf2nest(int ix, int iy, int face) const {
  return static_cast<std::int64_t>((static_cast<std::uint64_t>(face) << (2 * order_)) +
                                   spread_bits(static_cast<std::uint64_t>(ix)) +
                                   (spread_bits(static_cast<std::uint64_t>(iy)) << 1));
}

void SphericalGrid::save(std::ostream& out) const {
  io::write_magic(out, kGridMagic);
  io::write_u32(out, kFileVersion);
  io::write_u32(out, static_cast<std::uint32_t>(nside_));
  for (const Vec3& c : centers_) {
    io::write_f64(out, c.x);
    io::write_f64(out, c.y);
    io::write_f64(out, c.z);
  }
  for (const NeighborSlots& slots : neighbors_) {
    for (std::int32_t v : slots) io::write_i32(out, v);
  }
}

void SphericalGrid::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save(out);
}

SphericalGrid SphericalGrid::load(std::istream& in) {
  io::expect_magic(in, kGridMagic, "grid");
  const std::uint32_t version = io::read_u32(in);
  if (version != kFileVersion) {
    throw IoError("unsupported grid file version " + std::to_string(version));
  }
  const std::uint32_t nside = io::read_u32(in);
  if (nside > 1024) throw IoError("grid file: nside out of range");
  SphericalGrid grid = [&] {
    try {
      return SphericalGrid(Raw{}, static_cast<int>(nside));
    } catch (const InvalidParameter& e) {
      throw IoError(std::string("grid file: ") + e.what());
    }
  }();
  grid.centers_.resize(static_cast<std::size_t>(grid.npix_));
  grid.neighbors_.resize(static_cast<std::size_t>(grid.npix_));
  for (Vec3& c : grid.centers_) {
    c.x = io::read_f64(in);
    c.y = io::read_f64(in);
    c.z = io::read_f64(in);
  }
  for (NeighborSlots& slots : grid.neighbors_) {
    for (std::int32_t& v : slots) {
      v = io::read_i32(in);
      if (v != kMissing && (v < 0 || v >= grid.npix_)) {
        throw IoError("grid file: neighbor index out of range");
      }
    }
  }
  return grid;
}

SphericalGrid SphericalGrid::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load(in);
}

GridVerifyReport verify_grid(const SphericalGrid& grid) {
  GridVerifyReport r;
  const SphericalGrid fresh(grid.nside());
  const auto centers = grid.centers();
  const auto table = grid.neighbor_table();
  for (std::int64_t i = 0; i < grid.npix(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!(centers[k] == fresh.centers()[k])) ++r.center_mismatches;
    if (table[k] != fresh.neighbor_table()[k]) ++r.neighbor_mismatches;
    r.max_norm_error = std::max(r.max_norm_error, std::abs(norm(centers[k]) - 1.0));
    int deg = 0;
    for (std::int32_t j : table[k]) {
      if (j == kMissing) continue;
      ++deg;
      const auto& back = table[static_cast<std::size_t>(j)];
      if (std::find(back.begin(), back.end(), static_cast<std::int32_t>(i)) == back.end()) {
        ++r.asymmetric_pairs;
      }
    }
    if (deg == 7) ++r.seven_neighbor_pixels;
  }
  r.ok = r.center_mismatches == 0 && r.neighbor_mismatches == 0 && r.max_norm_error <= 1e-12 &&
         r.asymmetric_pairs == 0;
  return r;
}

WindowPartition window_partition(const SphericalGrid& grid, int offset) {
  if (offset < 0 || offset > grid.order()) {
    throw InvalidParameter("window offset " + std::to_string(offset) +
                           " exceeds the quadtree depth " + std::to_string(grid.order()) +
                           " of nside " + std::to_string(grid.nside()));
  }
  WindowPartition w;
  w.offset = offset;
  w.window_size = std::int64_t{1} << (2 * offset);
  w.n_windows = grid.npix() / w.window_size;
  w.window_of.resize(static_cast<std::size_t>(grid.npix()));
  w.members.resize(static_cast<std::size_t>(grid.npix()));
  for (std::int64_t p = 0; p < grid.npix(); ++p) {
    w.window_of[static_cast<std::size_t>(p)] = static_cast<std::int32_t>(p >> (2 * offset));
    // Nested order keeps each window contiguous.
    w.members[static_cast<std::size_t>(p)] = static_cast<std::int32_t>(p);
  }
  return w;
}

GridHierarchy::GridHierarchy(const std::vector<int>& nsides) {
  if (nsides.empty()) throw InvalidParameter("grid hierarchy needs at least one level");
  for (std::size_t i = 0; i < nsides.size(); ++i) {
    if (i > 0 && nsides[i] != nsides[i - 1] && nsides[i] != 2 * nsides[i - 1]) {
      throw InvalidParameter("hierarchy levels must repeat or double nside");
    }
    if (i > 0 && nsides[i] == nsides[i - 1]) {
      levels_.push_back(levels_.back());
    } else {
      levels_.push_back(std::make_shared<const SphericalGrid>(nsides[i]));
    }
  }
}

const SphericalGrid& GridHierarchy::level(std::size_t i) const { return *level_ptr(i); }

std::shared_ptr<const SphericalGrid> GridHierarchy::level_ptr(std::size_t i) const {
  if (i >= levels_.size()) {
    throw InvalidParameter("hierarchy level " + std::to_string(i) + " does not exist");
  }
  return levels_[i];
}

std::vector<int> GridHierarchy::nsides() const {
  std::vector<int> out;
  for (const auto& g : levels_) out.push_back(g->nside());
  return out;
}

bool GridHierarchy::refines(std::size_t coarse_level) const {
  return level(coarse_level + 1).nside() == 2 * level(coarse_level).nside();
}

std::int64_t GridHierarchy::parent(std::size_t lvl, std::int64_t pix) const {
  if (lvl == 0) throw InvalidParameter("coarsest level has no parent level");
  if (pix < 0 || pix >= level(lvl).npix()) throw IndexError("pixel index out of range");
  return refines(lvl - 1) ? pix >> 2 : pix;
}

std::array<std::int64_t, 4> GridHierarchy::children(std::size_t coarse_level,
                                                    std::int64_t pix) const {
  if (coarse_level + 1 >= levels_.size()) {
    throw InvalidParameter("finest level has no children");
  }
  if (!refines(coarse_level)) throw InvalidParameter("level is repeated, not refined");
  if (pix < 0 || pix >= level(coarse_level).npix()) throw IndexError("pixel index out of range");
  return {4 * pix, 4 * pix + 1, 4 * pix + 2, 4 * pix + 3};
}

WindowPartition GridHierarchy::window_partition(std::size_t fine_level, int coarse_offset) const {
  return sphdepth::window_partition(level(fine_level), coarse_offset);
}

}  // namespace sphdepth

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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sphdepth {

/// Depths outside (min_depth, max_depth) are treated as missing.
struct DepthRange {
  double min_depth = 0.01;
  double max_depth = 10.0;
};

/// ERP depth raster in meters with a validity mask; row-major, v * width + u.
struct DepthFrame {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> valid;
  DepthRange range;

  /// Mask from the range: finite and strictly inside (min_depth, max_depth).
  static DepthFrame ground_truth(int width, int height, std::vector<double> depth,
                                 DepthRange range = {});
  /// Every pixel valid.
  static DepthFrame prediction(int width, int height, std::vector<double> depth);

  std::size_t size() const noexcept { return depth.size(); }
  std::size_t valid_count() const noexcept;
  /// Throws ShapeError on mismatched buffer sizes.
  void validate() const;
};

std::vector<std::uint8_t> valid_mask(std::span<const double> depth, DepthRange range);

enum class LossKind { RMSLE, RMSERel };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& s);

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d pred, zero on invalid pixels
  std::size_t n_valid = 0;
};

/// sqrt(mean over valid (log p - log g)^2). Throws EmptyMaskError when no
/// pixel is valid and DomainError on a nonpositive prediction at a valid pixel.
LossResult rmsle_loss(std::span<const double> pred, std::span<const double> gt,
                      std::span<const std::uint8_t> mask);
/// sqrt(mean over valid ((p - g) / g)^2); same errors as rmsle_loss.
LossResult rmserel_loss(std::span<const double> pred, std::span<const double> gt,
                        std::span<const std::uint8_t> mask);
LossResult depth_loss(LossKind kind, std::span<const double> pred, std::span<const double> gt,
                      std::span<const std::uint8_t> mask);
/// Frame overloads use the joint mask of both frames.
LossResult rmsle_loss(const DepthFrame& pred, const DepthFrame& gt);
LossResult rmserel_loss(const DepthFrame& pred, const DepthFrame& gt);

struct MetricReport {
  double mae = 0.0;
  double rmse = 0.0;
  double rmsle = 0.0;
  double abs_rel = 0.0;
  double delta1 = 0.0;  // percent
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t n_valid = 0;

  /// {mae, rmse, rmsle, absrel, delta1, delta2, delta3, n_valid}
  std::string to_json() const;
  static MetricReport from_json(const std::string& text);
};

/// Pools pixels from several images before averaging.
class MetricAccumulator {
 public:
  void add(std::span<const double> pred, std::span<const double> gt,
           std::span<const std::uint8_t> mask);
  void add(const DepthFrame& pred, const DepthFrame& gt);
  std::size_t count() const noexcept { return n_; }
  /// Throws EmptyMaskError when nothing was added.
  MetricReport report() const;

 private:
  std::size_t n_ = 0;
  double abs_sum_ = 0.0;
  double sq_sum_ = 0.0;
  double log_sq_sum_ = 0.0;
  double rel_sum_ = 0.0;
  std::size_t within_[3] = {0, 0, 0};
};

MetricReport metrics(std::span<const double> pred, std::span<const double> gt,
                     std::span<const std::uint8_t> mask);
MetricReport metrics(const DepthFrame& pred, const DepthFrame& gt);

enum class Alignment { None, Median, Max };

std::string to_string(Alignment a);
Alignment alignment_from_string(const std::string& s);

/// stat(gt) / stat(pred) over valid pixels; 1 for Alignment::None.
/// Throws EmptyMaskError or DegenerateInput (nonpositive statistic).
double alignment_factor(std::span<const double> pred, std::span<const double> gt,
                        std::span<const std::uint8_t> mask, Alignment mode);
/// pred scaled by alignment_factor (every pixel, valid or not).
std::vector<double> align_scale(std::span<const double> pred, std::span<const double> gt,
                                std::span<const std::uint8_t> mask, Alignment mode);
DepthFrame align_scale(const DepthFrame& pred, const DepthFrame& gt, Alignment mode);

}  // namespace sphdepth

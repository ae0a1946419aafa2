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

#include "sphdepth/depth_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "sphdepth/error.hpp"

namespace sphdepth {
namespace {

void check_sizes(std::span<const double> pred, std::span<const double> gt,
                 std::span<const std::uint8_t> mask) {
  if (pred.size() != gt.size() || mask.size() != gt.size()) {
    throw ShapeError("prediction, ground truth and mask sizes differ");
  }
}

std::vector<std::uint8_t> joint_mask(const DepthFrame& pred, const DepthFrame& gt) {
  pred.validate();
  gt.validate();
  if (pred.width != gt.width || pred.height != gt.height) {
    throw ShapeError("depth frames have different dimensions");
  }
  std::vector<std::uint8_t> mask(gt.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = (pred.valid[i] && gt.valid[i]) ? 1 : 0;
  return mask;
}

// Shared body of both losses; residual(p, g) returns the per-pixel term and
// its derivative with respect to p.
template <typename Residual>
LossResult root_mean_square(std::span<const double> pred, std::span<const double> gt,
                            std::span<const std::uint8_t> mask, Residual residual) {
  check_sizes(pred, gt, mask);
  LossResult out;
  out.grad.assign(pred.size(), 0.0);
  std::vector<double> r(pred.size(), 0.0);
  std::vector<double> dr(pred.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    if (!(pred[i] > 0.0) || !std::isfinite(pred[i])) {
      throw DomainError("nonpositive or non-finite prediction at a valid pixel");
    }
    if (!(gt[i] > 0.0)) throw DomainError("nonpositive ground truth at a valid pixel");
    auto [ri, dri] = residual(pred[i], gt[i]);
    r[i] = ri;
    dr[i] = dri;
    sum += ri * ri;
    ++out.n_valid;
  }
  if (out.n_valid == 0) throw EmptyMaskError("no valid pixels");
  const double n = static_cast<double>(out.n_valid);
  out.loss = std::sqrt(sum / n);
  if (out.loss > 0.0) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (mask[i]) out.grad[i] = r[i] * dr[i] / (n * out.loss);
    }
  }
  return out;
}

}  // namespace

DepthFrame DepthFrame::ground_truth(int width, int height, std::vector<double> depth,
                                    DepthRange range) {
  DepthFrame f;
  f.width = width;
  f.height = height;
  f.valid = valid_mask(depth, range);
  f.depth = std::move(depth);
  f.range = range;
  f.validate();
  return f;
}

DepthFrame DepthFrame::prediction(int width, int height, std::vector<double> depth) {
  DepthFrame f;
  f.width = width;
  f.height = height;
  f.valid.assign(depth.size(), 1);
  f.depth = std::move(depth);
  f.range = {0.0, std::numeric_limits<double>::infinity()};
  f.validate();
  return f;
}

std::size_t DepthFrame::valid_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(valid.begin(), valid.end(), [](auto v) { return v != 0; }));
}

void DepthFrame::validate() const {
  if (width <= 0 || height <= 0) throw ShapeError("depth frame has nonpositive dimensions");
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (depth.size() != n || valid.size() != n) throw ShapeError("depth frame buffers do not match dimensions");
}

std::vector<std::uint8_t> valid_mask(std::span<const double> depth, DepthRange range) {
  std::vector<std::uint8_t> mask(depth.size());
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double d = depth[i];
    mask[i] = (std::isfinite(d) && d > range.min_depth && d < range.max_depth) ? 1 : 0;
  }
  return mask;
}

std::string to_string(LossKind kind) { return kind == LossKind::RMSLE ? "rmsle" : "rmserel"; }

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "rmsle") return LossKind::RMSLE;
  if (s == "rmserel") return LossKind::RMSERel;
  throw InvalidParameter("unknown loss '" + s + "' (expected rmsle or rmserel)");
}

LossResult rmsle_loss(std::span<const double> pred, std::span<const double> gt,
                      std::span<const std::uint8_t> mask) {
  return root_mean_square(pred, gt, mask, [](double p, double g) {
    return std::pair{std::log(p) - std::log(g), 1.0 / p};
  });
}

LossResult rmserel_loss(std::span<const double> pred, std::span<const double> gt,
                        std::span<const std::uint8_t> mask) {
  return root_mean_square(pred, gt, mask, [](double p, double g) {
    return std::pair{(p - g) / g, 1.0 / g};
  });
}

LossResult depth_loss(LossKind kind, std::span<const double> pred, std::span<const double> gt,
                      std::span<const std::uint8_t> mask) {
  return kind == LossKind::RMSLE ? rmsle_loss(pred, gt, mask) : rmserel_loss(pred, gt, mask);
}

LossResult rmsle_loss(const DepthFrame& pred, const DepthFrame& gt) {
  const auto mask = joint_mask(pred, gt);
  return rmsle_loss(pred.depth, gt.depth, mask);
}

LossResult rmserel_loss(const DepthFrame& pred, const DepthFrame& gt) {
  const auto mask = joint_mask(pred, gt);
  return rmserel_loss(pred.depth, gt.depth, mask);
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["mae"] = mae;
  j["rmse"] = rmse;
  j["rmsle"] = rmsle;
  j["absrel"] = abs_rel;
  j["delta1"] = delta1;
  j["delta2"] = delta2;
  j["delta3"] = delta3;
  j["n_valid"] = n_valid;
  return j.dump(2);
}

MetricReport MetricReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricReport r;
  r.mae = j.at("mae").get<double>();
  r.rmse = j.at("rmse").get<double>();
  r.rmsle = j.at("rmsle").get<double>();
  r.abs_rel = j.at("absrel").get<double>();
  r.delta1 = j.at("delta1").get<double>();
  r.delta2 = j.at("delta2").get<double>();
  r.delta3 = j.at("delta3").get<double>();
  r.n_valid = j.at("n_valid").get<std::size_t>();
  return r;
}

void MetricAccumulator::add(std::span<const double> pred, std::span<const double> gt,
                            std::span<const std::uint8_t> mask) {
  check_sizes(pred, gt, mask);
  static constexpr double kThresholds[3] = {1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    const double p = pred[i];
    const double g = gt[i];
    if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("nonpositive or non-finite prediction at a valid pixel");
    if (!(g > 0.0)) throw DomainError("nonpositive ground truth at a valid pixel");
    const double e = p - g;
    const double le = std::log(p) - std::log(g);
    abs_sum_ += std::abs(e);
    sq_sum_ += e * e;
    log_sq_sum_ += le * le;
    rel_sum_ += std::abs(e) / g;
    const double ratio = std::max(p / g, g / p);
    for (int k = 0; k < 3; ++k) {
      if (ratio < kThresholds[k]) ++within_[k];
    }
    ++n_;
  }
}

void MetricAccumulator::add(const DepthFrame& pred, const DepthFrame& gt) {
  const auto mask = joint_mask(pred, gt);
  add(pred.depth, gt.depth, mask);
}

MetricReport MetricAccumulator::report() const {
  if (n_ == 0) throw EmptyMaskError("no valid pixels");
  const double n = static_cast<double>(n_);
  MetricReport r;
  r.n_valid = n_;
  r.mae = abs_sum_ / n;
  r.rmse = std::sqrt(sq_sum_ / n);
  r.rmsle = std::sqrt(log_sq_sum_ / n);
  r.abs_rel = rel_sum_ / n;
  r.delta1 = 100.0 * static_cast<double>(within_[0]) / n;
  r.delta2 = 100.0 * static_cast<double>(within_[1]) / n;
  r.delta3 = 100.0 * static_cast<double>(within_[2]) / n;
  return r;
}

MetricReport metrics(std::span<const double> pred, std::span<const double> gt,
                     std::span<const std::uint8_t> mask) {
  MetricAccumulator acc;
  acc.add(pred, gt, mask);
  return acc.report();
}

MetricReport metrics(const DepthFrame& pred, const DepthFrame& gt) {
  MetricAccumulator acc;
  acc.add(pred, gt);
  return acc.report();
}

std::string to_string(Alignment a) {
  switch (a) {
    case Alignment::None: return "none";
    case Alignment::Median: return "median";
    case Alignment::Max: return "max";
  }
  return "none";
}

Alignment alignment_from_string(const std::string& s) {
  if (s == "none") return Alignment::None;
  if (s == "median") return Alignment::Median;
  if (s == "max") return Alignment::Max;
  throw InvalidParameter("unknown alignment '" + s + "' (expected none, median or max)");
}

namespace {

double statistic(std::vector<double> v, Alignment mode) {
  if (mode == Alignment::Max) return *std::max_element(v.begin(), v.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double alignment_factor(std::span<const double> pred, std::span<const double> gt,
                        std::span<const std::uint8_t> mask, Alignment mode) {
  check_sizes(pred, gt, mask);
  if (mode == Alignment::None) return 1.0;
  std::vector<double> p;
  std::vector<double> g;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    p.push_back(pred[i]);
    g.push_back(gt[i]);
  }
  if (p.empty()) throw EmptyMaskError("no valid pixels to align");
  const double sp = statistic(std::move(p), mode);
  const double sg = statistic(std::move(g), mode);
  if (!(sp > 0.0) || !(sg > 0.0)) throw DegenerateInput("alignment statistic is not positive");
  return sg / sp;
}

std::vector<double> align_scale(std::span<const double> pred, std::span<const double> gt,
                                std::span<const std::uint8_t> mask, Alignment mode) {
  const double s = alignment_factor(pred, gt, mask, mode);
  std::vector<double> out(pred.begin(), pred.end());
  if (s != 1.0) {
    for (double& v : out) v *= s;
  }
  return out;
}

DepthFrame align_scale(const DepthFrame& pred, const DepthFrame& gt, Alignment mode) {
  const auto mask = joint_mask(pred, gt);
  DepthFrame out = pred;
  out.depth = align_scale(pred.depth, gt.depth, mask, mode);
  return out;
}

}  // namespace sphdepth

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
#include <cmath>
#include <numbers>

#include "gradcheck.hpp"
#include "sphdepth/depth_eval.hpp"
#include "sphdepth/error.hpp"
#include "sphdepth/random.hpp"

namespace sphdepth {
namespace {

using Mask = std::vector<std::uint8_t>;

std::vector<double> random_depths(std::size_t n, Rng& rng, double lo = 0.2, double hi = 9.0) {
  std::vector<double> d(n);
  for (double& v : d) v = rng.uniform(lo, hi);
  return d;
}

std::vector<double> scaled(std::vector<double> v, double s) {
  for (double& x : v) x *= s;
  return v;
}

TEST(Rmsle, Identities) {
  Rng rng(1);
  const auto gt = random_depths(500, rng);
  const Mask all(gt.size(), 1);
  EXPECT_EQ(rmsle_loss(gt, gt, all).loss, 0.0);
  EXPECT_NEAR(rmsle_loss(scaled(gt, std::numbers::e), gt, all).loss, 1.0, 1e-9);
  const std::vector<double> p = {1.0, 2.0};
  const std::vector<double> g = {2.0, 1.0};
  EXPECT_NEAR(rmsle_loss(p, g, Mask(2, 1)).loss, std::numbers::ln2, 1e-12);
}

TEST(Rmsle, JointScaleInvariance) {
  Rng rng(2);
  const auto gt = random_depths(300, rng);
  const auto pred = random_depths(300, rng);
  const Mask all(gt.size(), 1);
  const double base = rmsle_loss(pred, gt, all).loss;
  for (double s : {0.1, 1.0, 10.0}) {
    EXPECT_NEAR(rmsle_loss(scaled(pred, s), scaled(gt, s), all).loss, base, 1e-9) << s;
  }
}

TEST(Rmserel, Identities) {
  Rng rng(3);
  const auto gt = random_depths(200, rng);
  const Mask all(gt.size(), 1);
  EXPECT_EQ(rmserel_loss(gt, gt, all).loss, 0.0);
  EXPECT_NEAR(rmserel_loss(scaled(gt, 2.0), gt, all).loss, 1.0, 1e-9);
  EXPECT_NEAR(rmserel_loss(std::vector<double>{3.0}, std::vector<double>{2.0}, Mask{1}).loss, 0.5,
              1e-15);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  const std::size_t n = 64;
  const auto gt = random_depths(n, rng);
  Mask mask(n, 1);
  for (std::size_t i = 0; i < n; i += 5) mask[i] = 0;
  for (LossKind kind : {LossKind::RMSLE, LossKind::RMSERel}) {
    Matrix p(1, n);
    const auto init = random_depths(n, rng);
    std::copy(init.begin(), init.end(), p.data());
    auto loss = [&] {
      return depth_loss(kind, std::span<const double>(p.data(), n), gt, mask).loss;
    };
    const LossResult r = depth_loss(kind, std::span<const double>(p.data(), n), gt, mask);
    Matrix g(1, n);
    std::copy(r.grad.begin(), r.grad.end(), g.data());
    EXPECT_LT(testing::gradient_error(p, g, loss), 1e-6) << to_string(kind);
    for (std::size_t i = 0; i < n; i += 5) EXPECT_EQ(r.grad[i], 0.0);
  }
}

TEST(Losses, InvalidPixelsAreIgnoredBitwise) {
  Rng rng(5);
  const std::size_t n = 400;
  const auto gt = random_depths(n, rng);
  auto pred = random_depths(n, rng);
  Mask mask(n, 1);
  for (std::size_t i = 0; i < n; i += 3) mask[i] = 0;
  const LossResult a = rmsle_loss(pred, gt, mask);
  const LossResult ar = rmserel_loss(pred, gt, mask);
  const MetricReport ma = metrics(pred, gt, mask);
  for (std::size_t i = 0; i < n; i += 3) pred[i] = rng.uniform(-5.0, 50.0);
  EXPECT_EQ(rmsle_loss(pred, gt, mask).loss, a.loss);
  EXPECT_EQ(rmserel_loss(pred, gt, mask).loss, ar.loss);
  EXPECT_EQ(metrics(pred, gt, mask).to_json(), ma.to_json());
  EXPECT_EQ(a.n_valid, n - (n + 2) / 3);
}

TEST(Losses, Errors) {
  const std::vector<double> g = {1.0, 2.0};
  EXPECT_THROW(rmsle_loss(g, g, Mask{0, 0}), EmptyMaskError);
  EXPECT_THROW(rmsle_loss(std::vector<double>{0.0, 1.0}, g, Mask{1, 1}), DomainError);
  EXPECT_THROW(rmsle_loss(std::vector<double>{1.0}, g, Mask{1, 1}), ShapeError);
  EXPECT_NO_THROW(rmsle_loss(std::vector<double>{0.0, 1.0}, g, Mask{0, 1}));
  EXPECT_EQ(loss_kind_from_string("rmserel"), LossKind::RMSERel);
  EXPECT_THROW(loss_kind_from_string("l1"), InvalidParameter);
}

TEST(DepthFrame, GroundTruthMask) {
  const DepthFrame f =
      DepthFrame::ground_truth(4, 1, {0.005, 1.0, 10.0, std::nan("")}, DepthRange{0.01, 10.0});
  EXPECT_EQ(f.valid, (Mask{0, 1, 0, 0}));
  EXPECT_EQ(f.valid_count(), 1u);
  const DepthFrame p = DepthFrame::prediction(4, 1, {1.0, 2.0, 3.0, 4.0});
  EXPECT_EQ(p.valid_count(), 4u);
  EXPECT_NEAR(rmsle_loss(p, f).loss, std::log(2.0), 1e-15);
  EXPECT_THROW(DepthFrame::prediction(3, 2, {1.0}).validate(), ShapeError);
}

// Definitional recomputation, kept deliberately naive.
struct Oracle {
  double mae = 0, rmse = 0, rmsle = 0, absrel = 0, d[3] = {0, 0, 0};
};

Oracle brute_force(const std::vector<double>& p, const std::vector<double>& g, const Mask& m) {
  Oracle o;
  double n = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!m[i]) continue;
    n += 1;
    o.mae += std::fabs(p[i] - g[i]);
    o.rmse += std::pow(p[i] - g[i], 2);
    o.rmsle += std::pow(std::log(p[i]) - std::log(g[i]), 2);
    o.absrel += std::fabs(p[i] - g[i]) / g[i];
    const double ratio = std::max(p[i] / g[i], g[i] / p[i]);
    for (int k = 0; k < 3; ++k) o.d[k] += ratio < std::pow(1.25, k + 1) ? 1 : 0;
  }
  o.mae /= n;
  o.rmse = std::sqrt(o.rmse / n);
  o.rmsle = std::sqrt(o.rmsle / n);
  o.absrel /= n;
  for (double& v : o.d) v = 100.0 * v / n;
  return o;
}

TEST(Metrics, MatchBruteForceOracle) {
  Rng rng(6);
  const std::size_t n = 10000;
  const auto gt = random_depths(n, rng);
  std::vector<double> pred(n);
  for (std::size_t i = 0; i < n; ++i) pred[i] = gt[i] * std::exp(rng.normal() * 0.3);
  Mask mask(n, 1);
  for (std::size_t i = 0; i < n; i += 7) mask[i] = 0;
  const MetricReport r = metrics(pred, gt, mask);
  const Oracle o = brute_force(pred, gt, mask);
  EXPECT_NEAR(r.mae, o.mae, 1e-9);
  EXPECT_NEAR(r.rmse, o.rmse, 1e-9);
  EXPECT_NEAR(r.rmsle, o.rmsle, 1e-9);
  EXPECT_NEAR(r.abs_rel, o.absrel, 1e-9);
  EXPECT_NEAR(r.delta1, o.d[0], 1e-9);
  EXPECT_NEAR(r.delta2, o.d[1], 1e-9);
  EXPECT_NEAR(r.delta3, o.d[2], 1e-9);
  EXPECT_EQ(r.n_valid, n - (n + 6) / 7);
}

TEST(Metrics, DeltaOrdering) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto gt = random_depths(200, rng);
    const auto pred = random_depths(200, rng);
    const MetricReport r = metrics(pred, gt, Mask(200, 1));
    EXPECT_LE(r.delta1, r.delta2);
    EXPECT_LE(r.delta2, r.delta3);
    EXPECT_GE(r.delta1, 0.0);
    EXPECT_LE(r.delta3, 100.0);
  }
}

TEST(Metrics, UniformRatioCases) {
  Rng rng(8);
  const auto gt = random_depths(100, rng);
  const Mask all(100, 1);
  const MetricReport same = metrics(gt, gt, all);
  EXPECT_EQ(same.mae, 0.0);
  EXPECT_EQ(same.rmsle, 0.0);
  EXPECT_EQ(same.delta1, 100.0);
  const MetricReport r = metrics(scaled(gt, 1.3), gt, all);
  EXPECT_EQ(r.delta1, 0.0);
  EXPECT_EQ(r.delta2, 100.0);
  EXPECT_EQ(r.delta3, 100.0);
}

TEST(Metrics, AccumulatorPoolsPixels) {
  Rng rng(9);
  const auto g1 = random_depths(50, rng);
  const auto p1 = random_depths(50, rng);
  const auto g2 = random_depths(30, rng);
  const auto p2 = random_depths(30, rng);
  MetricAccumulator acc;
  acc.add(p1, g1, Mask(50, 1));
  acc.add(p2, g2, Mask(30, 1));
  std::vector<double> p = p1, g = g1;
  p.insert(p.end(), p2.begin(), p2.end());
  g.insert(g.end(), g2.begin(), g2.end());
  const MetricReport pooled = metrics(p, g, Mask(80, 1));
  const MetricReport r = acc.report();
  EXPECT_NEAR(r.rmse, pooled.rmse, 1e-12);
  EXPECT_NEAR(r.delta1, pooled.delta1, 1e-12);
  EXPECT_EQ(r.n_valid, 80u);
  EXPECT_THROW(MetricAccumulator().report(), EmptyMaskError);
}

TEST(MetricReport, JsonRoundTrip) {
  MetricReport r;
  r.mae = 0.1;
  r.rmse = 0.2;
  r.rmsle = 0.3;
  r.abs_rel = 0.4;
  r.delta1 = 50;
  r.delta2 = 60;
  r.delta3 = 70;
  r.n_valid = 12;
  const std::string js = r.to_json();
  for (const char* key : {"\"mae\"", "\"rmse\"", "\"rmsle\"", "\"absrel\"", "\"delta1\"",
                          "\"delta2\"", "\"delta3\"", "\"n_valid\""}) {
    EXPECT_NE(js.find(key), std::string::npos) << key;
  }
  EXPECT_EQ(MetricReport::from_json(js).to_json(), js);
}

TEST(Alignment, RecoversScale) {
  Rng rng(10);
  const auto gt = random_depths(101, rng);
  const Mask all(101, 1);
  EXPECT_EQ(align_scale(scaled(gt, 4.0), gt, all, Alignment::Median), gt);
  EXPECT_EQ(align_scale(scaled(gt, 0.25), gt, all, Alignment::Max), gt);
  for (double s : {0.37, 3.1}) {
    const auto a = align_scale(scaled(gt, s), gt, all, Alignment::Median);
    for (std::size_t i = 0; i < gt.size(); ++i) EXPECT_NEAR(a[i], gt[i], 1e-14 * gt[i]);
    const MetricReport m = metrics(a, gt, all);
    EXPECT_NEAR(m.rmsle, 0.0, 1e-14);
    EXPECT_EQ(m.delta1, 100.0);
  }
  EXPECT_EQ(align_scale(gt, gt, all, Alignment::Median), gt);
}

TEST(Alignment, MedianOfEvenCountAndErrors) {
  const std::vector<double> p = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> g = {2.0, 4.0, 6.0, 8.0};
  EXPECT_DOUBLE_EQ(alignment_factor(p, g, Mask(4, 1), Alignment::Median), 2.0);
  EXPECT_DOUBLE_EQ(alignment_factor(p, g, Mask(4, 1), Alignment::Max), 2.0);
  EXPECT_EQ(alignment_factor(p, g, Mask(4, 1), Alignment::None), 1.0);
  EXPECT_THROW(alignment_factor(p, g, Mask(4, 0), Alignment::Median), EmptyMaskError);
  const std::vector<double> zeros(4, 0.0);
  EXPECT_THROW(alignment_factor(zeros, g, Mask(4, 1), Alignment::Max), DegenerateInput);
  EXPECT_EQ(alignment_from_string("median"), Alignment::Median);
  EXPECT_THROW(alignment_from_string("mean"), InvalidParameter);
}

}  // namespace
}  // namespace sphdepth

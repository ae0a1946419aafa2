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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sphdepth/caf_decoder.hpp"
#include "sphdepth/depth_eval.hpp"
#include "sphdepth/optimizer.hpp"
#include "sphdepth/synth_data.hpp"

namespace sphdepth {

struct TrainConfig {
  ModelConfig model;
  OptimizerConfig optimizer;
  int batch_size = 4;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::RMSLE;
  int max_steps = 300;
  int workers = 1;

  void validate() const;
  std::string to_json() const;
  /// Keys absent from the JSON keep their defaults; "model" may be omitted.
  static TrainConfig from_json(const std::string& text);
};

/// One image with ground truth on the ERP raster and on the finest grid.
struct Sample {
  std::string id;
  ErpImage image;
  DepthFrame depth;
  Matrix sphere_depth;                   // finest npix x 1
  std::vector<std::uint8_t> sphere_mask;  // valid iff every tap reads a valid raster pixel
};

Sample prepare_sample(const ModelTables& tables, std::string id, ErpImage image, DepthFrame depth);

struct RawSample {
  std::string id;
  ErpImage image;
  DepthFrame depth;
};

/// Reads the color/depth files of one split.
std::vector<RawSample> load_split(const DatasetManifest& manifest, const std::string& split);
std::vector<Sample> prepare_samples(const ModelTables& tables, const std::vector<RawSample>& raw);

/// Everything derived from a model config and an input size.
struct ModelContext {
  ModelConfig config;
  DecoderGeometry geometry;
  ModelTables tables;

  ModelContext(const ModelConfig& config, int width, int height, int workers = 1);
};

struct StepLog {
  int step = 0;
  double loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<StepLog> log;

  /// Mean of the last `window` logged losses.
  double smoothed_final_loss(std::size_t window = 20) const;
};

/// Mean sphere-space loss of a batch plus its parameter gradient (summed in
/// sample order, then divided by the batch size).
double batch_loss_and_grad(const ModelContext& ctx, const ModelParams& params,
                           const std::vector<const Sample*>& batch, LossKind loss, int workers,
                           ModelParams* grad);

/// Runs max_steps optimizer updates starting from `initial`. Batches are
/// drawn from seeded per-epoch shuffles.
TrainResult train_model(const TrainConfig& config, const ModelContext& ctx,
                        const std::vector<Sample>& train, ModelParams initial,
                        const std::function<void(const StepLog&)>& on_step = {});

/// Pooled ERP metrics over the samples.
MetricReport evaluate(const ModelContext& ctx, const ModelParams& params,
                      const std::vector<Sample>& samples, Alignment align = Alignment::None,
                      int workers = 1);
/// Mean per-sample sphere-space loss.
double mean_sphere_loss(const ModelContext& ctx, const ModelParams& params,
                        const std::vector<Sample>& samples, LossKind loss, int workers = 1);

void write_loss_csv(const std::filesystem::path& path, const std::vector<StepLog>& log);

// ---------------------------------------------------------------------------
// Ablation harnesses

/// "original" -> nsides {4, 8, 16, 32}, "downsample" -> {2, 4, 8, 16},
/// "upsample" -> {8, 16, 32, 32}.
std::vector<int> preset_nsides(const std::string& preset);
std::vector<std::int64_t> preset_pixels(const std::string& preset);

struct AblationRun {
  std::string name;
  ModelConfig model;
  LossKind loss = LossKind::RMSLE;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps = 0;
  MetricReport test;
};

struct AblationData {
  std::vector<RawSample> train;
  std::vector<RawSample> test;
  int width = 0;
  int height = 0;
};

AblationData load_ablation_data(const DatasetManifest& manifest, std::size_t max_train = 0,
                                std::size_t max_test = 0);

/// Trains and evaluates one variant of `base` per entry.
std::vector<AblationRun> ablate_pixels(const TrainConfig& base, const AblationData& data,
                                       const std::vector<std::string>& presets);
std::vector<AblationRun> ablate_spe(const TrainConfig& base, const AblationData& data,
                                    const std::vector<SpeCoords>& coords);
std::vector<AblationRun> ablate_loss(const TrainConfig& base, const AblationData& data,
                                     const std::vector<LossKind>& losses);

std::string ablation_report_json(const std::string& kind, const std::vector<AblationRun>& runs);

struct TiltRow {
  double angle = 0.0;
  MetricReport metrics;
};

/// Re-renders every scene at each pitch angle, runs the model and pools
/// metrics per angle. Renders are quantized like the dataset files so the
/// 0 degree row matches evaluation of the stored split.
std::vector<TiltRow> tilt_eval(const ModelContext& ctx, const ModelParams& params,
                               const std::vector<const DatasetEntry*>& scenes,
                               const std::vector<double>& angles, DepthRange range,
                               Alignment align = Alignment::None, int workers = 1);

std::string tilt_report_json(const std::vector<TiltRow>& rows, const std::string& axis);

}  // namespace sphdepth

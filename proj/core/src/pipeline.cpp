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

#include "sphdepth/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "sphdepth/error.hpp"
#include "sphdepth/image_io.hpp"
#include "sphdepth/parallel.hpp"
#include "sphdepth/random.hpp"

namespace sphdepth {
namespace {

using nlohmann::ordered_json;

void add_into(ModelParams& dst, ModelParams& src) {
  const auto d = collect_params(dst);
  const auto s = collect_params(src);
  for (std::size_t i = 0; i < d.size(); ++i) *d[i].matrix += *s[i].matrix;
}

ordered_json metrics_json(const MetricReport& r) { return ordered_json::parse(r.to_json()); }

}  // namespace

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  model.validate();
  optimizer.validate();
  if (batch_size < 1) throw InvalidParameter("batch size must be at least 1");
  if (max_steps < 0) throw InvalidParameter("max steps must be nonnegative");
  if (workers < 1) throw InvalidParameter("workers must be at least 1");
}

std::string TrainConfig::to_json() const {
  ordered_json j;
  j["model"] = ordered_json::parse(model.to_json());
  j["optimizer"] = to_string(optimizer.kind);
  j["learning_rate"] = optimizer.learning_rate;
  j["weight_decay"] = optimizer.weight_decay;
  j["momentum"] = optimizer.momentum;
  j["decay_every"] = optimizer.decay_every;
  j["decay_factor"] = optimizer.decay_factor;
  j["warmup_steps"] = optimizer.warmup_steps;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["loss"] = to_string(loss);
  j["max_steps"] = max_steps;
  j["workers"] = workers;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw InvalidParameter("train config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "model") c.model = ModelConfig::from_json(value.dump());
      else if (key == "optimizer") c.optimizer.kind = optimizer_from_string(value.get<std::string>());
      else if (key == "learning_rate") c.optimizer.learning_rate = value.get<double>();
      else if (key == "weight_decay") c.optimizer.weight_decay = value.get<double>();
      else if (key == "momentum") c.optimizer.momentum = value.get<double>();
      else if (key == "decay_every") c.optimizer.decay_every = value.get<int>();
      else if (key == "decay_factor") c.optimizer.decay_factor = value.get<double>();
      else if (key == "warmup_steps") c.optimizer.warmup_steps = value.get<int>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "loss") c.loss = loss_kind_from_string(value.get<std::string>());
      else if (key == "max_steps") c.max_steps = value.get<int>();
      else if (key == "workers") c.workers = value.get<int>();
      else throw InvalidParameter("unknown train config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidParameter(std::string("malformed train config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Samples

Sample prepare_sample(const ModelTables& tables, std::string id, ErpImage image, DepthFrame depth) {
  image.validate(true);
  depth.validate();
  if (image.width != tables.width || image.height != tables.height ||
      depth.width != tables.width || depth.height != tables.height) {
    throw PreconditionError("sample size does not match the transfer tables");
  }
  const auto& rows = tables.input_to_sphere.rows;
  Sample s;
  s.id = std::move(id);
  s.sphere_depth = Matrix(rows.size(), 1);
  s.sphere_mask.assign(rows.size(), 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    bool ok = true;
    double v = 0.0;
    for (const Tap& t : rows[r]) {
      if (t.weight == 0.0f) continue;
      if (!depth.valid[t.index]) ok = false;
      v += static_cast<double>(t.weight) * depth.depth[t.index];
    }
    s.sphere_mask[r] = ok ? 1 : 0;
    s.sphere_depth(r, 0) = ok ? v : 0.0;
  }
  s.image = std::move(image);
  s.depth = std::move(depth);
  return s;
}

std::vector<RawSample> load_split(const DatasetManifest& manifest, const std::string& split) {
  std::vector<RawSample> out;
  for (const DatasetEntry* e : manifest.split(split)) {
    RawSample r;
    r.id = e->id;
    r.image = read_png(e->color);
    const ErpImage d = read_pfm(e->depth);
    if (d.channels() != 1 || d.width != r.image.width || d.height != r.image.height) {
      throw IoError("depth file " + e->depth.string() + " does not match its color image");
    }
    r.depth = DepthFrame::ground_truth(d.width, d.height,
                                       std::vector<double>(d.pixels.values().begin(), d.pixels.values().end()),
                                       manifest.range);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Sample> prepare_samples(const ModelTables& tables, const std::vector<RawSample>& raw) {
  std::vector<Sample> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(prepare_sample(tables, r.id, r.image, r.depth));
  return out;
}

ModelContext::ModelContext(const ModelConfig& c, int width, int height, int workers)
    : config(c), geometry(c), tables(build_model_tables(c, geometry, width, height, workers)) {}

// ---------------------------------------------------------------------------
// Training

double TrainResult::smoothed_final_loss(std::size_t window) const {
  if (log.empty()) throw PreconditionError("no training steps were logged");
  const std::size_t n = std::min(window, log.size());
  double s = 0.0;
  for (std::size_t i = log.size() - n; i < log.size(); ++i) s += log[i].loss;
  return s / static_cast<double>(n);
}

double batch_loss_and_grad(const ModelContext& ctx, const ModelParams& params,
                           const std::vector<const Sample*>& batch, LossKind loss, int workers,
                           ModelParams* grad) {
  if (batch.empty()) throw InvalidParameter("empty batch");
  std::vector<double> losses(batch.size());
  std::vector<ModelParams> grads(grad ? batch.size() : 0);
  parallel_for(batch.size(), workers, [&](std::size_t b) {
    const Sample& s = *batch[b];
    ModelCache cache;
    const ModelOutput out = model_forward(ctx.config, ctx.geometry, ctx.tables, params, s.image,
                                          grad ? &cache : nullptr);
    Matrix pred = out.log_depth;
    for (double& v : pred.values()) v = std::exp(v);
    const LossResult lr = depth_loss(loss, pred.values(), s.sphere_depth.values(), s.sphere_mask);
    losses[b] = lr.loss;
    if (!grad) return;
    Matrix g(pred.rows(), 1);
    for (std::size_t i = 0; i < pred.rows(); ++i) g(i, 0) = lr.grad[i] * pred(i, 0);
    grads[b] = zeros_like(params);
    model_backward(ctx.config, ctx.geometry, ctx.tables, params, cache, g, grads[b]);
  });
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (double l : losses) total += l;
  if (grad) {
    *grad = std::move(grads[0]);
    for (std::size_t b = 1; b < grads.size(); ++b) add_into(*grad, grads[b]);
    grad->visit("", [&](const std::string&, Matrix& m) { m *= inv; });
  }
  return total * inv;
}

TrainResult train_model(const TrainConfig& config, const ModelContext& ctx,
                        const std::vector<Sample>& train, ModelParams initial,
                        const std::function<void(const StepLog&)>& on_step) {
  config.validate();
  if (train.empty()) throw PreconditionError("training set is empty");
  TrainResult result;
  result.params = std::move(initial);
  if (config.max_steps == 0) return result;

  Optimizer opt(config.optimizer, collect_params(result.params));
  Rng rng(derive_seed(config.seed, 0x747261696eULL));
  std::vector<std::size_t> order(train.size());
  std::size_t cursor = order.size();
  for (int step = 1; step <= config.max_steps; ++step) {
    std::vector<const Sample*> batch;
    while (batch.size() < static_cast<std::size_t>(config.batch_size)) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        }
        cursor = 0;
      }
      batch.push_back(&train[order[cursor++]]);
    }
    ModelParams grad;
    const double loss = batch_loss_and_grad(ctx, result.params, batch, config.loss, config.workers, &grad);
    if (!std::isfinite(loss)) throw DomainError("training loss became non-finite at step " + std::to_string(step));
    opt.step(collect_params(grad));
    StepLog entry{step, loss, opt.last_rate()};
    result.log.push_back(entry);
    if (on_step) on_step(entry);
  }
  return result;
}

MetricReport evaluate(const ModelContext& ctx, const ModelParams& params,
                      const std::vector<Sample>& samples, Alignment align, int workers) {
  if (samples.empty()) throw PreconditionError("evaluation set is empty");
  std::vector<DepthFrame> preds(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    DepthFrame p = model_forward(ctx.config, ctx.geometry, ctx.tables, params, samples[i].image).depth;
    preds[i] = align == Alignment::None ? std::move(p) : align_scale(p, samples[i].depth, align);
  });
  MetricAccumulator acc;
  for (std::size_t i = 0; i < samples.size(); ++i) acc.add(preds[i], samples[i].depth);
  return acc.report();
}

double mean_sphere_loss(const ModelContext& ctx, const ModelParams& params,
                        const std::vector<Sample>& samples, LossKind loss, int workers) {
  std::vector<const Sample*> all;
  for (const auto& s : samples) all.push_back(&s);
  return batch_loss_and_grad(ctx, params, all, loss, workers, nullptr);
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<StepLog>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step,loss,learning_rate\n";
  out.precision(17);
  for (const auto& e : log) out << e.step << "," << e.loss << "," << e.learning_rate << "\n";
}

// ---------------------------------------------------------------------------
// Ablations

std::vector<int> preset_nsides(const std::string& preset) {
  if (preset == "original") return {4, 8, 16, 32};
  if (preset == "downsample") return {2, 4, 8, 16};
  if (preset == "upsample") return {8, 16, 32, 32};
  throw InvalidParameter("unknown pixel preset '" + preset + "' (expected original, downsample or upsample)");
}

std::vector<std::int64_t> preset_pixels(const std::string& preset) {
  std::vector<std::int64_t> out;
  for (int n : preset_nsides(preset)) out.push_back(12LL * n * n);
  return out;
}

AblationData load_ablation_data(const DatasetManifest& manifest, std::size_t max_train,
                                std::size_t max_test) {
  AblationData d;
  d.width = manifest.width;
  d.height = manifest.height;
  d.train = load_split(manifest, "train");
  d.test = load_split(manifest, "test");
  if (max_train > 0 && d.train.size() > max_train) d.train.resize(max_train);
  if (max_test > 0 && d.test.size() > max_test) d.test.resize(max_test);
  if (d.train.empty() || d.test.empty()) {
    throw PreconditionError("ablation needs both train and test samples");
  }
  return d;
}

namespace {

AblationRun run_variant(const std::string& name, const TrainConfig& cfg, const AblationData& data) {
  cfg.validate();
  const ModelContext ctx(cfg.model, data.width, data.height, cfg.workers);
  const auto train = prepare_samples(ctx.tables, data.train);
  const auto test = prepare_samples(ctx.tables, data.test);
  AblationRun run;
  run.name = name;
  run.model = cfg.model;
  run.loss = cfg.loss;
  ModelParams init = init_model(cfg.model, cfg.seed);
  const TrainResult tr = train_model(cfg, ctx, train, std::move(init));
  run.steps = static_cast<int>(tr.log.size());
  if (!tr.log.empty()) {
    run.initial_loss = tr.log.front().loss;
    run.final_loss = tr.smoothed_final_loss();
  } else {
    run.initial_loss = run.final_loss = mean_sphere_loss(ctx, tr.params, train, cfg.loss, cfg.workers);
  }
  run.test = evaluate(ctx, tr.params, test, Alignment::None, cfg.workers);
  return run;
}

}  // namespace

std::vector<AblationRun> ablate_pixels(const TrainConfig& base, const AblationData& data,
                                       const std::vector<std::string>& presets) {
  for (const auto& p : presets) preset_nsides(p);
  std::vector<AblationRun> runs;
  for (const auto& p : presets) {
    TrainConfig cfg = base;
    cfg.model.nsides = preset_nsides(p);
    runs.push_back(run_variant(p, cfg, data));
  }
  return runs;
}

std::vector<AblationRun> ablate_spe(const TrainConfig& base, const AblationData& data,
                                    const std::vector<SpeCoords>& coords) {
  std::vector<AblationRun> runs;
  for (auto c : coords) {
    TrainConfig cfg = base;
    cfg.model.variant = Variant::Fusion;
    cfg.model.spe_coords = c;
    runs.push_back(run_variant(to_string(c), cfg, data));
  }
  return runs;
}

std::vector<AblationRun> ablate_loss(const TrainConfig& base, const AblationData& data,
                                     const std::vector<LossKind>& losses) {
  std::vector<AblationRun> runs;
  for (auto l : losses) {
    TrainConfig cfg = base;
    cfg.loss = l;
    runs.push_back(run_variant(to_string(l), cfg, data));
  }
  return runs;
}

std::string ablation_report_json(const std::string& kind, const std::vector<AblationRun>& runs) {
  ordered_json j;
  j["ablation"] = kind;
  j["runs"] = ordered_json::array();
  for (const auto& r : runs) {
    ordered_json rj;
    rj["name"] = r.name;
    rj["nsides"] = r.model.nsides;
    std::vector<std::int64_t> pixels;
    for (int n : r.model.nsides) pixels.push_back(12LL * n * n);
    rj["pixels"] = pixels;
    rj["variant"] = to_string(r.model.variant);
    rj["spe_coords"] = to_string(r.model.spe_coords);
    rj["loss"] = to_string(r.loss);
    rj["steps"] = r.steps;
    rj["initial_train_loss"] = r.initial_loss;
    rj["final_train_loss"] = r.final_loss;
    rj["test"] = metrics_json(r.test);
    j["runs"].push_back(rj);
  }
  return j.dump(2);
}

std::vector<TiltRow> tilt_eval(const ModelContext& ctx, const ModelParams& params,
                               const std::vector<const DatasetEntry*>& scenes,
                               const std::vector<double>& angles, DepthRange range,
                               Alignment align, int workers) {
  if (scenes.empty()) throw PreconditionError("tilt evaluation needs at least one scene");
  if (angles.empty()) throw InvalidParameter("tilt evaluation needs at least one angle");
  std::vector<TiltRow> rows;
  for (double a : angles) {
    std::vector<Sample> samples;
    for (const DatasetEntry* e : scenes) {
      Render r = render_erp(tilted(e->scene, a), ctx.tables.width, ctx.tables.height, range, workers);
      quantize_for_storage(r);
      samples.push_back(prepare_sample(ctx.tables, e->id, std::move(r.color), std::move(r.depth)));
    }
    rows.push_back({a, evaluate(ctx, params, samples, align, workers)});
  }
  return rows;
}

std::string tilt_report_json(const std::vector<TiltRow>& rows, const std::string& axis) {
  ordered_json j;
  j["tilt_axis"] = axis;
  j["rows"] = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json rj;
    rj["angle_deg"] = r.angle;
    rj["metrics"] = metrics_json(r.metrics);
    j["rows"].push_back(rj);
  }
  return j.dump(2);
}

}  // namespace sphdepth

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

#include "commands.hpp"

#include <bit>
#include <cctype>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sphdepth/checkpoint.hpp"
#include "sphdepth/error.hpp"
#include "sphdepth/image_io.hpp"
#include "sphdepth/pipeline.hpp"

namespace sphdepth::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fails before any work is done when an output could not be created later.
void require_output_dir(const fs::path& path) {
  const fs::path parent = path.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw IoError("output directory " + parent.string() + " does not exist");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << "\n";
  if (!out) throw IoError("failed to write " + path.string());
}

std::string extension(const fs::path& path) {
  std::string e = path.extension().string();
  for (char& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e;
}

ErpImage read_image(const fs::path& path) {
  const auto e = extension(path);
  if (e == ".png") return read_png(path);
  if (e == ".pfm") return read_pfm(path);
  throw IoError("unsupported image format " + path.string() + " (expected .png or .pfm)");
}

void check_image_extension(const fs::path& path) {
  const auto e = extension(path);
  if (e != ".png" && e != ".pfm") {
    throw InvalidParameter("unsupported image format " + path.string() + " (expected .png or .pfm)");
  }
}

void write_image(const fs::path& path, const ErpImage& img) {
  if (extension(path) == ".png") {
    write_png(path, img);
  } else {
    write_pfm(path, img);
  }
}

ErpImage depth_image(const DepthFrame& f) {
  ErpImage img(f.width, f.height, 1);
  for (std::size_t i = 0; i < f.size(); ++i) img.pixels(i, 0) = f.depth[i];
  return img;
}

DepthFrame depth_frame(const ErpImage& img, DepthRange range, bool ground_truth) {
  if (img.channels() != 1) throw IoError("depth maps must have a single channel");
  std::vector<double> d(img.pixels.values().begin(), img.pixels.values().end());
  return ground_truth ? DepthFrame::ground_truth(img.width, img.height, std::move(d), range)
                      : DepthFrame::prediction(img.width, img.height, std::move(d));
}

TrainConfig load_train_config(const std::string& path) {
  if (path.empty()) return TrainConfig{};
  return TrainConfig::from_json(read_text(path));
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::vector<std::string>& items, Parse parse) {
  std::vector<T> out;
  for (const auto& s : items) out.push_back(parse(s));
  return out;
}

// ---------------------------------------------------------------------------

void add_grid(CLI::App& app) {
  auto* grid = app.add_subcommand("grid", "Build or verify a grid file");
  grid->require_subcommand(1);

  auto* build = grid->add_subcommand("build", "Write the centers and neighbor table of one level");
  auto nside = std::make_shared<int>(0);
  auto out = std::make_shared<std::string>();
  build->add_option("--nside", *nside, "Power of two in [1, 1024]")->required();
  build->add_option("--out", *out, "Output file")->required();
  build->callback([=] {
    require_output_dir(*out);
    const SphericalGrid g(*nside);
    g.save(fs::path(*out));
    std::cout << "nside " << g.nside() << ", " << g.npix() << " pixels -> " << *out << "\n";
  });

  auto* verify = grid->add_subcommand("verify", "Compare a grid file with a fresh build");
  auto in = std::make_shared<std::string>();
  verify->add_option("file,--in", *in, "Grid file")->required();
  verify->callback([=] {
    const SphericalGrid g = SphericalGrid::load(fs::path(*in));
    const GridVerifyReport r = verify_grid(g);
    ordered_json j;
    j["nside"] = g.nside();
    j["npix"] = g.npix();
    j["ok"] = r.ok;
    j["center_mismatches"] = r.center_mismatches;
    j["neighbor_mismatches"] = r.neighbor_mismatches;
    j["max_norm_error"] = r.max_norm_error;
    j["asymmetric_pairs"] = r.asymmetric_pairs;
    j["seven_neighbor_pixels"] = r.seven_neighbor_pixels;
    std::cout << j.dump(2) << "\n";
    if (!r.ok) throw IoError("grid file failed verification");
  });
}

void add_lut(CLI::App& app) {
  auto* lut = app.add_subcommand("lut", "Build or inspect transfer tables");
  lut->require_subcommand(1);

  auto* build = lut->add_subcommand("build", "Build a raster <-> grid transfer table");
  struct Opts {
    int nside = 0;
    int width = 0;
    int height = 0;
    std::string direction = "forward";
    std::string out;
    int workers = 1;
  };
  auto o = std::make_shared<Opts>();
  build->add_option("--nside", o->nside)->required();
  build->add_option("--width", o->width)->required();
  build->add_option("--height", o->height)->required();
  build->add_option("--direction", o->direction, "forward (raster to grid) or inverse")
      ->check(CLI::IsMember({"forward", "inverse"}));
  build->add_option("--out", o->out)->required();
  build->add_option("--workers", o->workers)->check(CLI::PositiveNumber);
  build->callback([=] {
    require_output_dir(o->out);
    const SphericalGrid g(o->nside);
    const TransferTable t = o->direction == "forward"
                                ? build_forward_table(g, o->width, o->height, 0.0, o->workers)
                                : build_inverse_table(g, o->width, o->height, o->workers);
    t.save(fs::path(o->out));
    std::cout << t.rows.size() << " rows -> " << o->out << "\n";
  });

  auto* info = lut->add_subcommand("info", "Print a table's header and row checks");
  auto in = std::make_shared<std::string>();
  info->add_option("--in", *in)->required();
  info->callback([=] {
    const TransferTable t = TransferTable::load(fs::path(*in));
    const TableCheck c = check_table(t);
    ordered_json j;
    j["direction"] = t.direction == TransferDirection::PlaneToSphere ? "forward" : "inverse";
    j["width"] = t.erp_width;
    j["height"] = t.erp_height;
    j["nside"] = t.nside;
    j["rows"] = c.rows;
    j["bad_rows"] = c.bad_rows;
    j["max_sum_error"] = c.max_sum_error;
    std::cout << j.dump(2) << "\n";
  });
}

void add_resample(CLI::App& app) {
  auto* cmd = app.add_subcommand("resample", "Round-trip an ERP image through one grid level");
  struct Opts {
    std::string in;
    int nside = 0;
    std::string out;
    std::string sphere_out;
    std::string report;
    int workers = 1;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--in", o->in, "PNG or PFM image")->required();
  cmd->add_option("--nside", o->nside)->required();
  cmd->add_option("--out", o->out, "Round-tripped image (PNG or PFM)")->required();
  cmd->add_option("--sphere-out", o->sphere_out, "Grid values as an npix x 1 PFM");
  cmd->add_option("--report", o->report, "Round-trip error report (JSON)");
  cmd->add_option("--workers", o->workers)->check(CLI::PositiveNumber);
  cmd->callback([=] {
    check_image_extension(o->out);
    require_output_dir(o->out);
    if (!o->sphere_out.empty()) require_output_dir(o->sphere_out);
    if (!o->report.empty()) require_output_dir(o->report);
    const ErpImage img = read_image(o->in);
    const auto grid = std::make_shared<const SphericalGrid>(o->nside);
    const auto fwd = cached_table(TransferDirection::PlaneToSphere, *grid, img.width, img.height, o->workers);
    const auto inv = cached_table(TransferDirection::SphereToPlane, *grid, img.width, img.height, o->workers);
    const SphereTensor s = resample(fwd, img, grid, o->workers);
    const ErpImage back = resample(inv, s, o->workers);
    std::string report;
    if (!o->report.empty()) {
      const GridHierarchy h({o->nside});
      const RoundtripReport r = roundtrip_report(img, h, 0, 8, o->workers);
      ordered_json j;
      j["nside"] = r.nside;
      j["mae"] = r.mae;
      j["max_abs"] = r.max_abs;
      j["band_mae"] = r.band_mae;
      report = j.dump(2);
    }
    write_image(o->out, back);
    if (!o->sphere_out.empty()) {
      ErpImage flat;
      flat.width = static_cast<int>(grid->npix());
      flat.height = 1;
      flat.pixels = s.data;
      write_pfm(o->sphere_out, flat);
    }
    if (!o->report.empty()) write_text(o->report, report);
  });
}

void add_render(CLI::App& app) {
  auto* cmd = app.add_subcommand("render", "Render a box-room scene to color and depth");
  struct Opts {
    std::string scene;
    std::uint64_t seed = 0;
    int width = 256;
    int height = 128;
    double tilt = 0.0;
    std::string color;
    std::string depth;
    std::string scene_out;
    int workers = 1;
  };
  auto o = std::make_shared<Opts>();
  auto* scene_opt = cmd->add_option("--scene", o->scene, "Scene JSON");
  cmd->add_option("--seed", o->seed, "Random scene seed (when no --scene)")->excludes(scene_opt);
  cmd->add_option("--width", o->width);
  cmd->add_option("--height", o->height);
  cmd->add_option("--tilt", o->tilt, "Camera pitch in degrees");
  cmd->add_option("--color", o->color, "Color output (PNG or PFM)")->required();
  cmd->add_option("--depth", o->depth, "Depth output (PFM)")->required();
  cmd->add_option("--scene-out", o->scene_out, "Write the scene JSON used");
  cmd->add_option("--workers", o->workers)->check(CLI::PositiveNumber);
  cmd->callback([=] {
    check_image_extension(o->color);
    for (const auto& p : {o->color, o->depth, o->scene_out}) {
      if (!p.empty()) require_output_dir(p);
    }
    const BoxScene base = o->scene.empty() ? random_scene(o->seed) : BoxScene::from_json(read_text(o->scene));
    const BoxScene s = tilted(base, o->tilt);
    const Render r = render_erp(s, o->width, o->height, {}, o->workers);
    write_image(o->color, r.color);
    write_pfm(o->depth, depth_image(r.depth));
    if (!o->scene_out.empty()) write_text(o->scene_out, s.to_json());
  });
}

void add_dataset(CLI::App& app) {
  auto* cmd = app.add_subcommand("dataset", "Generate a synthetic box-room dataset");
  struct Opts {
    std::uint64_t seed = 0;
    int train = 128;
    int test = 32;
    int width = 256;
    int height = 128;
    double min_depth = 0.01;
    double max_depth = 10.0;
    std::string out;
    int workers = 1;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--seed", o->seed);
  cmd->add_option("--train", o->train)->check(CLI::NonNegativeNumber);
  cmd->add_option("--test", o->test)->check(CLI::NonNegativeNumber);
  cmd->add_option("--width", o->width)->check(CLI::PositiveNumber);
  cmd->add_option("--height", o->height)->check(CLI::PositiveNumber);
  cmd->add_option("--min", o->min_depth);
  cmd->add_option("--max", o->max_depth);
  cmd->add_option("--out", o->out, "Output directory")->required();
  cmd->add_option("--workers", o->workers)->check(CLI::PositiveNumber);
  cmd->callback([=] {
    if (o->train + o->test < 1) throw InvalidParameter("dataset needs at least one scene");
    if (!(o->min_depth < o->max_depth)) throw InvalidParameter("--min must be below --max");
    const auto m = write_dataset(o->out, o->seed, o->train, o->test, o->width, o->height,
                                 {o->min_depth, o->max_depth}, o->workers);
    std::cout << m.entries.size() << " scenes -> " << (fs::path(o->out) / "manifest.json").string() << "\n";
  });
}

void add_train(CLI::App& app) {
  auto* cmd = app.add_subcommand("train", "Train the model on a dataset's train split");
  struct Opts {
    std::string config;
    std::string model_config;
    std::string data;
    std::string out;
    std::string loss_csv;
    std::string init;
    int steps = -1;
    double lr = 0.0;
    std::string loss;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
    bool quiet = false;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--config", o->config, "Train config JSON");
  cmd->add_option("--model-config", o->model_config, "Model config JSON (overrides the train config's)");
  cmd->add_option("--data", o->data, "Dataset manifest")->required();
  cmd->add_option("--out", o->out, "Checkpoint output")->required();
  cmd->add_option("--loss-csv", o->loss_csv, "Per-step loss log");
  cmd->add_option("--init", o->init, "Start from this checkpoint instead of a random init");
  cmd->add_option("--steps", o->steps, "Override max steps")->check(CLI::NonNegativeNumber);
  cmd->add_option("--lr", o->lr, "Override the learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--loss", o->loss)->check(CLI::IsMember({"rmsle", "rmserel"}));
  auto* seed_opt = cmd->add_option("--seed", o->seed);
  cmd->add_option("--workers", o->workers)->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet", o->quiet);
  cmd->callback([=] {
    TrainConfig cfg = load_train_config(o->config);
    if (!o->model_config.empty()) cfg.model = load_model_config(o->model_config);
    if (o->steps >= 0) cfg.max_steps = o->steps;
    if (o->lr > 0.0) cfg.optimizer.learning_rate = o->lr;
    if (!o->loss.empty()) cfg.loss = loss_kind_from_string(o->loss);
    if (seed_opt->count() > 0) cfg.seed = o->seed;
    if (o->workers > 0) cfg.workers = o->workers;
    cfg.validate();
    require_output_dir(o->out);
    if (!o->loss_csv.empty()) require_output_dir(o->loss_csv);

    const DatasetManifest manifest = load_manifest(o->data);
    ModelParams init;
    if (!o->init.empty()) {
      Checkpoint ck = load_checkpoint(o->init);
      if (ck.config.to_json() != cfg.model.to_json()) {
        throw PreconditionError("--init checkpoint was built for a different model config");
      }
      init = std::move(ck.params);
    } else {
      init = init_model(cfg.model, cfg.seed);
    }
    const ModelContext ctx(cfg.model, manifest.width, manifest.height, cfg.workers);
    const auto train = prepare_samples(ctx.tables, load_split(manifest, "train"));
    if (train.empty()) throw IoError("dataset has no train split");
    const TrainResult r = train_model(cfg, ctx, train, std::move(init), [&](const StepLog& s) {
      if (!o->quiet && (s.step == 1 || s.step % 10 == 0 || s.step == cfg.max_steps)) {
        std::cout << "step " << s.step << " loss " << s.loss << " lr " << s.learning_rate << "\n";
      }
    });
    save_checkpoint(o->out, cfg.model, r.params);
    if (!o->loss_csv.empty()) write_loss_csv(o->loss_csv, r.log);
  });
}

struct InferOpts {
  std::string config;
  std::string ckpt;
  std::string in;
  std::string out;
  int workers = 1;
};

void run_infer(const InferOpts& o) {
  require_output_dir(o.out);
  Checkpoint ck = load_checkpoint(o.ckpt);
  if (!o.config.empty() && load_model_config(o.config).to_json() != ck.config.to_json()) {
    throw PreconditionError("--config does not match the checkpoint's model config");
  }
  const ErpImage img = read_image(o.in);
  const ModelContext ctx(ck.config, img.width, img.height, o.workers);
  const ModelOutput out = model_forward(ctx.config, ctx.geometry, ctx.tables, ck.params, img);
  write_pfm(o.out, depth_image(out.depth));
}

void add_infer_options(CLI::App* cmd, const std::shared_ptr<InferOpts>& o) {
  cmd->add_option("--config", o->config, "Model config JSON (must match the checkpoint)");
  cmd->add_option("--ckpt", o->ckpt, "Checkpoint")->required();
  cmd->add_option("--in", o->in, "Input image (PNG or PFM)")->required();
  cmd->add_option("--out", o->out, "Predicted depth (PFM)")->required();
  cmd->add_option("--workers", o->workers)->check(CLI::PositiveNumber);
  cmd->callback([o] { run_infer(*o); });
}

void add_infer(CLI::App& app) {
  add_infer_options(app.add_subcommand("infer", "Predict a depth map"), std::make_shared<InferOpts>());
}

void add_model(CLI::App& app) {
  auto* model = app.add_subcommand("model", "Create, describe or run model checkpoints");
  model->require_subcommand(1);

  auto* init = model->add_subcommand("init", "Write a randomly initialized checkpoint");
  auto config = std::make_shared<std::string>();
  auto ckpt = std::make_shared<std::string>();
  auto seed = std::make_shared<std::uint64_t>(0);
  init->add_option("--config", *config, "Model config JSON")->required();
  init->add_option("--ckpt", *ckpt, "Checkpoint output")->required();
  init->add_option("--seed", *seed);
  init->callback([=] {
    const ModelConfig c = load_model_config(*config);
    require_output_dir(*ckpt);
    save_checkpoint(*ckpt, c, init_model(c, *seed));
  });

  auto* describe = model->add_subcommand("describe", "Print levels, channels and parameter counts");
  auto dconfig = std::make_shared<std::string>();
  auto dckpt = std::make_shared<std::string>();
  auto* dc = describe->add_option("--config", *dconfig, "Model config JSON");
  auto* dk = describe->add_option("--ckpt", *dckpt, "Checkpoint");
  dc->excludes(dk);
  describe->callback([=] {
    ModelConfig c;
    ModelParams p;
    if (!dckpt->empty()) {
      Checkpoint ck = load_checkpoint(*dckpt);
      c = ck.config;
      p = std::move(ck.params);
    } else if (!dconfig->empty()) {
      c = load_model_config(*dconfig);
      p = make_model_shapes(c);
    } else {
      throw InvalidParameter("model describe needs --config or --ckpt");
    }
    ordered_json j;
    j["model"] = ordered_json::parse(c.to_json());
    j["levels"] = ordered_json::array();
    for (std::size_t l = 0; l < c.levels(); ++l) {
      const int n = c.nsides[l];
      const int order = std::countr_zero(static_cast<unsigned>(n));
      const int offset = std::min(c.gsa_offset, order);
      ordered_json lj;
      lj["nside"] = n;
      lj["npix"] = 12LL * n * n;
      lj["channels"] = c.channels[l];
      lj["encoder_stride"] = c.encoder_stride(l);
      lj["gsa_offset"] = offset;
      lj["windows"] = 12LL * n * n >> (2 * offset);
      j["levels"].push_back(lj);
    }
    j["input_multiple"] = c.input_multiple();
    j["parameters"] = parameter_count(p);
    std::cout << j.dump(2) << "\n";
  });

  add_infer_options(model->add_subcommand("infer", "Predict a depth map"), std::make_shared<InferOpts>());
}

void add_eval(CLI::App& app) {
  auto* cmd = app.add_subcommand("eval", "Compare a predicted depth map with ground truth");
  struct Opts {
    std::string pred;
    std::string gt;
    std::string align = "none";
    double min_depth = 0.01;
    double max_depth = 10.0;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--pred", o->pred, "Predicted depth (PFM)")->required();
  cmd->add_option("--gt", o->gt, "Ground-truth depth (PFM)")->required();
  cmd->add_option("--align", o->align)->check(CLI::IsMember({"none", "median", "max"}));
  cmd->add_option("--min", o->min_depth);
  cmd->add_option("--max", o->max_depth);
  cmd->add_option("--out", o->out, "Report JSON");
  cmd->callback([=] {
    if (!(o->min_depth < o->max_depth)) throw InvalidParameter("--min must be below --max");
    if (!o->out.empty()) require_output_dir(o->out);
    const DepthFrame pred = depth_frame(read_pfm(o->pred), {}, false);
    const DepthFrame gt = depth_frame(read_pfm(o->gt), {o->min_depth, o->max_depth}, true);
    if (pred.width != gt.width || pred.height != gt.height) {
      throw IoError("prediction and ground truth have different sizes");
    }
    const Alignment a = alignment_from_string(o->align);
    const MetricReport r = metrics(align_scale(pred, gt, a), gt);
    const std::string text = r.to_json();
    if (o->out.empty()) {
      std::cout << text << "\n";
    } else {
      write_text(o->out, text);
    }
  });
}

struct AblationOpts {
  std::string config;
  std::string model_config;
  std::string data;
  std::string out;
  std::vector<std::string> items;
  int steps = -1;
  std::size_t max_train = 0;
  std::size_t max_test = 0;
  int workers = 0;
};

TrainConfig ablation_config(const AblationOpts& o) {
  TrainConfig cfg = load_train_config(o.config);
  if (!o.model_config.empty()) cfg.model = load_model_config(o.model_config);
  if (o.steps >= 0) cfg.max_steps = o.steps;
  if (o.workers > 0) cfg.workers = o.workers;
  cfg.validate();
  return cfg;
}

CLI::App* add_ablation(CLI::App& app, const std::string& name, const std::string& help,
                       const std::string& list_flag, std::vector<std::string> defaults,
                       std::vector<std::string> allowed, const std::shared_ptr<AblationOpts>& o) {
  auto* cmd = app.add_subcommand(name, help);
  o->items = std::move(defaults);
  cmd->add_option("--config", o->config, "Train config JSON");
  cmd->add_option("--model-config", o->model_config, "Model config JSON");
  cmd->add_option("--data", o->data, "Dataset manifest")->required();
  cmd->add_option("--out", o->out, "Report JSON")->required();
  cmd->add_option(list_flag, o->items)->delimiter(',')->check(CLI::IsMember(allowed));
  cmd->add_option("--steps", o->steps, "Override max steps")->check(CLI::NonNegativeNumber);
  cmd->add_option("--max-train", o->max_train, "Use at most this many train scenes");
  cmd->add_option("--max-test", o->max_test, "Use at most this many test scenes");
  cmd->add_option("--workers", o->workers)->check(CLI::PositiveNumber);
  return cmd;
}

void add_ablations(CLI::App& app) {
  auto px = std::make_shared<AblationOpts>();
  add_ablation(app, "ablate-pixels", "Compare grid pixel-count presets", "--presets",
               {"original", "downsample", "upsample"}, {"original", "downsample", "upsample"}, px)
      ->callback([px] {
        const TrainConfig cfg = ablation_config(*px);
        require_output_dir(px->out);
        const auto data = load_ablation_data(load_manifest(px->data), px->max_train, px->max_test);
        write_text(px->out, ablation_report_json("pixels", ablate_pixels(cfg, data, px->items)));
      });

  auto spe = std::make_shared<AblationOpts>();
  add_ablation(app, "ablate-spe", "Compare positional-embedding coordinate subsets", "--coords",
               {"xy", "yz", "xz", "latlon", "xyz"}, {"xyz", "xy", "yz", "xz", "latlon"}, spe)
      ->callback([spe] {
        const TrainConfig cfg = ablation_config(*spe);
        require_output_dir(spe->out);
        const auto coords = parse_list<SpeCoords>(spe->items, spe_coords_from_string);
        const auto data = load_ablation_data(load_manifest(spe->data), spe->max_train, spe->max_test);
        write_text(spe->out, ablation_report_json("spe", ablate_spe(cfg, data, coords)));
      });

  auto loss = std::make_shared<AblationOpts>();
  add_ablation(app, "ablate-loss", "Compare training losses", "--losses", {"rmsle", "rmserel"},
               {"rmsle", "rmserel"}, loss)
      ->callback([loss] {
        const TrainConfig cfg = ablation_config(*loss);
        require_output_dir(loss->out);
        const auto kinds = parse_list<LossKind>(loss->items, loss_kind_from_string);
        const auto data = load_ablation_data(load_manifest(loss->data), loss->max_train, loss->max_test);
        write_text(loss->out, ablation_report_json("loss", ablate_loss(cfg, data, kinds)));
      });
}

void add_tilt_eval(CLI::App& app) {
  auto* cmd = app.add_subcommand("tilt-eval", "Evaluate a checkpoint on re-rendered tilted scenes");
  struct Opts {
    std::string ckpt;
    std::string data;
    std::string out;
    std::string split = "test";
    std::vector<double> angles{0.0, 2.0, 5.0};
    std::string align = "none";
    std::size_t max_scenes = 0;
    int workers = 1;
  };
  auto o = std::make_shared<Opts>();
  cmd->add_option("--ckpt", o->ckpt, "Checkpoint")->required();
  cmd->add_option("--data", o->data, "Dataset manifest")->required();
  cmd->add_option("--out", o->out, "Report JSON")->required();
  cmd->add_option("--split", o->split)->check(CLI::IsMember({"train", "test"}));
  cmd->add_option("--angles", o->angles, "Pitch angles in degrees")->delimiter(',');
  cmd->add_option("--align", o->align)->check(CLI::IsMember({"none", "median", "max"}));
  cmd->add_option("--max-scenes", o->max_scenes);
  cmd->add_option("--workers", o->workers)->check(CLI::PositiveNumber);
  cmd->callback([=] {
    require_output_dir(o->out);
    const Checkpoint ck = load_checkpoint(o->ckpt);
    const DatasetManifest m = load_manifest(o->data);
    auto scenes = m.split(o->split);
    if (o->max_scenes > 0 && scenes.size() > o->max_scenes) scenes.resize(o->max_scenes);
    const ModelContext ctx(ck.config, m.width, m.height, o->workers);
    const auto rows = tilt_eval(ctx, ck.params, scenes, o->angles, m.range,
                                alignment_from_string(o->align), o->workers);
    write_text(o->out, tilt_report_json(rows, m.tilt_axis));
  });
}

}  // namespace

void register_commands(CLI::App& app) {
  add_grid(app);
  add_lut(app);
  add_resample(app);
  add_render(app);
  add_dataset(app);
  add_train(app);
  add_infer(app);
  add_model(app);
  add_eval(app);
  add_ablations(app);
  add_tilt_eval(app);
}

}  // namespace sphdepth::cli

// Command-line entry point. Subcommands cover the whole pipeline: scene
// generation, rendering, training, evaluation, inference, tracking, the
// ablation harness, gradient checking, and plot emission. Every run is a
// pure function of (config, seed).
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "rfdet/checkpoint.hpp"
#include "rfdet/config.hpp"
#include "rfdet/eval.hpp"
#include "rfdet/gen.hpp"
#include "rfdet/image_io.hpp"
#include "rfdet/plots.hpp"
#include "rfdet/trainer.hpp"

namespace fs = std::filesystem;
using namespace rfdet;

namespace {

struct GlobalFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = "out";
  uint64_t seed = 0;
  bool seed_given = false;
};

RunConfig effective_config(const GlobalFlags& g) {
  return resolve_config(g.config_path, g.sets, g.seed_given ? &g.seed : nullptr);
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("short write to " + path);
}

std::vector<TrainItem> build_dataset(const RunConfig& cfg, const std::string& scenes_dir) {
  std::vector<SyntheticScene> scenes;
  if (!scenes_dir.empty()) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(scenes_dir))
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .json scenes in " + scenes_dir);
    for (const auto& f : files) scenes.push_back(load_scene(f.string()));
  } else {
    scenes = gen_scenes(cfg.seed, cfg.data);
  }
  std::vector<TrainItem> items;
  for (size_t i = 0; i < scenes.size(); ++i)
    items.push_back({std::move(scenes[i]),
                     gen_poses(cfg.seed, static_cast<int>(i), cfg.camera)});
  return items;
}

// Split helper: keep = train keeps non-val scenes, val keeps val scenes.
std::vector<TrainItem> filter_split(const std::vector<TrainItem>& items, const RunConfig& cfg,
                                    const std::string& split) {
  if (split == "all") return items;
  std::vector<TrainItem> out;
  for (size_t i = 0; i < items.size(); ++i) {
    const bool val = is_val_scene(cfg.seed, static_cast<int>(i), cfg.data.val_fraction);
    if ((split == "val") == val) out.push_back(items[i]);
  }
  if (out.empty())
    throw ConfigError("split '" + split + "' selected no scenes (adjust data.val_fraction)");
  return out;
}

json detections_to_json(const Detections& det, const std::vector<std::string>& class_table) {
  json arr = json::array();
  const int num_classes = det.logits.shape[1] - 1;
  for (int j = 0; j < det.logits.shape[0]; ++j) {
    const auto probs = softmax_row(det.logits, j);
    int best = 0;
    for (int c = 1; c < num_classes + 1; ++c)
      if (probs[static_cast<size_t>(c)] > probs[static_cast<size_t>(best)]) best = c;
    if (best == num_classes) continue;  // no-object wins
    const Box3D box = detection_box(det, j);
    json corners = json::array();
    for (const Vec3& c : box.corners) corners.push_back(vec3_to_json(c));
    arr.push_back({{"query", j},
                   {"corners", corners},
                   {"class_id", best},
                   {"class_name", class_table.at(static_cast<size_t>(best))},
                   {"score", probs[static_cast<size_t>(best)]}});
  }
  return arr;
}

template <class T>
void load_model_from_checkpoint(Model<T>& model, const RunConfig& cfg,
                                const std::string& checkpoint_path) {
  model.cfg = cfg.model;
  model.set_samples_per_ray(cfg.sampling.n_samples);
  model.init(cfg.seed);
  load_checkpoint(checkpoint_path, model.store);
}

int cmd_gen_scenes(const GlobalFlags& g, int count_override) {
  RunConfig cfg = effective_config(g);
  if (count_override > 0) cfg.data.n_scenes = count_override;
  ensure_out_dir(g.out_dir);
  const auto scenes = gen_scenes(cfg.seed, cfg.data);
  for (size_t i = 0; i < scenes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04zu.json", i);
    save_scene(scenes[i], (fs::path(g.out_dir) / name).string());
  }
  std::cout << "wrote " << scenes.size() << " scenes to " << g.out_dir << "\n";
  return 0;
}

int cmd_render(const GlobalFlags& g, const std::string& scene_path, const std::string& modality,
               double delta, int pose_index, const std::string& grid) {
  RunConfig cfg = effective_config(g);
  if (!grid.empty()) {
    int w = 0, h = 0;
    if (std::sscanf(grid.c_str(), "%dx%d", &w, &h) != 2 || w < 2 || h < 2)
      throw ConfigError("render: --grid expects WxH with both >= 2, got '" + grid + "'");
    cfg.sampling.width = w;
    cfg.sampling.height = h;
  }
  const SyntheticScene scene = load_scene(scene_path);
  ensure_out_dir(g.out_dir);

  Intrinsics intr = cfg.intrinsics();
  if (delta > 1.0) {
    intr = coarse_intrinsics(intr, delta);
  } else if (delta != 1.0) {
    if (!(delta > 0)) throw ConfigError("render: --delta must be > 0");
    intr.focal /= delta;  // zoom-in multipliers < 1 fall outside the coarse-stream contract
  }
  Rng rng(sub_seed(cfg.seed, "render_pose", static_cast<uint64_t>(pose_index)));
  const Pose pose = sample_pose(rng, cfg.camera);

  const bool want_color = modality == "color" || modality == "both";
  const bool want_depth = modality == "depth" || modality == "both";
  if (!want_color && !want_depth)
    throw ConfigError("render: --modality must be color, depth, or both");
  const RenderedViews views = render_views(scene, pose, intr, cfg.sampling, want_color, want_depth);

  char suffix[32];
  std::snprintf(suffix, sizeof(suffix), "_d%g", delta);
  const std::string stem = (fs::path(g.out_dir) / fs::path(scene_path).stem()).string() + suffix;
  if (want_color) write_ppm(views.color, stem + ".ppm");
  if (want_depth) write_pfm(views.depth, stem + ".pfm");
  std::cout << "rendered " << stem << (want_color ? " .ppm" : "") << (want_depth ? " .pfm" : "")
            << "\n";
  return 0;
}

int cmd_train(const GlobalFlags& g, const std::string& scenes_dir) {
  const RunConfig cfg = effective_config(g);
  ensure_out_dir(g.out_dir);
  auto items = build_dataset(cfg, scenes_dir);
  const auto train_items = filter_split(items, cfg, cfg.data.val_fraction > 0 ? "train" : "all");

  Model<double> model;
  model.cfg = cfg.model;
  model.set_samples_per_ray(cfg.sampling.n_samples);
  model.init(cfg.seed);

  const TrainResult result = train(model, train_items, cfg.intrinsics(), cfg.sampling, cfg.loss,
                                   cfg.train, &std::cout);
  quantize_f32(model.store);  // checkpoint precision, applied before any eval

  write_text((fs::path(g.out_dir) / "loss.csv").string(), loss_curve_csv(result.curve));
  save_checkpoint((fs::path(g.out_dir) / "checkpoint.rfck").string(), model.store,
                  cfg.to_json(), cfg.seed, result.final_loss);
  std::cout << "final loss " << result.final_loss << " (initial " << result.initial_loss
            << ")\ncheckpoint " << (fs::path(g.out_dir) / "checkpoint.rfck").string() << "\n";
  return 0;
}

int cmd_eval(const GlobalFlags& g, const std::string& checkpoint_path,
             const std::string& scenes_dir, const std::string& split) {
  const RunConfig cfg = effective_config(g);
  ensure_out_dir(g.out_dir);
  Model<double> model;
  load_model_from_checkpoint(model, cfg, checkpoint_path);

  const auto items = filter_split(build_dataset(cfg, scenes_dir), cfg, split);
  const std::vector<double> thresholds{0.1, 0.5, 0.9};
  const MetricsReport report = evaluate(model, items, cfg.intrinsics(), cfg.sampling, thresholds);

  const std::string variant = to_string(cfg.model.streams);
  write_text((fs::path(g.out_dir) / "metrics.csv").string(),
             metrics_csv_header(thresholds) + "\n" + metrics_csv_row(variant, report) + "\n");
  json detail;
  detail["variant"] = variant;
  detail["split"] = split;
  detail["thresholds"] = thresholds;
  detail["map"] = report.map_at;
  detail["average"] = report.average;
  json per_class = json::array();
  for (size_t ti = 0; ti < thresholds.size(); ++ti) {
    json row = json::object();
    for (const auto& c : report.per_class[ti])
      row[default_class_table()[static_cast<size_t>(c.class_id)]] = {{"ap", c.ap},
                                                                     {"n_gt", c.n_gt}};
    per_class.push_back(row);
  }
  detail["per_class"] = per_class;
  write_text((fs::path(g.out_dir) / "metrics.json").string(), detail.dump(2) + "\n");
  std::cout << metrics_csv_header(thresholds) << "\n"
            << metrics_csv_row(variant, report) << "\n";
  return 0;
}

int cmd_infer(const GlobalFlags& g, const std::string& checkpoint_path,
              const std::string& scene_path, int poses) {
  const RunConfig cfg = effective_config(g);
  ensure_out_dir(g.out_dir);
  Model<double> model;
  load_model_from_checkpoint(model, cfg, checkpoint_path);
  const SyntheticScene scene = load_scene(scene_path);

  json out = json::array();
  for (int i = 0; i < poses; ++i) {
    Rng rng(sub_seed(cfg.seed, "infer_pose", static_cast<uint64_t>(i)));
    const Pose pose = sample_pose(rng, cfg.camera);
    const Detections det = infer_sample(model, scene, pose, cfg.intrinsics(), cfg.sampling);
    out.push_back({{"pose", i}, {"detections", detections_to_json(det, scene.class_table)}});
  }
  const std::string path = (fs::path(g.out_dir) / "detections.json").string();
  write_text(path, out.dump(2) + "\n");
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_track(const GlobalFlags& g, const std::string& checkpoint_path,
              const std::string& scene_path, int steps) {
  const RunConfig cfg = effective_config(g);
  ensure_out_dir(g.out_dir);
  Model<double> model;
  load_model_from_checkpoint(model, cfg, checkpoint_path);
  const SyntheticScene scene = load_scene(scene_path);

  const double radius = 0.5 * (cfg.camera.radius_min + cfg.camera.radius_max);
  const double elev = 0.5 * (cfg.camera.elev_min + cfg.camera.elev_max);
  const auto poses = orbit_poses(steps, radius, elev);
  const auto dets = track(model, scene, poses, cfg.intrinsics(), cfg.sampling);

  json out = json::array();
  for (size_t i = 0; i < dets.size(); ++i)
    out.push_back({{"step", i}, {"detections", detections_to_json(dets[i], scene.class_table)}});
  const std::string path = (fs::path(g.out_dir) / "track.json").string();
  write_text(path, out.dump(2) + "\n");
  std::cout << "wrote " << path << " (" << steps << " steps)\n";
  return 0;
}

int cmd_ablate(const GlobalFlags& g, const std::string& suite, const std::string& scenes_dir) {
  const RunConfig cfg = effective_config(g);
  ensure_out_dir(g.out_dir);
  std::vector<Variant> variants;
  const auto append = [&](std::vector<Variant> v) {
    for (auto& x : v) variants.push_back(std::move(x));
  };
  if (suite == "modality" || suite == "all") append(modality_variants(cfg.model));
  if (suite == "fusion" || suite == "all") append(fusion_variants(cfg.model));
  if (suite == "streams" || suite == "all") append(stream_variants(cfg.model));
  if (variants.empty())
    throw ConfigError("ablate: --suite must be modality, fusion, streams, or all");

  const auto items = filter_split(build_dataset(cfg, scenes_dir), cfg,
                                  cfg.data.val_fraction > 0 ? "train" : "all");
  const std::vector<double> thresholds{0.1, 0.5, 0.9};
  const auto rows = ablate<double>(variants, items, cfg.intrinsics(), cfg.sampling, cfg.loss,
                                   cfg.train, cfg.seed, thresholds, &std::cout);
  const std::string csv = ablation_csv(rows, thresholds);
  write_text((fs::path(g.out_dir) / "ablation.csv").string(), csv);
  std::cout << csv;
  return 0;
}

int cmd_gradcheck(const GlobalFlags& g, const std::string& dtype) {
  if (dtype != "fp64") throw ConfigError("gradcheck: only --dtype fp64 is supported");
  RunConfig cfg = effective_config(g);
  // miniature end-to-end instance, checked in fp64
  cfg.model.d_model = 16;
  cfg.model.heads = 2;
  cfg.model.layers_fine = cfg.model.layers_coarse = cfg.model.layers_decoder = 1;
  cfg.model.queries = 4;
  cfg.sampling.width = 6;
  cfg.sampling.height = 6;
  cfg.sampling.n_samples = 8;
  cfg.camera.focal = 5.0;
  cfg.data.n_scenes = 1;
  cfg.data.objects_min = cfg.data.objects_max = 2;

  int64_t cursor = 0;
  const SyntheticScene scene = gen_scene(cfg.seed, 0, cfg.data, &cursor);
  const Pose pose = gen_poses(cfg.seed, 0, cfg.camera).at(0);
  const auto gts = gt_boxes(scene);

  Model<double> model;
  model.cfg = cfg.model;
  model.set_samples_per_ray(cfg.sampling.n_samples);
  model.init(cfg.seed);
  const auto view = tokenize_view<double>(scene, pose, cfg.intrinsics(), cfg.sampling,
                                          cfg.model.modality, cfg.model.streams);
  const auto report = grad_check(
      [&](Tape<double>& t) {
        const auto out = model.forward(t, view, scene.bounds);
        return hungarian_loss<double>(t, out, gts, cfg.loss);
      },
      model.store.all(), 1e-5);

  std::printf("max relative error %.3e over %zu parameters (threshold 1e-4)\n",
              report.max_rel_err, model.store.count());
  std::printf("worst entries:\n");
  for (const auto& w : report.worst)
    std::printf("  %-24s [%6lld]  analytic % .9e  numeric % .9e  rel %.3e\n", w.param.c_str(),
                static_cast<long long>(w.index), w.analytic, w.numeric, w.rel_err);
  if (report.max_rel_err < 1e-4) {
    std::printf("PASS\n");
    return 0;
  }
  std::printf("FAIL\n");
  throw NumericalError("gradcheck: max relative error above 1e-4");
}

int cmd_plot(const GlobalFlags& g, const std::vector<std::string>& csv_paths) {
  ensure_out_dir(g.out_dir);
  if (csv_paths.empty()) throw ConfigError("plot: no input CSVs");
  for (const auto& path : csv_paths) {
    const CsvTable table = read_csv(path);
    const std::string stem = (fs::path(g.out_dir) / fs::path(path).stem()).string();
    if (table.column("epoch") >= 0 && table.column("loss") >= 0) {
      const auto epochs = table.numeric_column(table.column("epoch"));
      const auto losses = table.numeric_column(table.column("loss"));
      write_text(stem + "_loss.svg",
                 svg_line_chart("training loss", {{"loss", epochs, losses}}));
      if (table.column("lr") >= 0) {
        const auto lrs = table.numeric_column(table.column("lr"));
        write_text(stem + "_lr.svg",
                   svg_line_chart("learning rate", {{"lr", epochs, lrs}}));
      }
      std::cout << "wrote " << stem << "_loss.svg\n";
    } else if (table.column("variant") >= 0) {
      std::vector<std::string> groups, bars;
      for (size_t c = 1; c < table.header.size(); ++c) bars.push_back(table.header[c]);
      std::vector<std::vector<double>> values;
      for (const auto& row : table.rows) {
        groups.push_back(row[0]);
        std::vector<double> v;
        for (size_t c = 1; c < row.size(); ++c) v.push_back(std::stod(row[c]));
        values.push_back(std::move(v));
      }
      write_text(stem + "_map.svg", svg_bar_chart("mAP by variant", groups, bars, values));
      std::cout << "wrote " << stem << "_map.svg\n";
    } else {
      throw IoError("plot: unrecognized CSV header in " + path);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radiance-field object localization"};
  app.require_subcommand(1);
  const auto sub = [&](const std::string& name, const std::string& desc) {
    CLI::App* s = app.add_subcommand(name, desc);
    s->fallthrough();  // global flags may appear after the subcommand name
    return s;
  };

  GlobalFlags g;
  app.add_option("--config", g.config_path, "JSON config file (defaults when omitted)");
  app.add_option("--set", g.sets, "dotted-path override, e.g. --set train.epochs=20");
  app.add_option("--out", g.out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", g.seed, "root seed override");

  auto* gen = sub("gen-scenes", "write procedural scene JSON files");
  int gen_count = 0;
  gen->add_option("--count", gen_count, "number of scenes (overrides data.n_scenes)");

  auto* render = sub("render", "render a scene to PPM/PFM");
  std::string render_scene, render_modality = "both", render_grid;
  double render_delta = 1.0;
  int render_pose = 0;
  render->add_option("--scene", render_scene, "scene JSON")->required();
  render->add_option("--modality", render_modality, "color, depth, or both");
  render->add_option("--delta", render_delta, "focal divisor (>1 = zoomed-out coarse view)");
  render->add_option("--grid", render_grid, "ray grid WxH (default from config)");
  render->add_option("--pose-index", render_pose, "seeded pose index");

  auto* train_cmd = sub("train", "train a model, write checkpoint + loss curve");
  std::string train_scenes;
  train_cmd->add_option("--scenes", train_scenes, "scene dir (default: generate from config)");

  auto* eval_cmd = sub("eval", "evaluate a checkpoint, write metrics CSV/JSON");
  std::string eval_ckpt, eval_scenes, eval_split = "train";
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--scenes", eval_scenes, "scene dir (default: generate from config)");
  eval_cmd->add_option("--split", eval_split, "train, val, or all");

  auto* infer = sub("infer", "write per-pose detection JSON");
  std::string infer_ckpt, infer_scene;
  int infer_poses = 1;
  infer->add_option("--checkpoint", infer_ckpt, "checkpoint file")->required();
  infer->add_option("--scene", infer_scene, "scene JSON")->required();
  infer->add_option("--poses", infer_poses, "number of seeded poses");

  auto* track_cmd = sub("track", "per-step detections along an orbit");
  std::string track_ckpt, track_scene;
  int track_steps = 4;
  track_cmd->add_option("--checkpoint", track_ckpt, "checkpoint file")->required();
  track_cmd->add_option("--scene", track_scene, "scene JSON")->required();
  track_cmd->add_option("--steps", track_steps, "orbit steps");

  auto* ablate_cmd = sub("ablate", "train/evaluate variant table");
  std::string ablate_suite = "all";
  std::string ablate_scenes;
  ablate_cmd->add_option("--suite", ablate_suite, "modality, fusion, streams, or all");
  ablate_cmd->add_option("--scenes", ablate_scenes, "scene dir (default: generate from config)");

  auto* gradcheck = sub("gradcheck", "finite-difference check of the full graph");
  std::string gc_dtype = "fp64";
  gradcheck->add_option("--dtype", gc_dtype, "fp64 (the only supported choice)");

  auto* plot = sub("plot", "emit SVG charts from CSV files");
  std::vector<std::string> plot_inputs;
  plot->add_option("csv", plot_inputs, "input CSV files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (gen->parsed()) return cmd_gen_scenes(g, gen_count);
    if (render->parsed())
      return cmd_render(g, render_scene, render_modality, render_delta, render_pose, render_grid);
    if (train_cmd->parsed()) return cmd_train(g, train_scenes);
    if (eval_cmd->parsed()) return cmd_eval(g, eval_ckpt, eval_scenes, eval_split);
    if (infer->parsed()) return cmd_infer(g, infer_ckpt, infer_scene, infer_poses);
    if (track_cmd->parsed()) return cmd_track(g, track_ckpt, track_scene, track_steps);
    if (ablate_cmd->parsed()) return cmd_ablate(g, ablate_suite, ablate_scenes);
    if (gradcheck->parsed()) return cmd_gradcheck(g, gc_dtype);
    if (plot->parsed()) return cmd_plot(g, plot_inputs);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

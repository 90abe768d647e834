#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "rfdet/checkpoint.hpp"
#include "rfdet/config.hpp"
#include "rfdet/eval.hpp"
#include "rfdet/gen.hpp"
#include "rfdet/plots.hpp"
#include "rfdet/trainer.hpp"

using namespace rfdet;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_model_cfg() {
  ModelConfig m;
  m.d_model = 16;
  m.heads = 2;
  m.layers_fine = m.layers_coarse = m.layers_decoder = 1;
  m.queries = 4;
  m.num_classes = 4;
  m.ffn_mult = 2;
  return m;
}

SamplingConfig tiny_sampling() {
  SamplingConfig s;
  s.n_samples = 6;
  s.width = 8;
  s.height = 6;
  return s;
}

Intrinsics tiny_intr() { return {7.0, 4.0, 3.0, 8, 6}; }

std::vector<TrainItem> tiny_dataset(uint64_t seed, int n_scenes, int poses_per_scene) {
  DataConfig dc;
  dc.n_scenes = n_scenes;
  dc.objects_min = 1;
  dc.objects_max = 2;
  CameraConfig cc;
  cc.poses_per_scene = poses_per_scene;
  auto scenes = gen_scenes(seed, dc);
  std::vector<TrainItem> items;
  for (size_t i = 0; i < scenes.size(); ++i)
    items.push_back({std::move(scenes[i]), gen_poses(seed, static_cast<int>(i), cc)});
  return items;
}

TrainConfig quick_train_cfg(int epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.warmup_epochs = 1;
  t.batch_size = 3;
  t.seed = 5;
  return t;
}

// Fill one detection slot from a box and a single strong class logit.
void set_detection(Detections& d, int j, const Box3D& box, int cls, double logit) {
  for (int k = 0; k < 8; ++k)
    for (int a = 0; a < 3; ++a)
      d.boxes[(static_cast<int64_t>(j) * 8 + k) * 3 + a] = box.corners[static_cast<size_t>(k)][a];
  for (int c = 0; c < d.logits.shape[1]; ++c)
    d.logits[static_cast<int64_t>(j) * d.logits.shape[1] + c] = c == cls ? logit : 0.0;
}

Detections empty_detections(int queries, int num_classes) {
  Detections d;
  d.boxes = Array<double>::zeros({queries, 8, 3});
  d.logits = Array<double>::zeros({queries, num_classes + 1});
  return d;
}

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "rfdet_trainer_eval_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("learning-rate schedule hits its endpoints exactly") {
  TrainConfig cfg;  // epochs 300, warmup 9, 1e-6 -> 5e-4 -> 1e-6
  CHECK(lr_at(0.0, cfg) == 1e-6);
  CHECK(lr_at(9.0, cfg) == 5e-4);
  CHECK(lr_at(300.0, cfg) == 1e-6);

  // continuous across the warmup boundary
  CHECK(std::fabs(lr_at(9.0 - 1e-9, cfg) - lr_at(9.0 + 1e-9, cfg)) < 1e-10);

  // strictly increasing on the ramp, strictly decreasing on the cosine
  for (double e = 0.0; e < 9.0 - 0.5; e += 0.5) CHECK(lr_at(e, cfg) < lr_at(e + 0.5, cfg));
  for (double e = 9.0; e < 300.0 - 6.0; e += 6.0) CHECK(lr_at(e, cfg) > lr_at(e + 6.0, cfg));

  // halfway through the cosine the lr is the midpoint (cos term vanishes)
  const double mid = 9.0 + 0.5 * (300.0 - 9.0);
  CHECK(lr_at(mid, cfg) ==
        Catch::Approx(cfg.min_lr + 0.5 * (cfg.base_lr - cfg.min_lr)).epsilon(1e-12));

  CHECK_THROWS_AS(lr_at(-0.001, cfg), ConfigError);
  CHECK_THROWS_AS(lr_at(300.001, cfg), ConfigError);

  TrainConfig no_warmup = cfg;
  no_warmup.warmup_epochs = 0;
  CHECK(lr_at(0.0, no_warmup) == no_warmup.base_lr);
}

TEST_CASE("gradient clipping rescales only above the threshold") {
  ParamStore<double> store;
  auto& a = store.create("a", {3});
  auto& b = store.create("b", {2});

  a.grad.data = {1.0, 2.0, 2.0};  // norm contribution 9
  b.grad.data = {4.0, 0.0};       // + 16 -> total norm 5
  const double pre = clip_grad_norm(store, 0.5);
  CHECK(pre == Catch::Approx(5.0).epsilon(1e-12));
  double sq = 0;
  for (double g : a.grad.data) sq += g * g;
  for (double g : b.grad.data) sq += g * g;
  CHECK(std::sqrt(sq) == Catch::Approx(0.5).epsilon(1e-12));
  // direction preserved
  CHECK(a.grad.data[1] == Catch::Approx(2.0 * a.grad.data[0]).epsilon(1e-12));

  a.grad.data = {0.01, 0.0, 0.0};
  b.grad.data = {0.0, 0.02};
  const std::vector<double> a_before = a.grad.data, b_before = b.grad.data;
  const double small = clip_grad_norm(store, 0.1);
  CHECK(small == Catch::Approx(std::sqrt(0.0005)).epsilon(1e-12));
  CHECK(a.grad.data == a_before);  // untouched below the threshold
  CHECK(b.grad.data == b_before);
}

TEST_CASE("adaptive-moment update is a no-op at zero gradient and zero decay") {
  ParamStore<double> store;
  auto& p = store.create("p", {4});
  p.value.data = {0.5, -1.25, 3.0, 0.0};
  const std::vector<double> before = p.value.data;

  AdamW<double> opt(store, 0.0);
  store.zero_grad();
  for (int i = 0; i < 3; ++i) opt.step(1e-3);
  CHECK(std::memcmp(p.value.data.data(), before.data(), before.size() * sizeof(double)) == 0);

  // decoupled decay acts alone when the gradient is zero
  AdamW<double> opt_wd(store, 1e-2);
  store.zero_grad();
  opt_wd.step(1e-3);
  for (size_t i = 0; i < before.size(); ++i)
    CHECK(p.value.data[i] == before[i] - 1e-3 * 1e-2 * before[i]);

  // a positive gradient moves the value down by ~lr after one step
  p.value.data = {0.0, 0.0, 0.0, 0.0};
  AdamW<double> opt_g(store, 0.0);
  p.grad.data = {1.0, 1.0, 1.0, 1.0};
  opt_g.step(1e-3);
  for (double v : p.value.data) CHECK(v == Catch::Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("epoch shuffling is a seeded permutation") {
  std::vector<int> idx(10);
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

  Rng r0(sub_seed(1, "shuffle", 0));
  std::vector<int> order0 = idx;
  shuffle_indices(order0, r0);
  std::vector<int> sorted = order0;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == idx);  // a permutation, nothing lost

  Rng r0_again(sub_seed(1, "shuffle", 0));
  std::vector<int> repeat = idx;
  shuffle_indices(repeat, r0_again);
  CHECK(repeat == order0);

  Rng r1(sub_seed(1, "shuffle", 1));
  std::vector<int> order1 = idx;
  shuffle_indices(order1, r1);
  CHECK(order1 != order0);
}

TEST_CASE("training is deterministic and records one curve point per epoch") {
  const auto data = tiny_dataset(3, 2, 2);
  const auto scfg = tiny_sampling();
  const auto tcfg = quick_train_cfg(4);
  const LossConfig lcfg;

  auto run = [&]() {
    Model<double> model;
    model.cfg = tiny_model_cfg();
    model.set_samples_per_ray(scfg.n_samples);
    model.init(7);
    const TrainResult r = train(model, data, tiny_intr(), scfg, lcfg, tcfg);
    std::vector<double> params;
    for (size_t i = 0; i < model.store.count(); ++i)
      for (double v : model.store.at(i).value.data) params.push_back(v);
    return std::make_pair(r, params);
  };

  const auto [r1, p1] = run();
  const auto [r2, p2] = run();

  REQUIRE(r1.curve.size() == 4);
  CHECK(r1.initial_loss == r1.curve.front().loss);
  CHECK(r1.final_loss == r1.curve.back().loss);
  for (size_t e = 0; e < r1.curve.size(); ++e) {
    CHECK(std::isfinite(r1.curve[e].loss));
    CHECK(r1.curve[e].epoch == static_cast<int>(e));
    CHECK(r1.curve[e].loss == r2.curve[e].loss);  // bitwise repeatable
    CHECK(r1.curve[e].lr == r2.curve[e].lr);
  }
  REQUIRE(p1.size() == p2.size());
  CHECK(std::memcmp(p1.data(), p2.data(), p1.size() * sizeof(double)) == 0);
}

TEST_CASE("training rejects scenes with more objects than queries") {
  SyntheticScene scene;
  scene.class_table = default_class_table();
  for (int k = 0; k < 5; ++k) {
    Primitive p;
    p.kind = PrimitiveKind::box;
    p.pose = {Mat3::identity(), {-1.0 + 0.5 * k, 0.0, 0.0}};
    p.size = {0.15, 0.15, 0.15};
    p.class_id = k % 4;
    scene.primitives.push_back(p);
  }
  const std::vector<TrainItem> data{{scene, {look_at({0, 0, -3.5}, {0, 0, 0})}}};

  Model<double> model;
  model.cfg = tiny_model_cfg();  // 4 queries < 5 objects
  model.set_samples_per_ray(tiny_sampling().n_samples);
  model.init(7);
  CHECK_THROWS_AS(train(model, data, tiny_intr(), tiny_sampling(), LossConfig{}, quick_train_cfg(2)),
                  ConfigError);
}

TEST_CASE("loss curve CSV round-trips through the plot parser") {
  const std::vector<EpochPoint> curve{{0, 1.5, 1e-6}, {1, 0.7512345678901234, 2.5e-4}};
  const std::string csv = loss_curve_csv(curve);
  std::istringstream in(csv);
  const CsvTable t = parse_csv(in, "loss");
  REQUIRE(t.header == std::vector<std::string>{"epoch", "loss", "lr"});
  REQUIRE(t.rows.size() == 2);
  const auto losses = t.numeric_column(t.column("loss"));
  const auto lrs = t.numeric_column(t.column("lr"));
  CHECK(losses[0] == 1.5);
  CHECK(losses[1] == 0.7512345678901234);  // %.17g survives the round trip
  CHECK(lrs[1] == 2.5e-4);
}

TEST_CASE("average precision matches the textbook envelope formula") {
  // independent oracle: AP = sum over true positives of (1/n_gt) * the
  // best precision at or after that rank
  const auto oracle = [](const std::vector<char>& flags, int64_t n_gt) {
    if (n_gt <= 0 || flags.empty()) return 0.0;
    std::vector<double> prec(flags.size());
    double tp = 0;
    for (size_t i = 0; i < flags.size(); ++i) {
      tp += flags[i] ? 1.0 : 0.0;
      prec[i] = tp / static_cast<double>(i + 1);
    }
    double ap = 0;
    for (size_t i = 0; i < flags.size(); ++i) {
      if (!flags[i]) continue;
      double best = 0;
      for (size_t j = i; j < flags.size(); ++j) best = std::max(best, prec[j]);
      ap += best / static_cast<double>(n_gt);
    }
    return ap;
  };

  CHECK(average_precision({1, 0, 1}, 2) == Catch::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(average_precision({}, 3) == 0.0);
  CHECK(average_precision({1, 1}, 0) == 0.0);

  for (int n = 1; n <= 10; ++n) {
    for (int mask = 0; mask < (1 << n); ++mask) {
      std::vector<char> flags(static_cast<size_t>(n));
      int tp_count = 0;
      for (int i = 0; i < n; ++i) {
        flags[static_cast<size_t>(i)] = (mask >> i) & 1;
        tp_count += flags[static_cast<size_t>(i)];
      }
      for (const int64_t n_gt : {static_cast<int64_t>(tp_count), static_cast<int64_t>(tp_count) + 2}) {
        if (n_gt == 0) continue;
        const double got = average_precision(flags, n_gt);
        const double want = oracle(flags, n_gt);
        REQUIRE(std::fabs(got - want) < 1e-12);
      }
    }
  }
}

TEST_CASE("metric report scores a perfect detector at one and a blind one at zero") {
  const Box3D gt_box = box_from_pose({0.2, -0.1, 0.3}, {0.8, 0.6, 0.7}, Mat3::identity());
  const std::vector<LabeledBox> gts{{gt_box, 0}};

  SECTION("exact box, confident class") {
    Detections d = empty_detections(2, 4);
    set_detection(d, 0, gt_box, 0, 10.0);
    set_detection(d, 1, box_from_pose({-1.5, 0, 0}, {0.1, 0.1, 0.1}, Mat3::identity()), 4, 10.0);
    const auto report = metrics_from_samples({{std::move(d), &gts}}, 4, {0.1, 0.5, 0.9});
    CHECK(report.map_at == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(report.average == 1.0);
  }

  SECTION("all queries confident in no-object, boxes nowhere near") {
    Detections d = empty_detections(2, 4);
    const Box3D far_box = box_from_pose({-1.9, -1.9, -1.9}, {0.05, 0.05, 0.05}, Mat3::identity());
    set_detection(d, 0, far_box, 4, 10.0);
    set_detection(d, 1, far_box, 4, 10.0);
    const auto report = metrics_from_samples({{std::move(d), &gts}}, 4, {0.1, 0.5, 0.9});
    CHECK(report.map_at == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(report.average == 0.0);
  }

  SECTION("per-class AP table carries ground-truth counts") {
    Detections d = empty_detections(2, 4);
    set_detection(d, 0, gt_box, 0, 10.0);
    set_detection(d, 1, gt_box, 4, 10.0);
    const auto report = metrics_from_samples({{std::move(d), &gts}}, 4, {0.5});
    REQUIRE(report.per_class.size() == 1);
    REQUIRE(report.per_class[0].size() == 4);
    CHECK(report.per_class[0][0].n_gt == 1);
    CHECK(report.per_class[0][1].n_gt == 0);
    CHECK(report.per_class[0][0].ap == 1.0);
  }
}

TEST_CASE("greedy matching follows score order and honors the IoU threshold") {
  // ground truth: axis-aligned unit cube at the origin
  const Box3D gt_box = box_from_pose({0, 0, 0}, {1, 1, 1}, Mat3::identity());
  const std::vector<LabeledBox> gts{{gt_box, 0}};

  // det A: shift 0.2 -> IoU 0.8/1.2 = 2/3; det B: shift 0.02 -> IoU ~0.96.
  // A outranks B on score.
  Detections d = empty_detections(2, 4);
  set_detection(d, 0, box_from_pose({0.2, 0, 0}, {1, 1, 1}, Mat3::identity()), 0, 2.0);
  set_detection(d, 1, box_from_pose({0.02, 0, 0}, {1, 1, 1}, Mat3::identity()), 0, 1.5);

  const auto report = metrics_from_samples({{std::move(d), &gts}}, 4, {0.1, 0.5, 0.9});
  // at 0.1 and 0.5 the leader claims the lone GT, the runner-up is a false
  // positive ranked second: AP stays 1
  CHECK(report.map_at[0] == 1.0);
  CHECK(report.map_at[1] == 1.0);
  // at 0.9 the leader fails the threshold and the runner-up claims instead:
  // tp pattern {0,1} -> AP 1/2
  CHECK(report.map_at[2] == Catch::Approx(0.5).epsilon(1e-12));
  // nonincreasing in the threshold
  CHECK(report.map_at[0] >= report.map_at[1]);
  CHECK(report.map_at[1] >= report.map_at[2]);
}

TEST_CASE("metrics CSV layout is pinned") {
  CHECK(metrics_csv_header({0.1, 0.5, 0.9}) == "variant,map_0.1,map_0.5,map_0.9,average");
  MetricsReport r;
  r.map_at = {1.0, 0.5, 0.25};
  r.average = 0.583333;
  CHECK(metrics_csv_row("fused", r) == "fused,1.000000,0.500000,0.250000,0.583333");
}

TEST_CASE("variant tables enumerate the documented rows") {
  const ModelConfig base = tiny_model_cfg();

  const auto mods = modality_variants(base);
  REQUIRE(mods.size() == 7);
  CHECK(mods[0].name == "raw+color+depth");
  CHECK(mods[1].name == "raw");
  CHECK(mods[2].name == "color");
  CHECK(mods[3].name == "depth");
  std::vector<std::string> names;
  for (const auto& v : mods) names.push_back(v.name);
  std::sort(names.begin(), names.end());
  CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());

  const auto fus = fusion_variants(base);
  REQUIRE(fus.size() == 2);
  CHECK(fus[0].name == "fusion_attention");
  CHECK(fus[1].name == "fusion_mlp");
  CHECK(fus[0].model.streams == StreamMode::fused);
  CHECK(fus[1].model.streams == StreamMode::fused);

  const auto str = stream_variants(base);
  REQUIRE(str.size() == 3);
  CHECK(str[0].name == "fused");
  CHECK(str[1].name == "fine_only");
  CHECK(str[2].name == "coarse_only");
}

TEST_CASE("ablation harness emits one row per variant with the pinned header") {
  const auto data = tiny_dataset(11, 1, 1);
  const auto scfg = tiny_sampling();
  TrainConfig tcfg = quick_train_cfg(2);

  const auto variants = fusion_variants(tiny_model_cfg());
  const auto rows =
      ablate<double>(variants, data, tiny_intr(), scfg, LossConfig{}, tcfg, 7, {0.1, 0.5, 0.9});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].variant == "fusion_attention");
  CHECK(rows[1].variant == "fusion_mlp");
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.final_loss));
    REQUIRE(r.report.map_at.size() == 3);
  }

  const std::string csv = ablation_csv(rows, {0.1, 0.5, 0.9});
  std::istringstream in(csv);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "variant,map_0.1,map_0.5,map_0.9,average");
  int data_rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++data_rows;
  CHECK(data_rows == 2);
}

TEST_CASE("checkpoint round-trip restores parameters bit for bit") {
  const fs::path dir = temp_dir();
  const std::string path = (dir / "roundtrip.rfck").string();

  Model<double> source;
  source.cfg = tiny_model_cfg();
  source.set_samples_per_ray(6);
  source.init(11);
  quantize_f32(source.store);

  RunConfig rc;
  save_checkpoint(path, source.store, rc.to_json(), 11, 0.125);

  Model<double> target;
  target.cfg = tiny_model_cfg();
  target.set_samples_per_ray(6);
  target.init(99);  // different values before loading

  const LoadedCheckpoint loaded = load_checkpoint(path, target.store);
  REQUIRE(target.store.count() == source.store.count());
  for (size_t i = 0; i < source.store.count(); ++i) {
    const auto& a = source.store.at(i).value.data;
    const auto& b = target.store.at(i).value.data;
    REQUIRE(a.size() == b.size());
    REQUIRE(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  }
  CHECK(loaded.manifest["format"] == std::string(kCheckpointFormat));
  CHECK(loaded.manifest["seed"].get<uint64_t>() == 11);
  CHECK(loaded.manifest["final_train_loss"].get<double>() == 0.125);
  CHECK(loaded.manifest["config"] == rc.to_json());
}

TEST_CASE("checkpoint evaluation is bit-identical in memory and reloaded") {
  const fs::path dir = temp_dir();
  const std::string path = (dir / "eval.rfck").string();
  const auto data = tiny_dataset(13, 1, 2);
  const auto scfg = tiny_sampling();

  Model<double> model;
  model.cfg = tiny_model_cfg();
  model.set_samples_per_ray(scfg.n_samples);
  model.init(21);
  const TrainResult tr =
      train(model, data, tiny_intr(), scfg, LossConfig{}, quick_train_cfg(2));
  quantize_f32(model.store);
  save_checkpoint(path, model.store, RunConfig{}.to_json(), 21, tr.final_loss);
  const auto in_memory = evaluate(model, data, tiny_intr(), scfg);

  Model<double> reloaded;
  reloaded.cfg = tiny_model_cfg();
  reloaded.set_samples_per_ray(scfg.n_samples);
  reloaded.init(0);
  const auto manifest = load_checkpoint(path, reloaded.store).manifest;
  const auto from_disk = evaluate(reloaded, data, tiny_intr(), scfg);

  REQUIRE(in_memory.map_at.size() == from_disk.map_at.size());
  for (size_t i = 0; i < in_memory.map_at.size(); ++i)
    CHECK(in_memory.map_at[i] == from_disk.map_at[i]);
  CHECK(in_memory.average == from_disk.average);
  CHECK(manifest["final_train_loss"].get<double>() == tr.final_loss);
}

TEST_CASE("checkpoint loading rejects mismatches and truncation") {
  const fs::path dir = temp_dir();
  const std::string path = (dir / "guard.rfck").string();

  Model<double> source;
  source.cfg = tiny_model_cfg();
  source.set_samples_per_ray(6);
  source.init(11);
  save_checkpoint(path, source.store, json::object(), 11, 0.0);

  SECTION("different architecture") {
    Model<double> other;
    ModelConfig cfg = tiny_model_cfg();
    cfg.d_model = 32;
    other.cfg = cfg;
    other.set_samples_per_ray(6);
    other.init(11);
    CHECK_THROWS_AS(load_checkpoint(path, other.store), ConfigError);
  }

  SECTION("truncated blob") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    bytes.resize(bytes.size() - 8);
    const std::string cut = (dir / "cut.rfck").string();
    std::ofstream out(cut, std::ios::binary);
    out << bytes;
    out.close();
    Model<double> target;
    target.cfg = tiny_model_cfg();
    target.set_samples_per_ray(6);
    target.init(11);
    CHECK_THROWS_AS(load_checkpoint(cut, target.store), IoError);
  }

  SECTION("foreign format string") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const std::string needle = "rfdet-checkpoint-v1";
    bytes.replace(bytes.find(needle), needle.size(), "rfdet-checkpoint-v9");
    const std::string alien = (dir / "alien.rfck").string();
    std::ofstream out(alien, std::ios::binary);
    out << bytes;
    out.close();
    Model<double> target;
    target.cfg = tiny_model_cfg();
    target.set_samples_per_ray(6);
    target.init(11);
    CHECK_THROWS_AS(load_checkpoint(alien, target.store), ConfigError);
  }

  SECTION("unparseable manifest") {
    const std::string junk = (dir / "junk.rfck").string();
    std::ofstream out(junk, std::ios::binary);
    out << "this is not json\n\x01\x02\x03";
    out.close();
    Model<double> target;
    target.cfg = tiny_model_cfg();
    target.set_samples_per_ray(6);
    target.init(11);
    CHECK_THROWS_AS(load_checkpoint(junk, target.store), IoError);
  }

  SECTION("missing file") {
    Model<double> target;
    target.cfg = tiny_model_cfg();
    target.set_samples_per_ray(6);
    target.init(11);
    CHECK_THROWS_AS(load_checkpoint((dir / "absent.rfck").string(), target.store), IoError);
  }
}

TEST_CASE("gradient checker flags a hidden dependency") {
  // negative control: a loss that routes half its true sensitivity through
  // detach() so the analytic gradient is wrong on purpose
  ParamStore<double> store;
  auto& p = store.create("p", {1});
  p.value.data = {1.0};

  const auto report = grad_check(
      [&](Tape<double>& t) {
        Node<double>* x = t.leaf(p);
        return mul(t, x, detach(t, x));  // analytic sees x, truth is 2x
      },
      store.all(), 1e-6);
  CHECK(report.max_rel_err > 0.1);
}

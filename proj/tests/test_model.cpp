#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rfdet/matching.hpp"
#include "rfdet/model.hpp"

using namespace rfdet;

namespace {

SyntheticScene demo_scene() {
  SyntheticScene s;
  s.class_table = {"cube", "slab", "tall_box", "sphere"};
  Primitive p;
  p.kind = PrimitiveKind::box;
  p.pose = {Mat3::identity(), {0, 0, 0}};
  p.size = {0.4, 0.4, 0.4};
  p.color = {0.9, 0.2, 0.1};
  p.density_amp = 20.0;
  p.class_id = 0;
  s.primitives.push_back(p);
  return s;
}

const Intrinsics tiny_intr{8.0, 3.0, 2.0, 6, 4};

Pose front_pose() { return look_at({0, 0, -3}, {0, 0, 0}, {0, 1, 0}); }

SamplingConfig tiny_cfg() {
  SamplingConfig c;
  c.n_samples = 8;
  c.width = 6;
  c.height = 4;
  return c;
}

ModelConfig small_model_cfg() {
  ModelConfig m;
  m.d_model = 16;
  m.heads = 2;
  m.layers_fine = m.layers_coarse = m.layers_decoder = 1;
  m.queries = 4;
  m.num_classes = 4;
  m.ffn_mult = 2;
  return m;
}

// Permutes the rows of a {T, d} token array.
template <class T>
Array<T> permute_rows(const Array<T>& a, const std::vector<int>& perm) {
  Array<T> out = Array<T>::zeros(a.shape);
  const int64_t d = a.shape[1];
  for (size_t r = 0; r < perm.size(); ++r)
    for (int64_t c = 0; c < d; ++c)
      out[static_cast<int64_t>(r) * d + c] = a[static_cast<int64_t>(perm[r]) * d + c];
  return out;
}

}  // namespace

TEST_CASE("tokenize lays out the selected channels per ray") {
  const SyntheticScene scene = demo_scene();
  const SamplingConfig cfg = tiny_cfg();
  const Pose pose = front_pose();
  const SampleGrid grid = sample_grid(scene, pose, tiny_intr, cfg);
  const RenderedViews views = render_maps_from_grid(grid, true, true);

  Modality raw_only;
  const auto raw = tokenize<double>(grid, nullptr, raw_only, scene.bounds, cfg.t_far);
  REQUIRE(raw.shape == std::vector<int>{24, 7 * 8});

  Modality all{true, true, true};
  const auto full = tokenize<double>(grid, &views, all, scene.bounds, cfg.t_far);
  REQUIRE(full.shape == std::vector<int>{24, 7 * 8 + 4});

  Modality color_only{false, true, false};
  const auto col = tokenize<double>(grid, &views, color_only, scene.bounds, cfg.t_far);
  REQUIRE(col.shape == std::vector<int>{24, 3});

  Modality depth_only{false, false, true};
  const auto dep = tokenize<double>(grid, &views, depth_only, scene.bounds, cfg.t_far);
  REQUIRE(dep.shape == std::vector<int>{24, 1});

  for (int r = 0; r < 24; ++r) {
    // raw channels prefix the full layout, then rgb, then depth
    for (int c = 0; c < 56; ++c) CHECK(full[r * 60 + c] == raw[r * 56 + c]);
    for (int c = 0; c < 3; ++c) {
      CHECK(full[r * 60 + 56 + c] == views.color[r * 3 + c]);
      CHECK(full[r * 60 + 56 + c] == col[r * 3 + c]);
    }
    CHECK(full[r * 60 + 59] == views.depth[r] / cfg.t_far);
    CHECK(dep[r] == views.depth[r] / cfg.t_far);
    CHECK(dep[r] >= 0.0);
    CHECK(dep[r] <= 1.0);

    for (int k = 0; k < 8; ++k) {
      const double* v = &grid.values[(static_cast<int64_t>(r) * 8 + k) * 7];
      // positions normalized into [-1,1] by the scene bounds
      for (int a = 0; a < 3; ++a) {
        const double lo = scene.bounds.lo[a], hi = scene.bounds.hi[a];
        CHECK(raw[r * 56 + k * 7 + a] ==
              Catch::Approx(2.0 * (v[a] - lo) / (hi - lo) - 1.0).margin(1e-15));
      }
      for (int c = 0; c < 3; ++c) CHECK(raw[r * 56 + k * 7 + 3 + c] == v[3 + c]);
      CHECK(raw[r * 56 + k * 7 + 6] == std::log1p(v[6]));
    }
  }
}

TEST_CASE("tokenize validates its inputs") {
  const SyntheticScene scene = demo_scene();
  const SamplingConfig cfg = tiny_cfg();
  const SampleGrid grid = sample_grid(scene, front_pose(), tiny_intr, cfg);
  Modality none{false, false, false};
  CHECK_THROWS_AS(tokenize<double>(grid, nullptr, none, scene.bounds, cfg.t_far), ShapeError);
  Modality color_only{false, true, false};
  CHECK_THROWS_AS(tokenize<double>(grid, nullptr, color_only, scene.bounds, cfg.t_far),
                  ShapeError);
  const RenderedViews depth_views = render_maps_from_grid(grid, false, true);
  CHECK_THROWS_AS(tokenize<double>(grid, &depth_views, color_only, scene.bounds, cfg.t_far),
                  ShapeError);
}

TEST_CASE("tokenize_view produces both streams with the coarse focal scaling") {
  const SyntheticScene scene = demo_scene();
  const SamplingConfig cfg = tiny_cfg();
  pipeline_stats().reset();
  const auto both = tokenize_view<double>(scene, front_pose(), tiny_intr, cfg,
                                          Modality{}, StreamMode::fused);
  CHECK(both.has_fine);
  CHECK(both.has_coarse);
  CHECK(pipeline_stats().fine_grids == 1);
  CHECK(pipeline_stats().coarse_grids == 1);
  REQUIRE(both.fine.shape == both.coarse.shape);
  // delta > 1 widens the field of view, so the streams see different samples
  bool differ = false;
  for (int64_t i = 0; i < both.fine.numel() && !differ; ++i)
    differ = both.fine[i] != both.coarse[i];
  CHECK(differ);

  pipeline_stats().reset();
  const auto fine = tokenize_view<double>(scene, front_pose(), tiny_intr, cfg, Modality{},
                                          StreamMode::fine_only);
  CHECK(fine.has_fine);
  CHECK_FALSE(fine.has_coarse);
  CHECK(pipeline_stats().fine_grids == 1);
  CHECK(pipeline_stats().coarse_grids == 0);
  // same sampling path as the fused fine stream
  REQUIRE(fine.fine.shape == both.fine.shape);
  CHECK(std::memcmp(fine.fine.data.data(), both.fine.data.data(),
                    sizeof(double) * static_cast<size_t>(fine.fine.numel())) == 0);

  pipeline_stats().reset();
  const auto coarse = tokenize_view<double>(scene, front_pose(), tiny_intr, cfg, Modality{},
                                            StreamMode::coarse_only);
  CHECK_FALSE(coarse.has_fine);
  CHECK(coarse.has_coarse);
  CHECK(pipeline_stats().fine_grids == 0);
  CHECK(pipeline_stats().coarse_grids == 1);
  CHECK(std::memcmp(coarse.coarse.data.data(), both.coarse.data.data(),
                    sizeof(double) * static_cast<size_t>(coarse.coarse.numel())) == 0);
  pipeline_stats().reset();
}

TEST_CASE("model init is deterministic in the seed") {
  ModelConfig cfg = small_model_cfg();
  Model<double> a, b, c;
  a.cfg = b.cfg = c.cfg = cfg;
  a.set_samples_per_ray(8);
  b.set_samples_per_ray(8);
  c.set_samples_per_ray(8);
  a.init(99);
  b.init(99);
  c.init(100);
  REQUIRE(a.store.count() == b.store.count());
  bool all_equal = true, any_diff_seed = false;
  for (size_t i = 0; i < a.store.count(); ++i) {
    const auto& pa = a.store.at(i);
    const auto& pb = b.store.at(i);
    REQUIRE(pa.name == pb.name);
    REQUIRE(pa.value.shape == pb.value.shape);
    if (std::memcmp(pa.value.data.data(), pb.value.data.data(),
                    sizeof(double) * pa.value.data.size()) != 0)
      all_equal = false;
    const auto& pc = c.store.at(i);
    if (std::memcmp(pa.value.data.data(), pc.value.data.data(),
                    sizeof(double) * pa.value.data.size()) != 0)
      any_diff_seed = true;
  }
  CHECK(all_equal);
  CHECK(any_diff_seed);
}

TEST_CASE("stream parameter sets are disjoint and only fused has fusion weights") {
  ModelConfig cfg = small_model_cfg();
  Model<double> m;
  m.cfg = cfg;
  m.set_samples_per_ray(8);
  m.init(7);
  std::set<std::string> names;
  for (size_t i = 0; i < m.store.count(); ++i) names.insert(m.store.at(i).name);
  CHECK(names.count("proj.fine.w0") == 1);
  CHECK(names.count("proj.coarse.w0") == 1);
  CHECK(names.count("enc.fine.l0.attn.wq") == 1);
  CHECK(names.count("enc.coarse.l0.attn.wq") == 1);
  CHECK(names.count("fuse.wo") == 1);
  CHECK(names.count("queries") == 1);

  Model<double> fine;
  fine.cfg = cfg;
  fine.cfg.streams = StreamMode::fine_only;
  fine.set_samples_per_ray(8);
  fine.init(7);
  std::set<std::string> fine_names;
  for (size_t i = 0; i < fine.store.count(); ++i) fine_names.insert(fine.store.at(i).name);
  CHECK(fine_names.count("proj.coarse.w0") == 0);
  CHECK(fine_names.count("enc.coarse.l0.attn.wq") == 0);
  CHECK(fine_names.count("fuse.wo") == 0);
  // the shared trunk has identically seeded values in both models
  for (const auto& n : fine_names) {
    const auto* pf = fine.store.find(n);
    const auto* pm = m.store.find(n);
    REQUIRE(pm != nullptr);
    CHECK(std::memcmp(pf->value.data.data(), pm->value.data.data(),
                      sizeof(double) * pf->value.data.size()) == 0);
  }
}

TEST_CASE("parameter count matches the closed-form expectation") {
  ModelConfig cfg;  // defaults: d=64, heads=4, 2+2+2 layers, J=8, C=4
  Model<double> m;
  m.cfg = cfg;
  m.set_samples_per_ray(16);
  m.init(1);
  const int64_t d = 64, d_in = 7 * 16;
  const auto linear_p = [](int64_t in, int64_t out) { return in * out + out; };
  const int64_t proj = linear_p(d_in, d) + linear_p(d, d) + linear_p(d, d);
  const int64_t attn = 4 * linear_p(d, d);
  const int64_t ffn = linear_p(d, 4 * d) + linear_p(4 * d, d);
  const int64_t enc_layer = attn + ffn;
  const int64_t dec_layer = 2 * attn + ffn;
  const int64_t heads_p = linear_p(d, d) + linear_p(d, d) + linear_p(d, 24) + linear_p(d, 5);
  const int64_t expect = 2 * proj + 4 * enc_layer + attn /* fusion */ + 8 * d +
                         2 * dec_layer + heads_p;
  CHECK(m.store.total_size() == expect);
}

TEST_CASE("encoder stack is permutation-equivariant over tokens") {
  ModelConfig cfg = small_model_cfg();
  Model<double> m;
  m.cfg = cfg;
  m.set_samples_per_ray(8);
  m.init(21);
  Rng rng(sub_seed(21, "tokens"));
  Array<double> tokens = Array<double>::zeros({6, 7 * 8});
  for (auto& v : tokens.data) v = rng.uniform(-1.0, 1.0);
  const std::vector<int> perm{4, 0, 5, 2, 1, 3};

  Tape<double> t;
  Node<double>* enc = m.encode_stream(t, tokens, "fine", cfg.layers_fine);
  Tape<double> t2;
  Node<double>* enc_p = m.encode_stream(t2, permute_rows(tokens, perm), "fine", cfg.layers_fine);
  for (size_t r = 0; r < perm.size(); ++r)
    for (int c = 0; c < cfg.d_model; ++c)
      CHECK(enc_p->value[static_cast<int64_t>(r) * cfg.d_model + c] ==
            Catch::Approx(enc->value[static_cast<int64_t>(perm[r]) * cfg.d_model + c])
                .margin(1e-11));
}

TEST_CASE("attention fusion starts as an exact identity on the fine stream") {
  ModelConfig cfg = small_model_cfg();
  Model<double> m;
  m.cfg = cfg;
  m.set_samples_per_ray(8);
  m.init(33);
  Rng rng(sub_seed(33, "fuse"));
  Array<double> ftok = Array<double>::zeros({6, 7 * 8});
  Array<double> ctok = Array<double>::zeros({6, 7 * 8});
  for (auto& v : ftok.data) v = rng.uniform(-1.0, 1.0);
  for (auto& v : ctok.data) v = rng.uniform(-1.0, 1.0);

  Tape<double> t;
  Node<double>* f = m.encode_stream(t, ftok, "fine", cfg.layers_fine);
  Node<double>* c = m.encode_stream(t, ctok, "coarse", cfg.layers_coarse);
  Node<double>* fused = m.fuse(t, f, c);
  REQUIRE(fused->value.shape == f->value.shape);
  CHECK(std::memcmp(fused->value.data.data(), f->value.data.data(),
                    sizeof(double) * f->value.data.size()) == 0);

  // after perturbing the fusion output projection the identity must break
  auto* wo = m.store.find("fuse.wo");
  REQUIRE(wo != nullptr);
  for (auto& v : wo->value.data) v = rng.uniform(-0.5, 0.5);
  Tape<double> t2;
  Node<double>* f2 = m.encode_stream(t2, ftok, "fine", cfg.layers_fine);
  Node<double>* c2 = m.encode_stream(t2, ctok, "coarse", cfg.layers_coarse);
  Node<double>* fused2 = m.fuse(t2, f2, c2);
  bool differ = false;
  for (int64_t i = 0; i < fused2->value.numel() && !differ; ++i)
    differ = fused2->value[i] != f2->value[i];
  CHECK(differ);
}

TEST_CASE("mlp fusion pools the coarse stream only on a token-count mismatch") {
  ModelConfig cfg = small_model_cfg();
  cfg.fusion = FusionKind::mlp;
  Model<double> m;
  m.cfg = cfg;
  m.set_samples_per_ray(8);
  m.init(40);
  Rng rng(sub_seed(40, "mlpfuse"));
  auto rnd = [&](std::vector<int> shape) {
    Array<double> a = Array<double>::zeros(shape);
    for (auto& v : a.data) v = rng.uniform(-1.0, 1.0);
    return a;
  };
  const Array<double> ftok = rnd({6, 7 * 8});
  const Array<double> ctok = rnd({6, 7 * 8});

  Tape<double> t;
  Node<double>* f = m.encode_stream(t, ftok, "fine", cfg.layers_fine);
  Node<double>* c = m.encode_stream(t, ctok, "coarse", cfg.layers_coarse);
  Node<double>* fused = m.fuse(t, f, c);
  REQUIRE(fused->value.shape == std::vector<int>{6, cfg.d_model});

  // equal counts: permuting coarse tokens permutes the concat partner rows,
  // so the fused rows must change
  Tape<double> tp;
  Node<double>* fp = m.encode_stream(tp, ftok, "fine", cfg.layers_fine);
  Node<double>* cp = m.encode_stream(tp, permute_rows(ctok, {5, 4, 3, 2, 1, 0}), "coarse",
                                     cfg.layers_coarse);
  Node<double>* fusedp = m.fuse(tp, fp, cp);
  bool differ = false;
  for (int64_t i = 0; i < fused->value.numel() && !differ; ++i)
    differ = std::fabs(fused->value[i] - fusedp->value[i]) > 1e-9;
  CHECK(differ);

  // mismatched counts: the coarse stream is mean-pooled, so permuting its
  // tokens leaves the fused output unchanged
  const Array<double> cbig = rnd({9, 7 * 8});
  std::vector<int> perm9{8, 2, 5, 0, 7, 1, 6, 3, 4};
  Tape<double> ta;
  Node<double>* fa = m.encode_stream(ta, ftok, "fine", cfg.layers_fine);
  Node<double>* ca = m.encode_stream(ta, cbig, "coarse", cfg.layers_coarse);
  Node<double>* fuseda = m.fuse(ta, fa, ca);
  Tape<double> tb;
  Node<double>* fb = m.encode_stream(tb, ftok, "fine", cfg.layers_fine);
  Node<double>* cb = m.encode_stream(tb, permute_rows(cbig, perm9), "coarse", cfg.layers_coarse);
  Node<double>* fusedb = m.fuse(tb, fb, cb);
  for (int64_t i = 0; i < fuseda->value.numel(); ++i)
    CHECK(fuseda->value[i] == Catch::Approx(fusedb->value[i]).margin(1e-12));
}

TEST_CASE("decoder output is invariant to memory token order") {
  ModelConfig cfg = small_model_cfg();
  Model<double> m;
  m.cfg = cfg;
  m.set_samples_per_ray(8);
  m.init(55);
  Rng rng(sub_seed(55, "dec"));
  Array<double> tokens = Array<double>::zeros({6, 7 * 8});
  for (auto& v : tokens.data) v = rng.uniform(-1.0, 1.0);
  const std::vector<int> perm{3, 5, 1, 0, 4, 2};

  Tape<double> t;
  Node<double>* mem = m.encode_stream(t, tokens, "fine", cfg.layers_fine);
  Node<double>* dec = m.decode(t, mem);
  Tape<double> t2;
  Node<double>* mem2 = m.encode_stream(t2, permute_rows(tokens, perm), "fine", cfg.layers_fine);
  Node<double>* dec2 = m.decode(t2, mem2);
  REQUIRE(dec->value.shape == std::vector<int>{cfg.queries, cfg.d_model});
  for (int64_t i = 0; i < dec->value.numel(); ++i)
    CHECK(dec2->value[i] == Catch::Approx(dec->value[i]).margin(1e-11));
}

TEST_CASE("forward produces boxes inside the inflated bounds and full logits") {
  const SyntheticScene scene = demo_scene();
  const SamplingConfig cfg = tiny_cfg();
  ModelConfig mc = small_model_cfg();
  Model<double> m;
  m.cfg = mc;
  m.set_samples_per_ray(cfg.n_samples);
  m.init(77);
  const auto view = tokenize_view<double>(scene, front_pose(), tiny_intr, cfg, mc.modality,
                                          StreamMode::fused);
  Tape<double> t;
  const auto out = m.forward(t, view, scene.bounds);
  REQUIRE(out.boxes->value.shape == std::vector<int>{4, 24});
  REQUIRE(out.logits->value.shape == std::vector<int>{4, 5});
  const SceneBounds inf = inflate(scene.bounds, 1.25);
  for (int j = 0; j < 4; ++j)
    for (int c = 0; c < 24; ++c) {
      const double v = out.boxes->value[static_cast<int64_t>(j) * 24 + c];
      const int axis = c % 3;
      CHECK(v > inf.lo[axis]);
      CHECK(v < inf.hi[axis]);
    }
  CHECK(all_finite(out.logits->value));
}

TEST_CASE("runtime stream restriction never touches the other stream's parameters") {
  const SyntheticScene scene = demo_scene();
  const SamplingConfig cfg = tiny_cfg();
  ModelConfig mc = small_model_cfg();
  Model<double> m;
  m.cfg = mc;
  m.set_samples_per_ray(cfg.n_samples);
  m.init(88);

  pipeline_stats().reset();
  const auto view = tokenize_view<double>(scene, front_pose(), tiny_intr, cfg, mc.modality,
                                          StreamMode::fine_only);
  CHECK(pipeline_stats().coarse_grids == 0);
  Tape<double> t;
  m.forward(t, view, scene.bounds, StreamMode::fine_only);
  const auto touched = t.touched_params();
  CHECK_FALSE(touched.empty());
  for (const auto* p : touched) {
    CHECK(p->name.rfind("proj.coarse", 0) != 0);
    CHECK(p->name.rfind("enc.coarse", 0) != 0);
    CHECK(p->name.rfind("fuse", 0) != 0);
  }
  pipeline_stats().reset();
}

TEST_CASE("fused forward at init equals the fine-only forward bit for bit") {
  const SyntheticScene scene = demo_scene();
  const SamplingConfig cfg = tiny_cfg();
  ModelConfig mc = small_model_cfg();
  Model<double> m;
  m.cfg = mc;
  m.set_samples_per_ray(cfg.n_samples);
  m.init(101);
  const auto fused_view = tokenize_view<double>(scene, front_pose(), tiny_intr, cfg,
                                                mc.modality, StreamMode::fused);
  TokenizedView<double> fine_view;
  fine_view.fine = fused_view.fine;
  fine_view.has_fine = true;

  Tape<double> ta;
  const auto a = m.forward(ta, fused_view, scene.bounds, StreamMode::fused);
  Tape<double> tb;
  const auto b = m.forward(tb, fine_view, scene.bounds, StreamMode::fine_only);
  CHECK(std::memcmp(a.boxes->value.data.data(), b.boxes->value.data.data(),
                    sizeof(double) * a.boxes->value.data.size()) == 0);
  CHECK(std::memcmp(a.logits->value.data.data(), b.logits->value.data.data(),
                    sizeof(double) * a.logits->value.data.size()) == 0);
}

TEST_CASE("forward is bitwise deterministic across repeats") {
  const SyntheticScene scene = demo_scene();
  const SamplingConfig cfg = tiny_cfg();
  ModelConfig mc = small_model_cfg();
  Model<double> m;
  m.cfg = mc;
  m.set_samples_per_ray(cfg.n_samples);
  m.init(64);
  const auto view = tokenize_view<double>(scene, front_pose(), tiny_intr, cfg, mc.modality,
                                          StreamMode::fused);
  Tape<double> ta;
  const auto a = m.forward(ta, view, scene.bounds);
  Tape<double> tb;
  const auto b = m.forward(tb, view, scene.bounds);
  CHECK(std::memcmp(a.boxes->value.data.data(), b.boxes->value.data.data(),
                    sizeof(double) * a.boxes->value.data.size()) == 0);
  CHECK(std::memcmp(a.logits->value.data.data(), b.logits->value.data.data(),
                    sizeof(double) * a.logits->value.data.size()) == 0);
}

TEST_CASE("detections drift by at most 1e-6 under memory token permutation") {
  ModelConfig cfg = small_model_cfg();
  Model<double> m;
  m.cfg = cfg;
  m.cfg.streams = StreamMode::fine_only;
  m.set_samples_per_ray(8);
  m.init(202);
  Rng rng(sub_seed(202, "perm"));
  Array<double> tokens = Array<double>::zeros({10, 7 * 8});
  for (auto& v : tokens.data) v = rng.uniform(-1.0, 1.0);
  TokenizedView<double> va, vb;
  va.fine = tokens;
  va.has_fine = true;
  vb.fine = permute_rows(tokens, {7, 3, 9, 0, 5, 1, 8, 2, 6, 4});
  vb.has_fine = true;
  SceneBounds bounds;
  Tape<double> ta;
  const auto a = m.forward(ta, va, bounds, StreamMode::fine_only);
  Tape<double> tb;
  const auto b = m.forward(tb, vb, bounds, StreamMode::fine_only);
  for (int64_t i = 0; i < a.boxes->value.numel(); ++i)
    CHECK(std::fabs(a.boxes->value[i] - b.boxes->value[i]) < 1e-6);
  for (int64_t i = 0; i < a.logits->value.numel(); ++i)
    CHECK(std::fabs(a.logits->value[i] - b.logits->value[i]) < 1e-6);
}

TEST_CASE("end-to-end gradients through model and loss match finite differences") {
  SyntheticScene scene = demo_scene();
  scene.primitives[0].size = {0.6, 0.6, 0.6};
  SamplingConfig cfg = tiny_cfg();
  cfg.n_samples = 4;
  cfg.width = 4;
  cfg.height = 4;
  const Intrinsics intr{6.0, 2.0, 2.0, 4, 4};
  ModelConfig mc;
  mc.d_model = 8;
  mc.heads = 2;
  mc.layers_fine = mc.layers_coarse = mc.layers_decoder = 1;
  mc.queries = 2;
  mc.num_classes = 2;
  mc.ffn_mult = 2;
  Model<double> m;
  m.cfg = mc;
  m.set_samples_per_ray(cfg.n_samples);
  m.init(2024);
  const auto view = tokenize_view<double>(scene, front_pose(), intr, cfg, mc.modality,
                                          StreamMode::fused);
  std::vector<LabeledBox> gts{{tight_box(scene.primitives[0]), 0}};
  LossConfig lc;
  const auto report = grad_check(
      [&](Tape<double>& t) {
        const auto out = m.forward(t, view, scene.bounds);
        return hungarian_loss<double>(t, out, gts, lc);
      },
      m.store.all(), 1e-5);
  INFO("max rel err " << report.max_rel_err);
  CHECK(report.max_rel_err < 1e-4);
}

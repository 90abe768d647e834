// Two-stream transformer detector: per-ray tokenization of field samples,
// separate fine/coarse encoders, cross-attention (or MLP) fusion with a skip
// connection onto the fine stream, a learned-query decoder, and box/class
// prediction heads.
#pragma once

#include "rfdet/autodiff.hpp"
#include "rfdet/field.hpp"

namespace rfdet {

enum class FusionKind { attention, mlp };
enum class StreamMode { fused, fine_only, coarse_only };

inline const char* to_string(FusionKind k) { return k == FusionKind::attention ? "attention" : "mlp"; }
inline const char* to_string(StreamMode m) {
  switch (m) {
    case StreamMode::fused: return "fused";
    case StreamMode::fine_only: return "fine_only";
    case StreamMode::coarse_only: return "coarse_only";
  }
  return "?";
}

// Token channel selection. raw = per-sample (x,y,z,r,g,b,log1p sigma);
// color = the ray's rendered rgb; depth = the ray's rendered depth.
struct Modality {
  bool raw = true;
  bool color = false;
  bool depth = false;

  int channels(int n_samples) const {
    return (raw ? 7 * n_samples : 0) + (color ? 3 : 0) + (depth ? 1 : 0);
  }
  bool any() const { return raw || color || depth; }
  bool needs_maps() const { return color || depth; }
};

struct ModelConfig {
  int d_model = 64;
  int heads = 4;
  int layers_fine = 2, layers_coarse = 2, layers_decoder = 2;
  int queries = 8;    // J
  int corners = 8;    // N_c
  int num_classes = 4;
  int ffn_mult = 4;
  double ln_eps = 1e-5;
  Modality modality;  // shared by both streams
  FusionKind fusion = FusionKind::attention;
  StreamMode streams = StreamMode::fused;

  void validate() const {
    check(d_model >= 1 && heads >= 1 && d_model % heads == 0,
          "model: d_model must be a positive multiple of heads");
    check(layers_fine >= 1 && layers_coarse >= 1 && layers_decoder >= 1,
          "model: layer counts must be >= 1");
    check(queries >= 1, "model: need at least one query");
    check(corners == 8, "model: corner count is fixed at 8");
    check(num_classes >= 1, "model: need at least one class");
    check(ffn_mult >= 1, "model: ffn_mult must be >= 1");
    check(modality.any(), "model: empty modality set");
  }
};

// Instrumentation for ablation contracts: counts how many sample grids each
// stream constructed.
struct PipelineStats {
  int64_t fine_grids = 0;
  int64_t coarse_grids = 0;
  void reset() { fine_grids = coarse_grids = 0; }
};

inline PipelineStats& pipeline_stats() {
  static PipelineStats s;
  return s;
}

// One token per ray: the flattened selected channels of its N samples.
// Positions are mapped to [-1,1] via the scene bounds, densities through
// log1p, rendered depth scaled by 1/t_far.
template <class T>
Array<T> tokenize(const SampleGrid& grid, const RenderedViews* views, const Modality& m,
                  const SceneBounds& bounds, double t_far) {
  check(m.any(), "tokenize: empty modality set");
  if (m.needs_maps())
    check(views && views->has_color >= m.color && views->has_depth >= m.depth,
          "tokenize: modality requires rendered maps");
  const int rays = grid.width * grid.height;
  const int d_in = m.channels(grid.n);
  Array<T> out = Array<T>::zeros({rays, d_in});
  const Vec3 span = bounds.hi - bounds.lo;
  for (int r = 0; r < rays; ++r) {
    int64_t col = 0;
    T* row = &out[static_cast<int64_t>(r) * d_in];
    if (m.raw) {
      for (int k = 0; k < grid.n; ++k) {
        const double* v = &grid.values[(static_cast<int64_t>(r) * grid.n + k) * 7];
        row[col++] = static_cast<T>(2.0 * (v[0] - bounds.lo.x) / span.x - 1.0);
        row[col++] = static_cast<T>(2.0 * (v[1] - bounds.lo.y) / span.y - 1.0);
        row[col++] = static_cast<T>(2.0 * (v[2] - bounds.lo.z) / span.z - 1.0);
        row[col++] = static_cast<T>(v[3]);
        row[col++] = static_cast<T>(v[4]);
        row[col++] = static_cast<T>(v[5]);
        row[col++] = static_cast<T>(std::log1p(v[6]));
      }
    }
    if (m.color)
      for (int c = 0; c < 3; ++c) row[col++] = static_cast<T>(views->color[static_cast<int64_t>(r) * 3 + c]);
    if (m.depth) row[col++] = static_cast<T>(views->depth[r] / t_far);
  }
  return out;
}

template <class T>
struct TokenizedView {
  Array<T> fine, coarse;
  bool has_fine = false, has_coarse = false;
};

// Samples the grids a stream mode needs and tokenizes them. The coarse
// stream looks through a focal length shortened by cfg.delta.
template <class T>
TokenizedView<T> tokenize_view(const SyntheticScene& scene, const Pose& pose,
                               const Intrinsics& intr, const SamplingConfig& scfg,
                               const Modality& modality, StreamMode mode) {
  TokenizedView<T> out;
  const bool want_maps = modality.needs_maps();
  if (mode != StreamMode::coarse_only) {
    const SampleGrid g = sample_grid(scene, pose, intr, scfg);
    pipeline_stats().fine_grids++;
    RenderedViews v;
    if (want_maps) v = render_maps_from_grid(g, modality.color, modality.depth);
    out.fine = tokenize<T>(g, want_maps ? &v : nullptr, modality, scene.bounds, scfg.t_far);
    out.has_fine = true;
  }
  if (mode != StreamMode::fine_only) {
    const Intrinsics ci = coarse_intrinsics(intr, scfg.delta);
    const SampleGrid g = sample_grid(scene, pose, ci, scfg);
    pipeline_stats().coarse_grids++;
    RenderedViews v;
    if (want_maps) v = render_maps_from_grid(g, modality.color, modality.depth);
    out.coarse = tokenize<T>(g, want_maps ? &v : nullptr, modality, scene.bounds, scfg.t_far);
    out.has_coarse = true;
  }
  return out;
}

// Scene bounds inflated by `factor` about their center; the box head's
// sigmoid output is mapped affinely into this volume.
inline SceneBounds inflate(const SceneBounds& b, double factor) {
  const Vec3 c = (b.lo + b.hi) * 0.5;
  const Vec3 h = (b.hi - b.lo) * (0.5 * factor);
  return {c - h, c + h};
}

template <class T>
class Model {
 public:
  ModelConfig cfg;
  ParamStore<T> store;

  struct Out {
    Node<T>* boxes = nullptr;   // {J, 24}: 8 corners x (x,y,z)
    Node<T>* logits = nullptr;  // {J, C+1}, last column = no-object
  };

  // Creates all parameters for cfg.streams in a fixed order and fills them
  // deterministically; each tensor's values depend only on (seed, name).
  void init(uint64_t seed) {
    cfg.validate();
    seed_ = seed;
    const int d = cfg.d_model;
    const int d_in = cfg.modality.channels(n_samples_hint_);
    if (cfg.streams != StreamMode::coarse_only) make_projection("proj.fine", d_in);
    if (cfg.streams != StreamMode::fine_only) make_projection("proj.coarse", d_in);
    if (cfg.streams != StreamMode::coarse_only)
      for (int l = 0; l < cfg.layers_fine; ++l) make_encoder_layer("enc.fine.l" + std::to_string(l));
    if (cfg.streams != StreamMode::fine_only)
      for (int l = 0; l < cfg.layers_coarse; ++l) make_encoder_layer("enc.coarse.l" + std::to_string(l));
    if (cfg.streams == StreamMode::fused) {
      if (cfg.fusion == FusionKind::attention) {
        make_attention("fuse", /*zero_out_proj=*/true);
      } else {
        make_linear("fuse.mlp.w0", "fuse.mlp.b0", 2 * d, d);
        make_linear("fuse.mlp.w1", "fuse.mlp.b1", d, d);
      }
    }
    make_tensor("queries", {cfg.queries, d}, d, d);
    for (int l = 0; l < cfg.layers_decoder; ++l) {
      const std::string p = "dec.l" + std::to_string(l);
      make_attention(p + ".self", false);
      make_attention(p + ".cross", false);
      make_ffn(p + ".ffn");
    }
    make_linear("head.box.w0", "head.box.b0", d, d);
    make_linear("head.box.w1", "head.box.b1", d, d);
    make_linear("head.box.w2", "head.box.b2", d, 3 * cfg.corners);
    make_linear("head.cls.w", "head.cls.b", d, cfg.num_classes + 1);
  }

  // The token width d_in depends on N; set before init.
  void set_samples_per_ray(int n) { n_samples_hint_ = n; }

  Out forward(Tape<T>& t, const TokenizedView<T>& in, const SceneBounds& bounds) {
    return forward(t, in, bounds, cfg.streams);
  }

  // mode may restrict a fused parameter set to one stream at runtime (the
  // unused stream's parameters are then never touched on the tape).
  Out forward(Tape<T>& t, const TokenizedView<T>& in, const SceneBounds& bounds,
              StreamMode mode) {
    Node<T>* memory = nullptr;
    if (mode != StreamMode::coarse_only) {
      check(in.has_fine, "forward: fine tokens missing");
      Node<T>* f = encode_stream(t, in.fine, "fine", cfg.layers_fine);
      if (mode == StreamMode::fused) {
        check(in.has_coarse, "forward: coarse tokens missing");
        Node<T>* c = encode_stream(t, in.coarse, "coarse", cfg.layers_coarse);
        memory = fuse(t, f, c);
      } else {
        memory = f;
      }
    } else {
      check(in.has_coarse, "forward: coarse tokens missing");
      memory = encode_stream(t, in.coarse, "coarse", cfg.layers_coarse);
    }
    Node<T>* dec = decode(t, memory);
    return predict_heads(t, dec, bounds);
  }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_ = 0;
  int n_samples_hint_ = 16;

  void make_tensor(const std::string& name, std::vector<int> shape, int fan_in, int fan_out,
                   bool zero = false) {
    auto& p = store.create(name, std::move(shape));
    if (zero) return;
    Rng rng(sub_seed(seed_, "init/" + name));
    xavier_fill(p.value, fan_in, fan_out, rng);
  }

  void make_linear(const std::string& w, const std::string& b, int in, int out,
                   bool zero = false) {
    make_tensor(w, {in, out}, in, out, zero);
    store.create(b, {out});  // biases start at zero
  }

  void make_projection(const std::string& p, int d_in) {
    make_linear(p + ".w0", p + ".b0", d_in, cfg.d_model);
    make_linear(p + ".w1", p + ".b1", cfg.d_model, cfg.d_model);
    make_linear(p + ".w2", p + ".b2", cfg.d_model, cfg.d_model);
  }

  void make_attention(const std::string& p, bool zero_out_proj) {
    const int d = cfg.d_model;
    make_linear(p + ".wq", p + ".bq", d, d);
    make_linear(p + ".wk", p + ".bk", d, d);
    make_linear(p + ".wv", p + ".bv", d, d);
    make_linear(p + ".wo", p + ".bo", d, d, zero_out_proj);
  }

  void make_ffn(const std::string& p) {
    make_linear(p + ".w0", p + ".b0", cfg.d_model, cfg.ffn_mult * cfg.d_model);
    make_linear(p + ".w1", p + ".b1", cfg.ffn_mult * cfg.d_model, cfg.d_model);
  }

  void make_encoder_layer(const std::string& p) {
    make_attention(p + ".attn", false);
    make_ffn(p + ".ffn");
  }

  Node<T>* leaf(Tape<T>& t, const std::string& name) {
    Parameter<T>* p = store.find(name);
    check(p != nullptr, "unknown parameter: " + name);
    return t.leaf(*p);
  }

  Node<T>* lin(Tape<T>& t, Node<T>* x, const std::string& w, const std::string& b) {
    return linear(t, x, leaf(t, w), leaf(t, b));
  }

  Node<T>* mha(Tape<T>& t, const std::string& p, Node<T>* q_in, Node<T>* kv_in) {
    const int d = cfg.d_model, nh = cfg.heads, dh = d / nh;
    const int tq = q_in->value.shape[0], tk = kv_in->value.shape[0];
    Node<T>* q = lin(t, q_in, p + ".wq", p + ".bq");
    Node<T>* k = lin(t, kv_in, p + ".wk", p + ".bk");
    Node<T>* v = lin(t, kv_in, p + ".wv", p + ".bv");
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    std::vector<Node<T>*> outs;
    outs.reserve(static_cast<size_t>(nh));
    for (int h = 0; h < nh; ++h) {
      Node<T>* qh = slice(t, q, {0, h * dh}, {tq, (h + 1) * dh});
      Node<T>* kh = slice(t, k, {0, h * dh}, {tk, (h + 1) * dh});
      Node<T>* vh = slice(t, v, {0, h * dh}, {tk, (h + 1) * dh});
      Node<T>* scores = scalar_mul(t, matmul(t, qh, transpose(t, kh)), scale);
      Node<T>* attn = softmax(t, scores, 1);
      outs.push_back(matmul(t, attn, vh));
    }
    Node<T>* cat = concat(t, outs, 1);
    return lin(t, cat, p + ".wo", p + ".bo");
  }

  Node<T>* ffn(Tape<T>& t, const std::string& p, Node<T>* x) {
    return lin(t, gelu(t, lin(t, x, p + ".w0", p + ".b0")), p + ".w1", p + ".b1");
  }

  Node<T>* ln(Tape<T>& t, Node<T>* x) { return layer_norm(t, x, 1, cfg.ln_eps); }

  Node<T>* encoder_layer(Tape<T>& t, const std::string& p, Node<T>* x) {
    Node<T>* n1 = ln(t, x);
    x = add(t, x, mha(t, p + ".attn", n1, n1));
    x = add(t, x, ffn(t, p + ".ffn", ln(t, x)));
    return x;
  }

 public:
  Node<T>* encode_stream(Tape<T>& t, const Array<T>& tokens, const std::string& stream,
                         int layers) {
    Node<T>* x = project(t, tokens, "proj." + stream);
    for (int l = 0; l < layers; ++l)
      x = encoder_layer(t, "enc." + stream + ".l" + std::to_string(l), x);
    return ln(t, x);
  }

  Node<T>* project(Tape<T>& t, const Array<T>& tokens, const std::string& p) {
    Node<T>* x = t.constant(tokens, "tokens");
    x = gelu(t, lin(t, x, p + ".w0", p + ".b0"));
    x = gelu(t, lin(t, x, p + ".w1", p + ".b1"));
    return lin(t, x, p + ".w2", p + ".b2");
  }

  // Fine stream plus a gated view of the coarse stream. The attention form
  // starts as an exact identity because the output projection is
  // zero-initialized.
  Node<T>* fuse(Tape<T>& t, Node<T>* fine, Node<T>* coarse) {
    if (cfg.fusion == FusionKind::attention) return add(t, fine, mha(t, "fuse", fine, coarse));
    // MLP fusion: stitch along the feature axis and run a 2-layer perceptron.
    // Token counts match at desk scale; otherwise the coarse stream is
    // mean-pooled and broadcast to the fine token count.
    Node<T>* c = coarse;
    if (coarse->value.shape[0] != fine->value.shape[0]) {
      Node<T>* pooled = mean(t, coarse, {0});                       // {d}
      c = broadcast(t, reshape(t, pooled, {1, cfg.d_model}), fine->value.shape);
    }
    Node<T>* cat = concat(t, std::vector<Node<T>*>{fine, c}, 1);    // {T, 2d}
    return lin(t, gelu(t, lin(t, cat, "fuse.mlp.w0", "fuse.mlp.b0")), "fuse.mlp.w1",
               "fuse.mlp.b1");
  }

  Node<T>* decode(Tape<T>& t, Node<T>* memory) {
    Node<T>* x = leaf(t, "queries");
    for (int l = 0; l < cfg.layers_decoder; ++l) {
      const std::string p = "dec.l" + std::to_string(l);
      Node<T>* n1 = ln(t, x);
      x = add(t, x, mha(t, p + ".self", n1, n1));
      x = add(t, x, mha(t, p + ".cross", ln(t, x), memory));
      x = add(t, x, ffn(t, p + ".ffn", ln(t, x)));
    }
    return ln(t, x);
  }

  Out predict_heads(Tape<T>& t, Node<T>* dec, const SceneBounds& bounds) {
    Node<T>* h = gelu(t, lin(t, dec, "head.box.w0", "head.box.b0"));
    h = gelu(t, lin(t, h, "head.box.w1", "head.box.b1"));
    Node<T>* s = sigmoid(t, lin(t, h, "head.box.w2", "head.box.b2"));  // {J, 24}

    const SceneBounds inf = inflate(bounds, 1.25);
    const int cols = 3 * cfg.corners;
    Array<T> scale = Array<T>::zeros({cfg.queries, cols});
    Array<T> offset = Array<T>::zeros({cfg.queries, cols});
    for (int j = 0; j < cfg.queries; ++j)
      for (int c = 0; c < cols; ++c) {
        const int axis = c % 3;
        scale[static_cast<int64_t>(j) * cols + c] = static_cast<T>(inf.hi[axis] - inf.lo[axis]);
        offset[static_cast<int64_t>(j) * cols + c] = static_cast<T>(inf.lo[axis]);
      }
    Out out;
    out.boxes = add(t, mul(t, s, t.constant(scale, "bounds_scale")),
                    t.constant(offset, "bounds_offset"));
    out.logits = lin(t, dec, "head.cls.w", "head.cls.b");
    return out;
  }
};

// Plain-value detections for evaluation and serialization.
struct Detections {
  Array<double> boxes;   // {J, 8, 3}
  Array<double> logits;  // {J, C+1}
};

template <class T>
Detections extract_detections(const typename Model<T>::Out& out) {
  Detections d;
  const int j = out.boxes->value.shape[0];
  d.boxes = Array<double>::zeros({j, 8, 3});
  for (int64_t i = 0; i < out.boxes->value.numel(); ++i)
    d.boxes[i] = static_cast<double>(out.boxes->value[i]);
  d.logits = Array<double>::zeros(out.logits->value.shape);
  for (int64_t i = 0; i < out.logits->value.numel(); ++i)
    d.logits[i] = static_cast<double>(out.logits->value[i]);
  return d;
}

inline Box3D detection_box(const Detections& d, int j) {
  Box3D b;
  for (int c = 0; c < 8; ++c)
    b.corners[static_cast<size_t>(c)] = {d.boxes[(static_cast<int64_t>(j) * 8 + c) * 3],
                                         d.boxes[(static_cast<int64_t>(j) * 8 + c) * 3 + 1],
                                         d.boxes[(static_cast<int64_t>(j) * 8 + c) * 3 + 2]};
  return b;
}

// Softmax over a logits row; returns C+1 probabilities.
inline std::vector<double> softmax_row(const Array<double>& logits, int row) {
  const int n = logits.shape[1];
  std::vector<double> p(static_cast<size_t>(n));
  double mx = logits[static_cast<int64_t>(row) * n];
  for (int c = 1; c < n; ++c) mx = std::max(mx, logits[static_cast<int64_t>(row) * n + c]);
  double denom = 0;
  for (int c = 0; c < n; ++c) {
    p[static_cast<size_t>(c)] = std::exp(logits[static_cast<int64_t>(row) * n + c] - mx);
    denom += p[static_cast<size_t>(c)];
  }
  for (auto& v : p) v /= denom;
  return p;
}

}  // namespace rfdet

// Analytic radiance fields built from hard-boundary primitives, ray-grid
// sampling at two focal scales, and volume rendering of color and depth.
#pragma once

#include <string>
#include <vector>

#include "rfdet/geometry.hpp"

namespace rfdet {

enum class PrimitiveKind { box, sphere, cylinder };

inline const char* to_string(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::box: return "box";
    case PrimitiveKind::sphere: return "sphere";
    case PrimitiveKind::cylinder: return "cylinder";
  }
  return "?";
}

inline PrimitiveKind primitive_kind_from(const std::string& s) {
  if (s == "box") return PrimitiveKind::box;
  if (s == "sphere") return PrimitiveKind::sphere;
  if (s == "cylinder") return PrimitiveKind::cylinder;
  throw IoError("unknown primitive kind: " + s);
}

// size semantics: box → half-extents per axis; sphere → radius in size.x;
// cylinder → (radius, half-height, radius) with the axis along local y.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::box;
  Pose pose;
  Vec3 size{1, 1, 1};
  Vec3 color{1, 1, 1};
  double density_amp = 10.0;
  int class_id = 0;
};

struct SceneBounds {
  Vec3 lo{-2, -2, -2};
  Vec3 hi{2, 2, 2};
};

struct SyntheticScene {
  std::vector<Primitive> primitives;
  std::vector<std::string> class_table;
  SceneBounds bounds;
};

inline bool primitive_contains(const Primitive& p, const Vec3& x) {
  const Vec3 local = p.pose.rotation.transposed() * (x - p.pose.translation);
  switch (p.kind) {
    case PrimitiveKind::box:
      return std::fabs(local.x) <= p.size.x && std::fabs(local.y) <= p.size.y &&
             std::fabs(local.z) <= p.size.z;
    case PrimitiveKind::sphere:
      return dot(local, local) <= p.size.x * p.size.x;
    case PrimitiveKind::cylinder:
      return local.x * local.x + local.z * local.z <= p.size.x * p.size.x &&
             std::fabs(local.y) <= p.size.y;
  }
  return false;
}

// Tight world-space box around one primitive, canonical corner order.
inline Box3D tight_box(const Primitive& p) {
  Vec3 full;
  switch (p.kind) {
    case PrimitiveKind::box: full = p.size * 2.0; break;
    case PrimitiveKind::sphere: full = {2 * p.size.x, 2 * p.size.x, 2 * p.size.x}; break;
    case PrimitiveKind::cylinder: full = {2 * p.size.x, 2 * p.size.y, 2 * p.size.x}; break;
  }
  return box_from_pose(p.pose.translation, full, p.pose.rotation);
}

inline std::vector<LabeledBox> gt_boxes(const SyntheticScene& scene) {
  std::vector<LabeledBox> out;
  out.reserve(scene.primitives.size());
  for (const auto& p : scene.primitives) out.push_back({tight_box(p), p.class_id});
  return out;
}

struct FieldSample {
  Vec3 color{0, 0, 0};
  double sigma = 0;
};

// Hard-boundary field: inside a primitive, its (color, density_amp); ties
// between overlapping primitives resolve to the nearer center (then to the
// earlier index). The direction argument exists for interface parity; the
// desk-scale field is view-independent.
inline FieldSample eval_field(const SyntheticScene& scene, const Vec3& x, const Vec3& /*d*/) {
  const Primitive* best = nullptr;
  double best_d2 = 0;
  for (const auto& p : scene.primitives) {
    if (!primitive_contains(p, x)) continue;
    const Vec3 dc = x - p.pose.translation;
    const double d2 = dot(dc, dc);
    if (!best || d2 < best_d2) {
      best = &p;
      best_d2 = d2;
    }
  }
  if (!best) return {};
  return {best->color, best->density_amp};
}

struct SamplingConfig {
  double delta = 1.5;
  int n_samples = 16;
  int width = 24, height = 18;
  double t_near = 0.1, t_far = 6.0;

  void validate() const {
    check(delta > 1.0, "sampling: delta must be > 1");
    check(n_samples >= 2, "sampling: need at least 2 samples per ray");
    check(width >= 2 && height >= 2, "sampling: grid dims must be >= 2");
    check(0 < t_near && t_near < t_far, "sampling: need 0 < t_near < t_far");
  }
};

// Per-ray samples: values[h][w][k] = (x, y, z, r, g, b, sigma), plus the
// shared ascending, equally spaced depths ts.
struct SampleGrid {
  int width = 0, height = 0, n = 0;
  std::vector<double> ts;
  Array<double> values;  // {H, W, N, 7}
};

inline std::vector<double> sample_depths(const SamplingConfig& cfg) {
  std::vector<double> ts(static_cast<size_t>(cfg.n_samples));
  const double dt = (cfg.t_far - cfg.t_near) / (cfg.n_samples - 1);
  for (int k = 0; k < cfg.n_samples; ++k) ts[static_cast<size_t>(k)] = cfg.t_near + k * dt;
  return ts;
}

inline SampleGrid sample_grid(const SyntheticScene& scene, const Pose& pose,
                              const Intrinsics& intr, const SamplingConfig& cfg) {
  cfg.validate();
  intr.validate();
  pose.validate();
  check(cfg.width == intr.width && cfg.height == intr.height,
        "sampling grid does not match intrinsics grid");
  SampleGrid g;
  g.width = cfg.width;
  g.height = cfg.height;
  g.n = cfg.n_samples;
  g.ts = sample_depths(cfg);
  g.values = Array<double>::zeros({cfg.height, cfg.width, cfg.n_samples, 7});
  for (int j = 0; j < cfg.height; ++j)
    for (int i = 0; i < cfg.width; ++i) {
      const Vec3 dir_cam = ray_direction(i + 0.5, j + 0.5, intr);
      const Ray ray = camera_ray(pose, dir_cam, cfg.t_near, cfg.t_far);
      for (int k = 0; k < cfg.n_samples; ++k) {
        const Vec3 p = ray.origin + ray.direction * g.ts[static_cast<size_t>(k)];
        const FieldSample s = eval_field(scene, p, ray.direction);
        double* v = &g.values[((static_cast<int64_t>(j) * cfg.width + i) * cfg.n_samples + k) * 7];
        v[0] = p.x;
        v[1] = p.y;
        v[2] = p.z;
        v[3] = s.color.x;
        v[4] = s.color.y;
        v[5] = s.color.z;
        v[6] = s.sigma;
      }
    }
  return g;
}

// T_1 = 1; T_k = exp(-sum_{k'<k} sigma_k' dt_k'). The final interval reuses
// the uniform spacing, so every sample has a width.
inline std::vector<double> transmittance(const std::vector<double>& sigmas,
                                         const std::vector<double>& ts) {
  const size_t n = sigmas.size();
  check(ts.size() == n && n >= 2, "transmittance: need N >= 2 matching sigmas/ts");
  const double spacing = ts[1] - ts[0];
  std::vector<double> t_out(n);
  double acc = 0.0;
  for (size_t k = 0; k < n; ++k) {
    t_out[k] = std::exp(-acc);
    const double dt = k + 1 < n ? ts[k + 1] - ts[k] : spacing;
    acc += sigmas[k] * dt;
  }
  return t_out;
}

inline std::vector<double> render_weights(const std::vector<double>& sigmas,
                                          const std::vector<double>& ts) {
  const auto trans = transmittance(sigmas, ts);
  const size_t n = sigmas.size();
  const double spacing = ts[1] - ts[0];
  std::vector<double> w(n);
  for (size_t k = 0; k < n; ++k) {
    const double dt = k + 1 < n ? ts[k + 1] - ts[k] : spacing;
    w[k] = trans[k] * (1.0 - std::exp(-sigmas[k] * dt));
  }
  return w;
}

inline Vec3 render_color(const std::vector<Vec3>& colors, const std::vector<double>& sigmas,
                         const std::vector<double>& ts) {
  check(colors.size() == sigmas.size(), "render_color: colors/sigmas size mismatch");
  const auto w = render_weights(sigmas, ts);
  Vec3 c{0, 0, 0};
  for (size_t k = 0; k < w.size(); ++k) c = c + colors[k] * w[k];
  return c;
}

// Expected depth with no opacity normalization: empty rays render depth 0.
inline double render_depth(const std::vector<double>& sigmas, const std::vector<double>& ts) {
  const auto w = render_weights(sigmas, ts);
  double d = 0;
  for (size_t k = 0; k < w.size(); ++k) d += w[k] * ts[k];
  return d;
}

struct RenderedViews {
  bool has_color = false, has_depth = false;
  Array<double> color;  // {H, W, 3}
  Array<double> depth;  // {H, W}
};

inline RenderedViews render_maps_from_grid(const SampleGrid& g, bool want_color,
                                           bool want_depth) {
  if (!want_color && !want_depth) throw ConfigError("render maps: empty modality set");
  RenderedViews out;
  out.has_color = want_color;
  out.has_depth = want_depth;
  if (want_color) out.color = Array<double>::zeros({g.height, g.width, 3});
  if (want_depth) out.depth = Array<double>::zeros({g.height, g.width});
  std::vector<double> sig(static_cast<size_t>(g.n));
  std::vector<Vec3> col(static_cast<size_t>(g.n));
  for (int j = 0; j < g.height; ++j)
    for (int i = 0; i < g.width; ++i) {
      for (int k = 0; k < g.n; ++k) {
        const double* v = &g.values[((static_cast<int64_t>(j) * g.width + i) * g.n + k) * 7];
        col[static_cast<size_t>(k)] = {v[3], v[4], v[5]};
        sig[static_cast<size_t>(k)] = v[6];
      }
      if (want_color) {
        const Vec3 c = render_color(col, sig, g.ts);
        double* px = &out.color[(static_cast<int64_t>(j) * g.width + i) * 3];
        px[0] = c.x;
        px[1] = c.y;
        px[2] = c.z;
      }
      if (want_depth) out.depth[static_cast<int64_t>(j) * g.width + i] = render_depth(sig, g.ts);
    }
  return out;
}

inline RenderedViews render_views(const SyntheticScene& scene, const Pose& pose,
                                  const Intrinsics& intr, const SamplingConfig& cfg,
                                  bool want_color, bool want_depth) {
  if (!want_color && !want_depth) throw ConfigError("render_views: empty modality set");
  return render_maps_from_grid(sample_grid(scene, pose, intr, cfg), want_color, want_depth);
}

}  // namespace rfdet

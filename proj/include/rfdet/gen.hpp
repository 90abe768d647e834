// Procedural scene and camera generation. Everything is a pure function of
// the root seed, so regenerated corpora are byte-identical.
#pragma once

#include "rfdet/field.hpp"
#include "rfdet/rng.hpp"

namespace rfdet {

struct DataConfig {
  int n_scenes = 8;
  int objects_min = 1;
  int objects_max = 3;
  double val_fraction = 0.2;

  void validate() const {
    if (n_scenes < 1) throw ConfigError("data: n_scenes must be >= 1");
    if (!(objects_min >= 1 && objects_min <= objects_max))
      throw ConfigError("data: need 1 <= objects_min <= objects_max");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
      throw ConfigError("data: val_fraction must be in [0, 1)");
  }
};

struct CameraConfig {
  double focal = 16.0;
  int poses_per_scene = 4;
  double radius_min = 3.2, radius_max = 4.2;
  double elev_min = -0.7, elev_max = 0.7;

  void validate() const {
    if (!(focal > 0)) throw ConfigError("camera: focal must be > 0");
    if (poses_per_scene < 1) throw ConfigError("camera: poses_per_scene must be >= 1");
    if (!(0 < radius_min && radius_min <= radius_max))
      throw ConfigError("camera: need 0 < radius_min <= radius_max");
    if (!(elev_min <= elev_max && elev_min > -1.5 && elev_max < 1.5))
      throw ConfigError("camera: elevation range must sit inside (-1.5, 1.5)");
  }
};

inline const std::vector<std::string>& default_class_table() {
  static const std::vector<std::string> t{"cube", "slab", "tall_box", "sphere"};
  return t;
}

namespace detail {

inline Primitive make_primitive(int class_id, Rng& rng) {
  Primitive p;
  p.class_id = class_id;
  p.pose.rotation = Mat3::identity();
  switch (class_id) {
    case 0: {  // cube: equal half-extents
      const double s = rng.uniform(0.25, 0.45);
      p.kind = PrimitiveKind::box;
      p.size = {s, s, s};
      p.pose.rotation = rot_y(rng.uniform(0.0, 2.0 * M_PI));
      p.color = {0.80, 0.20, 0.20};
      break;
    }
    case 1: {  // slab: thin vertically
      p.kind = PrimitiveKind::box;
      p.size = {rng.uniform(0.35, 0.60), rng.uniform(0.08, 0.16), rng.uniform(0.35, 0.60)};
      p.pose.rotation = rot_y(rng.uniform(0.0, 2.0 * M_PI));
      p.color = {0.20, 0.70, 0.30};
      break;
    }
    case 2: {  // tall box
      p.kind = PrimitiveKind::box;
      p.size = {rng.uniform(0.15, 0.30), rng.uniform(0.50, 0.80), rng.uniform(0.15, 0.30)};
      p.pose.rotation = rot_y(rng.uniform(0.0, 2.0 * M_PI));
      p.color = {0.20, 0.30, 0.80};
      break;
    }
    default: {  // sphere
      const double r = rng.uniform(0.25, 0.45);
      p.kind = PrimitiveKind::sphere;
      p.size = {r, r, r};
      p.color = {0.80, 0.70, 0.20};
      break;
    }
  }
  for (int c = 0; c < 3; ++c) {
    p.color[c] = std::clamp(p.color[c] + rng.uniform(-0.15, 0.15), 0.05, 0.95);
  }
  p.density_amp = rng.uniform(15.0, 30.0);
  return p;
}

inline bool aabbs_disjoint(const Vec3& alo, const Vec3& ahi, const Vec3& blo, const Vec3& bhi,
                           double gap) {
  for (int a = 0; a < 3; ++a)
    if (ahi[a] + gap <= blo[a] || bhi[a] + gap <= alo[a]) return true;
  return false;
}

}  // namespace detail

// One scene: `index` selects the sub-seed, `class_cursor` walks the global
// round-robin class sequence so the corpus stays balanced within one object.
inline SyntheticScene gen_scene(uint64_t seed, int index, const DataConfig& cfg,
                                int64_t* class_cursor) {
  cfg.validate();
  Rng rng(sub_seed(seed, "scene", static_cast<uint64_t>(index)));
  SyntheticScene scene;
  scene.class_table = default_class_table();
  const int count =
      static_cast<int>(rng.uniform_int(cfg.objects_min, cfg.objects_max));
  const double margin = 0.1;
  const double gap = 0.05;
  for (int k = 0; k < count; ++k) {
    const int class_id = static_cast<int>(*class_cursor % 4);
    ++(*class_cursor);
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      Primitive p = detail::make_primitive(class_id, rng);
      p.pose.translation = {rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2),
                            rng.uniform(-1.2, 1.2)};
      const auto [lo, hi] = aabb(tight_box(p));
      bool ok = true;
      for (int a = 0; a < 3 && ok; ++a)
        ok = lo[a] >= scene.bounds.lo[a] + margin && hi[a] <= scene.bounds.hi[a] - margin;
      for (const Primitive& other : scene.primitives) {
        if (!ok) break;
        const auto [olo, ohi] = aabb(tight_box(other));
        ok = detail::aabbs_disjoint(lo, hi, olo, ohi, gap);
      }
      if (ok) {
        scene.primitives.push_back(p);
        placed = true;
      }
    }
    if (!placed)
      throw NumericalError("gen_scene: placement failed after 1000 attempts (scene " +
                           std::to_string(index) + ")");
  }
  return scene;
}

inline std::vector<SyntheticScene> gen_scenes(uint64_t seed, const DataConfig& cfg) {
  cfg.validate();
  int64_t cursor = 0;
  std::vector<SyntheticScene> out;
  out.reserve(static_cast<size_t>(cfg.n_scenes));
  for (int i = 0; i < cfg.n_scenes; ++i) out.push_back(gen_scene(seed, i, cfg, &cursor));
  return out;
}

// Camera on a sphere around the scene center, looking inward.
inline Pose sample_pose(Rng& rng, const CameraConfig& cfg) {
  const double az = rng.uniform(0.0, 2.0 * M_PI);
  const double elev = rng.uniform(cfg.elev_min, cfg.elev_max);
  const double radius = rng.uniform(cfg.radius_min, cfg.radius_max);
  const Vec3 eye{radius * std::cos(elev) * std::cos(az), radius * std::sin(elev),
                 radius * std::cos(elev) * std::sin(az)};
  return look_at(eye, {0, 0, 0}, {0, 1, 0});
}

inline std::vector<Pose> gen_poses(uint64_t seed, int scene_index, const CameraConfig& cfg) {
  cfg.validate();
  Rng rng(sub_seed(seed, "poses", static_cast<uint64_t>(scene_index)));
  std::vector<Pose> out;
  out.reserve(static_cast<size_t>(cfg.poses_per_scene));
  for (int i = 0; i < cfg.poses_per_scene; ++i) out.push_back(sample_pose(rng, cfg));
  return out;
}

// Evenly spaced azimuth orbit at fixed radius/elevation, for track runs.
inline std::vector<Pose> orbit_poses(int steps, double radius, double elev) {
  check(steps >= 1, "orbit: steps must be >= 1");
  std::vector<Pose> out;
  out.reserve(static_cast<size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double az = 2.0 * M_PI * i / steps;
    const Vec3 eye{radius * std::cos(elev) * std::cos(az), radius * std::sin(elev),
                   radius * std::cos(elev) * std::sin(az)};
    out.push_back(look_at(eye, {0, 0, 0}, {0, 1, 0}));
  }
  return out;
}

// Deterministic train/val split: scene i goes to val when the seeded hash of
// its index lands inside the val fraction.
inline bool is_val_scene(uint64_t seed, int scene_index, double val_fraction) {
  const uint64_t h = sub_seed(seed, "split", static_cast<uint64_t>(scene_index));
  const double u = static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
  return u < val_fraction;
}

}  // namespace rfdet

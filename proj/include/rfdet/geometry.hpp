// Pinhole camera model, rigid poses, ray generation at two focal scales,
// and 3D box IoU/GIoU on axis-aligned corner hulls.
#pragma once

#include <array>
#include <cmath>

#include "rfdet/array.hpp"

namespace rfdet {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  check(n > 0, "cannot normalize zero vector");
  return a / n;
}
inline Vec3 cwise_min(const Vec3& a, const Vec3& b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
inline Vec3 cwise_max(const Vec3& a, const Vec3& b) {
  return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double& operator()(int r, int c) { return m[static_cast<size_t>(r * 3 + c)]; }
  double operator()(int r, int c) const { return m[static_cast<size_t>(r * 3 + c)]; }

  static Mat3 identity() { return {}; }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }

  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
};

inline Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r.m = {1, 0, 0, 0, c, -s, 0, s, c};
  return r;
}
inline Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r.m = {c, 0, s, 0, 1, 0, -s, 0, c};
  return r;
}
inline Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
  return r;
}

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  const Mat3 rtr = r.transposed() * r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (std::fabs(rtr(i, j) - (i == j ? 1.0 : 0.0)) > tol) return false;
  return std::fabs(r.det() - 1.0) <= tol;
}

// Camera-to-world transform: x_world = R x_cam + t.
struct Pose {
  Mat3 rotation;
  Vec3 translation;

  void validate() const {
    check(is_rotation(rotation), "pose rotation is not in SO(3)");
  }
};

struct Intrinsics {
  double focal = 0;        // pixels
  double px = 0, py = 0;   // principal point, pixels
  int width = 0, height = 0;  // ray-grid dimensions

  void validate() const {
    check(focal > 0, "intrinsics: focal must be > 0");
    check(width >= 2 && height >= 2, "intrinsics: grid dims must be >= 2");
    check(px > 0 && px < width && py > 0 && py < height,
          "intrinsics: principal point must lie inside the grid");
  }
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit
  double t_near = 0, t_far = 0;
};

// 8 world-space corners. Canonical order: the sign combinations of
// (±sx/2, ±sy/2, ±sz/2) enumerated lexicographically with '-' before '+',
// i.e. index bit 2 = x sign, bit 1 = y sign, bit 0 = z sign.
struct Box3D {
  std::array<Vec3, 8> corners{};
};

struct LabeledBox {
  Box3D box;
  int class_id = 0;
};

// Camera frame: x right, y down, z forward (direction numerator [x-px, y-py, f]).
inline Vec3 ray_direction(double x, double y, const Intrinsics& intr) {
  return normalized({x - intr.px, y - intr.py, intr.focal});
}

// Wider field of view via a shorter focal length; grid and principal point
// stay fixed so the two ray grids stay pixel-aligned.
inline Intrinsics coarse_intrinsics(const Intrinsics& fine, double delta) {
  if (!(delta > 1.0)) throw ConfigError("coarse intrinsics require delta > 1");
  Intrinsics c = fine;
  c.focal = fine.focal / delta;
  return c;
}

inline Ray camera_ray(const Pose& pose, const Vec3& dir_cam, double t_near, double t_far) {
  check(0 < t_near && t_near < t_far, "camera_ray: need 0 < t_near < t_far");
  return {pose.translation, pose.rotation * dir_cam, t_near, t_far};
}

inline std::pair<Vec3, Vec3> aabb(const Box3D& b) {
  Vec3 lo = b.corners[0], hi = b.corners[0];
  for (int i = 1; i < 8; ++i) {
    lo = cwise_min(lo, b.corners[static_cast<size_t>(i)]);
    hi = cwise_max(hi, b.corners[static_cast<size_t>(i)]);
  }
  return {lo, hi};
}

inline double aabb_volume(const Vec3& lo, const Vec3& hi) {
  const double dx = hi.x - lo.x, dy = hi.y - lo.y, dz = hi.z - lo.z;
  if (dx <= 0 || dy <= 0 || dz <= 0) return 0.0;
  return dx * dy * dz;
}

namespace detail {
struct IouParts {
  double inter = 0, uni = 0, hull = 0;
};

inline IouParts iou_parts(const Box3D& a, const Box3D& b) {
  auto [alo, ahi] = aabb(a);
  auto [blo, bhi] = aabb(b);
  const Vec3 ilo = cwise_max(alo, blo);
  const Vec3 ihi = cwise_min(ahi, bhi);
  IouParts p;
  p.inter = aabb_volume(ilo, ihi);
  p.uni = aabb_volume(alo, ahi) + aabb_volume(blo, bhi) - p.inter;
  p.hull = aabb_volume(cwise_min(alo, blo), cwise_max(ahi, bhi));
  return p;
}
}  // namespace detail

// Intersection-over-union of the axis-aligned hulls of the corner sets.
inline double iou3d(const Box3D& a, const Box3D& b) {
  const auto p = detail::iou_parts(a, b);
  return p.uni > 0 ? p.inter / p.uni : 0.0;
}

// IoU minus the enclosing-hull excess fraction. Degenerate hulls give 0.
inline double giou3d(const Box3D& a, const Box3D& b) {
  const auto p = detail::iou_parts(a, b);
  const double iou = p.uni > 0 ? p.inter / p.uni : 0.0;
  if (p.hull <= 0) return iou;
  return iou - (p.hull - p.uni) / p.hull;
}

// size = full edge lengths; corners at rot * (±size/2) + center.
inline Box3D box_from_pose(const Vec3& center, const Vec3& size, const Mat3& rot) {
  check(size.x > 0 && size.y > 0 && size.z > 0, "box size components must be > 0");
  Box3D b;
  for (int i = 0; i < 8; ++i) {
    const Vec3 local{(i & 4 ? 0.5 : -0.5) * size.x, (i & 2 ? 0.5 : -0.5) * size.y,
                     (i & 1 ? 0.5 : -0.5) * size.z};
    b.corners[static_cast<size_t>(i)] = rot * local + center;
  }
  return b;
}

// Camera-to-world pose looking from eye toward target, y-down image axis.
// Columns of R are the camera axes in world coordinates: [right, down, forward].
inline Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up = {0, 1, 0}) {
  const Vec3 f = normalized(target - eye);
  Vec3 r_raw = cross(f, world_up);
  if (norm(r_raw) < 1e-9) r_raw = cross(f, Vec3{1, 0, 0});
  const Vec3 r = normalized(r_raw);
  const Vec3 d = cross(f, r);
  Pose p;
  p.rotation.m = {r.x, d.x, f.x, r.y, d.y, f.y, r.z, d.z, f.z};
  p.translation = eye;
  return p;
}

}  // namespace rfdet

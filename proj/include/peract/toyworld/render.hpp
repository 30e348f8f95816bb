#pragma once

// Analytic ray casting against the table plane, yawed boxes and vertical
// cylinders. Pixel (col, row) looks along K^-1 [col, row, 1] in the camera
// frame, so the ray parameter at a hit is exactly the camera-frame depth.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "peract/geometry.hpp"
#include "peract/toyworld/scene.hpp"
#include "peract/voxelizer.hpp"

namespace peract::toy {

struct CameraSpec {
  Vec3 eye = Vec3(0.7, 0.0, 0.55);
  Vec3 target = Vec3(0.0, 0.0, 0.05);
  Vec3 up = Vec3::UnitZ();
  int width = 80;
  int height = 80;
  double fov_deg = 60.0;

  [[nodiscard]] Eigen::Matrix3d intrinsics() const {
    const double f = 0.5 * width / std::tan(0.5 * fov_deg * kRadPerDeg);
    Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
    k(0, 0) = f;
    k(1, 1) = f;
    k(0, 2) = 0.5 * (width - 1);
    k(1, 2) = 0.5 * (height - 1);
    return k;
  }
  [[nodiscard]] Eigen::Matrix4d extrinsics() const { return look_at(eye, target, up); }
};

/// Front and overhead views, followed by extra views circling the table when count > 2.
[[nodiscard]] inline std::vector<CameraSpec> default_cameras(int count = 2, int resolution = 80) {
  std::vector<CameraSpec> cams;
  for (int i = 0; i < count; ++i) {
    CameraSpec c;
    c.width = c.height = resolution;
    if (i == 1) {
      c.eye = Vec3(0.0, 0.0, 1.1);
      c.target = Vec3::Zero();
      c.up = Vec3::UnitX();
    } else if (i >= 2) {
      const double a = (i - 1) * 0.5 * std::numbers::pi;
      c.eye = Vec3(0.7 * std::cos(a), 0.7 * std::sin(a), 0.55);
    }
    cams.push_back(c);
  }
  return cams;
}

struct RayHit {
  double t = std::numeric_limits<double>::infinity();
  Rgb rgb{0, 0, 0};
};

namespace detail {

inline void hit_box(const SceneObject& o, const Vec3& origin, const Vec3& dir, const Rgb& rgb, RayHit& best) {
  const double c = std::cos(o.yaw_deg * kRadPerDeg), s = std::sin(o.yaw_deg * kRadPerDeg);
  const Vec3 d0 = origin - o.center;
  const Vec3 lo(c * d0.x() + s * d0.y(), -s * d0.x() + c * d0.y(), d0.z());
  const Vec3 ld(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double h = 0.5 * o.size[a];
    if (std::abs(ld[a]) < 1e-15) {
      if (std::abs(lo[a]) > h) return;
      continue;
    }
    double ta = (-h - lo[a]) / ld[a], tb = (h - lo[a]) / ld[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return;
  }
  if (t0 > 0.0 && t0 < best.t) best = {t0, rgb};
}

inline void hit_cylinder(const SceneObject& o, const Vec3& origin, const Vec3& dir, const Rgb& rgb, RayHit& best) {
  const double r = 0.5 * o.size.x();
  const double zlo = o.bottom(), zhi = o.top();
  // Caps.
  if (std::abs(dir.z()) > 1e-15) {
    for (double zc : {zhi, zlo}) {
      const double t = (zc - origin.z()) / dir.z();
      if (t <= 0.0 || t >= best.t) continue;
      const double x = origin.x() + t * dir.x() - o.center.x(), y = origin.y() + t * dir.y() - o.center.y();
      if (x * x + y * y <= r * r) best = {t, rgb};
    }
  }
  // Side.
  const double ox = origin.x() - o.center.x(), oy = origin.y() - o.center.y();
  const double a = dir.x() * dir.x() + dir.y() * dir.y();
  if (a < 1e-15) return;
  const double b = 2.0 * (ox * dir.x() + oy * dir.y());
  const double cc = ox * ox + oy * oy - r * r;
  const double disc = b * b - 4.0 * a * cc;
  if (disc < 0.0) return;
  const double t = (-b - std::sqrt(disc)) / (2.0 * a);
  if (t <= 0.0 || t >= best.t) return;
  const double z = origin.z() + t * dir.z();
  if (z >= zlo && z <= zhi) best = {t, rgb};
}

}  // namespace detail

[[nodiscard]] inline RayHit cast_ray(const SceneState& scene, const Vec3& origin, const Vec3& dir) {
  RayHit best;
  if (dir.z() < 0.0) {
    const double t = (kTableTop - origin.z()) / dir.z();
    const Vec3 p = origin + t * dir;
    if (t > 0.0 && std::abs(p.x()) <= 0.6 && std::abs(p.y()) <= 0.6) best = {t, kTableRgb};
  }
  for (const auto& o : scene.objects) {
    const Rgb rgb = o.shape == Shape::kSlot ? kSlotRgb : color_rgb(o.color);
    if (o.is_cylinder()) {
      detail::hit_cylinder(o, origin, dir, rgb, best);
    } else {
      detail::hit_box(o, origin, dir, rgb, best);
    }
  }
  return best;
}

[[nodiscard]] inline CameraView render(const SceneState& scene, const CameraSpec& cam) {
  CameraView view;
  view.width = cam.width;
  view.height = cam.height;
  view.intrinsics = cam.intrinsics();
  view.extrinsics = cam.extrinsics();
  const auto pixels = static_cast<std::size_t>(cam.width) * static_cast<std::size_t>(cam.height);
  view.rgb.assign(pixels * 3, 0);
  view.depth.assign(pixels, 0.0f);
  const Eigen::Matrix3d k_inv = view.intrinsics.inverse();
  const Eigen::Matrix3d rot = view.extrinsics.topLeftCorner<3, 3>();
  for (int row = 0; row < cam.height; ++row) {
    for (int col = 0; col < cam.width; ++col) {
      const Vec3 dir = rot * (k_inv * Vec3(col, row, 1.0));
      const RayHit hit = cast_ray(scene, cam.eye, dir);
      if (!std::isfinite(hit.t)) continue;
      const auto pix = static_cast<std::size_t>(row) * static_cast<std::size_t>(cam.width) + static_cast<std::size_t>(col);
      view.depth[pix] = static_cast<float>(hit.t);
      for (int c = 0; c < 3; ++c) view.rgb[pix * 3 + static_cast<std::size_t>(c)] = hit.rgb[static_cast<std::size_t>(c)];
    }
  }
  return view;
}

[[nodiscard]] inline std::vector<CameraView> render_all(const SceneState& scene, const std::vector<CameraSpec>& cams) {
  std::vector<CameraView> views;
  views.reserve(cams.size());
  for (const auto& c : cams) views.push_back(render(scene, c));
  return views;
}

}  // namespace peract::toy

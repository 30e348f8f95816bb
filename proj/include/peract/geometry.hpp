#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace peract {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

inline constexpr double kDegPerRad = 180.0 / std::numbers::pi;
inline constexpr double kRadPerDeg = std::numbers::pi / 180.0;

// Pitch within this distance (radians) of +-90 deg is treated as gimbal lock.
inline constexpr double kGimbalTolerance = 1e-4;

/// Angles in degrees for an extrinsic X-Y-Z rotation: R = Rz(z) * Ry(y) * Rx(x).
struct EulerXYZ {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  [[nodiscard]] double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
};

/// Maps any finite angle to [0, 360).
[[nodiscard]] inline double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w -= 360.0;
  return w == 0.0 ? 0.0 : w;  // folds -0.0
}

/// Smallest absolute difference between two angles, in degrees.
[[nodiscard]] inline double angular_distance_deg(double a, double b) {
  const double d = wrap_degrees(a - b);
  return d > 180.0 ? 360.0 - d : d;
}

[[nodiscard]] inline Eigen::Matrix3d euler_to_matrix(const EulerXYZ& e) {
  const Eigen::AngleAxisd rx(e.x * kRadPerDeg, Vec3::UnitX());
  const Eigen::AngleAxisd ry(e.y * kRadPerDeg, Vec3::UnitY());
  const Eigen::AngleAxisd rz(e.z * kRadPerDeg, Vec3::UnitZ());
  return (rz * ry * rx).toRotationMatrix();
}

[[nodiscard]] inline Quat euler_to_quat(const EulerXYZ& e) {
  const Eigen::AngleAxisd rx(e.x * kRadPerDeg, Vec3::UnitX());
  const Eigen::AngleAxisd ry(e.y * kRadPerDeg, Vec3::UnitY());
  const Eigen::AngleAxisd rz(e.z * kRadPerDeg, Vec3::UnitZ());
  Quat q = rz * ry * rx;
  q.normalize();
  return q;
}

/// Extracts wrapped [0, 360) extrinsic X-Y-Z angles. Pitch comes from asin, so
/// the result is canonical: pitch lies in [0, 90] or [270, 360). At gimbal lock
/// the roll (x) is set to 0 and the remaining freedom is folded into yaw (z).
[[nodiscard]] inline EulerXYZ matrix_to_euler(const Eigen::Matrix3d& r) {
  const double s = std::clamp(-r(2, 0), -1.0, 1.0);
  const double pitch = std::asin(s);
  EulerXYZ e;
  if (std::abs(std::abs(pitch) - std::numbers::pi / 2.0) < kGimbalTolerance) {
    e.x = 0.0;
    e.y = pitch > 0.0 ? 90.0 : -90.0;
    e.z = std::atan2(-r(0, 1), r(1, 1)) * kDegPerRad;
  } else {
    e.x = std::atan2(r(2, 1), r(2, 2)) * kDegPerRad;
    e.y = pitch * kDegPerRad;
    e.z = std::atan2(r(1, 0), r(0, 0)) * kDegPerRad;
  }
  e.x = wrap_degrees(e.x);
  e.y = wrap_degrees(e.y);
  e.z = wrap_degrees(e.z);
  return e;
}

[[nodiscard]] inline EulerXYZ quat_to_euler(const Quat& q) {
  return matrix_to_euler(q.normalized().toRotationMatrix());
}

/// Geodesic angle between two orientations, radians.
[[nodiscard]] inline double geodesic_distance(const Quat& a, const Quat& b) {
  const double d = std::abs(a.normalized().dot(b.normalized()));
  return 2.0 * std::acos(std::min(1.0, d));
}

/// Rigid transform stored as rotation + translation (camera->world, etc.).
[[nodiscard]] inline Eigen::Matrix4d make_pose(const Eigen::Matrix3d& rotation, const Vec3& translation) {
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t.topLeftCorner<3, 3>() = rotation;
  t.topRightCorner<3, 1>() = translation;
  return t;
}

/// Camera-to-world pose for a z-forward, x-right, y-down camera at `eye` looking at `target`.
[[nodiscard]] inline Eigen::Matrix4d look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(world_up);
  if (right.norm() < 1e-9) right = forward.cross(Vec3::UnitY());
  right.normalize();
  const Vec3 down = forward.cross(right).normalized();
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return make_pose(r, eye);
}

}  // namespace peract

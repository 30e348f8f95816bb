#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "peract/geometry.hpp"
#include "peract/toyworld/palette.hpp"

namespace peract::toy {

enum class Shape { kBlock, kButton, kPad, kSlot };

[[nodiscard]] inline const char* shape_name(Shape s) {
  switch (s) {
    case Shape::kBlock: return "block";
    case Shape::kButton: return "button";
    case Shape::kPad: return "target-pad";
    case Shape::kSlot: return "slot";
  }
  return "?";
}

inline constexpr double kTableTop = 0.01;

/// Boxes are yawed about +z; buttons are vertical cylinders (size.x = diameter).
struct SceneObject {
  int id = 0;
  Shape shape = Shape::kBlock;
  std::string color;
  Vec3 center = Vec3::Zero();
  double yaw_deg = 0.0;
  Vec3 size = Vec3::Zero();  // full extents
  bool pressed = false;

  [[nodiscard]] bool is_cylinder() const { return shape == Shape::kButton; }
  [[nodiscard]] double top() const { return center.z() + 0.5 * size.z(); }
  [[nodiscard]] double bottom() const { return center.z() - 0.5 * size.z(); }

  /// Whether the vertical line through (x, y) passes through the object.
  [[nodiscard]] bool footprint_contains(double x, double y) const {
    const double dx = x - center.x(), dy = y - center.y();
    if (is_cylinder()) return dx * dx + dy * dy <= 0.25 * size.x() * size.x();
    const double c = std::cos(yaw_deg * kRadPerDeg), s = std::sin(yaw_deg * kRadPerDeg);
    const double lx = c * dx + s * dy, ly = -s * dx + c * dy;
    return std::abs(lx) <= 0.5 * size.x() && std::abs(ly) <= 0.5 * size.y();
  }

  /// Radius of a circle enclosing the footprint.
  [[nodiscard]] double footprint_radius() const {
    return is_cylinder() ? 0.5 * size.x() : 0.5 * std::hypot(size.x(), size.y());
  }
};

struct GripperState {
  Vec3 position = Vec3(0.0, 0.0, 0.45);
  Quat orientation = euler_to_quat({180.0, 0.0, 0.0});
  bool open = true;
  std::optional<int> held;  // object id
  Vec3 held_offset = Vec3::Zero();
  double held_yaw_offset = 0.0;
};

enum class TaskId { kPressButton, kStackBlock, kPutInSlot };

struct SceneState {
  TaskId task = TaskId::kPressButton;
  int variation = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> colors;  // palette this episode was drawn from
  std::vector<SceneObject> objects;
  GripperState gripper;
  int steps = 0;

  [[nodiscard]] SceneObject& object(int id) {
    for (auto& o : objects) {
      if (o.id == id) return o;
    }
    throw InvalidInput("scene: no object with id " + std::to_string(id));
  }
  [[nodiscard]] const SceneObject& object(int id) const { return const_cast<SceneState*>(this)->object(id); }
};

/// Gripper yaw in degrees, read from its orientation.
[[nodiscard]] inline double gripper_yaw_deg(const Quat& q) {
  const Eigen::Matrix3d r = q.toRotationMatrix();
  // Heading of the gripper's x axis projected onto the table plane.
  return wrap_degrees(std::atan2(r(1, 0), r(0, 0)) * kDegPerRad);
}

}  // namespace peract::toy

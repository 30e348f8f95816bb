#pragma once

// Toy tabletop tasks, teleport kinematics and the scripted expert.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "peract/action_codec.hpp"
#include "peract/demo_pipeline.hpp"
#include "peract/toyworld/render.hpp"
#include "peract/toyworld/scene.hpp"

namespace peract::toy {

[[nodiscard]] inline const char* task_name(TaskId t) {
  switch (t) {
    case TaskId::kPressButton: return "press_button";
    case TaskId::kStackBlock: return "stack_block";
    case TaskId::kPutInSlot: return "put_in_slot";
  }
  return "?";
}

[[nodiscard]] inline TaskId parse_task(const std::string& s) {
  if (s == "press_button") return TaskId::kPressButton;
  if (s == "stack_block") return TaskId::kStackBlock;
  if (s == "put_in_slot") return TaskId::kPutInSlot;
  throw InvalidInput("unknown task '" + s + "' (expected press_button, stack_block or put_in_slot)");
}

inline constexpr TaskId kAllTasks[] = {TaskId::kPressButton, TaskId::kStackBlock, TaskId::kPutInSlot};

struct EnvConfig {
  int grid_size = 32;
  double bin_deg = 5.0;
  int num_cameras = 2;
  int image_size = 80;
  std::vector<std::string> colors;  // empty = the full palette
  double grasp_radius_voxels = 1.5;
  double press_radius_voxels = 1.5;

  [[nodiscard]] WorkspaceBounds bounds() const {
    return WorkspaceBounds::cube(Vec3(-0.32, -0.32, 0.0), 0.64, grid_size);
  }
  [[nodiscard]] double grasp_radius() const { return grasp_radius_voxels * bounds().edge_length(); }
  [[nodiscard]] double press_radius() const { return press_radius_voxels * bounds().edge_length(); }
  [[nodiscard]] std::vector<std::string> palette() const { return colors.empty() ? all_color_names() : colors; }
  [[nodiscard]] std::vector<CameraSpec> cameras() const { return default_cameras(num_cameras, image_size); }

  void validate() const {
    bounds().validate();
    const auto p = palette();
    if (p.size() < 3) throw InvalidInput("toy world: at least three colours are required");
    for (const auto& c : p) (void)color_rgb(c);
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (std::size_t j = i + 1; j < p.size(); ++j) {
        if (p[i] == p[j]) throw InvalidInput("toy world: duplicate colour '" + p[i] + "'");
      }
    }
    if (num_cameras < 1 || image_size < 8) throw InvalidInput("toy world: need >= 1 camera and >= 8 px images");
  }
};

// ------------------------------------------------------------------ tasks

inline constexpr const char* kPadColor = "green";
inline constexpr const char* kSlotNames[] = {"left", "middle", "right"};

/// Colours a stack_block target or distractor block may take (the pad colour is excluded).
[[nodiscard]] inline std::vector<std::string> block_colors(const std::vector<std::string>& palette) {
  std::vector<std::string> out;
  for (const auto& c : palette) {
    if (c != kPadColor) out.push_back(c);
  }
  return out;
}

[[nodiscard]] inline int variation_count(TaskId task, const EnvConfig& cfg) {
  switch (task) {
    case TaskId::kPressButton: return static_cast<int>(cfg.palette().size());
    case TaskId::kStackBlock: return 2 * static_cast<int>(block_colors(cfg.palette()).size());
    case TaskId::kPutInSlot: return 3;
  }
  return 0;
}

inline void check_variation(TaskId task, int variation, const EnvConfig& cfg) {
  if (variation < 0 || variation >= variation_count(task, cfg)) {
    throw InvalidInput(std::string("variation ") + std::to_string(variation) + " is not valid for " + task_name(task));
  }
}

[[nodiscard]] inline std::string goal_for(TaskId task, int variation, const EnvConfig& cfg) {
  check_variation(task, variation, cfg);
  switch (task) {
    case TaskId::kPressButton: return "push the " + cfg.palette()[static_cast<std::size_t>(variation)] + " button";
    case TaskId::kStackBlock: {
      const int count = variation % 2 + 1;
      const std::string color = block_colors(cfg.palette())[static_cast<std::size_t>(variation / 2)];
      return "stack " + std::to_string(count) + " " + color + (count == 1 ? " block" : " blocks");
    }
    case TaskId::kPutInSlot: return std::string("put the block in the ") + kSlotNames[variation] + " slot";
  }
  return {};
}

/// Keyframes the scripted expert needs; used to normalize the timestep input.
[[nodiscard]] inline int nominal_waypoints(TaskId task, int variation) {
  switch (task) {
    case TaskId::kPressButton: return 2;
    case TaskId::kStackBlock: return 5 * (variation % 2 + 1);
    case TaskId::kPutInSlot: return 5;
  }
  return 1;
}

namespace detail {

struct Placer {
  std::mt19937_64& rng;
  std::vector<SceneObject>& objects;

  bool place(SceneObject o, double xlo, double xhi, double ylo, double yhi, double clearance = 0.02) {
    std::uniform_real_distribution<double> ux(xlo, xhi), uy(ylo, yhi);
    for (int attempt = 0; attempt < 100; ++attempt) {
      o.center.x() = ux(rng);
      o.center.y() = uy(rng);
      bool ok = true;
      for (const auto& other : objects) {
        const double d = std::hypot(o.center.x() - other.center.x(), o.center.y() - other.center.y());
        if (d < o.footprint_radius() + other.footprint_radius() + clearance) {
          ok = false;
          break;
        }
      }
      if (ok) {
        o.id = static_cast<int>(objects.size());
        objects.push_back(o);
        return true;
      }
    }
    return false;
  }
};

inline SceneObject make_button(const std::string& color) {
  SceneObject o;
  o.shape = Shape::kButton;
  o.color = color;
  o.size = Vec3(0.06, 0.06, 0.02);
  o.center.z() = kTableTop + 0.01;
  return o;
}

inline SceneObject make_block(const std::string& color, double yaw) {
  SceneObject o;
  o.shape = Shape::kBlock;
  o.color = color;
  o.size = Vec3::Constant(0.04);
  o.center.z() = kTableTop + 0.02;
  o.yaw_deg = yaw;
  return o;
}

inline bool layout(SceneState& s, std::mt19937_64& rng, const EnvConfig& cfg) {
  const auto palette = cfg.palette();
  Placer placer{rng, s.objects};
  std::uniform_real_distribution<double> yaw(0.0, 90.0);
  switch (s.task) {
    case TaskId::kPressButton: {
      const auto& target = palette[static_cast<std::size_t>(s.variation)];
      std::vector<std::string> others;
      for (const auto& c : palette) {
        if (c != target) others.push_back(c);
      }
      std::shuffle(others.begin(), others.end(), rng);
      std::vector<std::string> colors{target, others[0], others[1]};
      std::shuffle(colors.begin(), colors.end(), rng);
      for (const auto& c : colors) {
        if (!placer.place(make_button(c), -0.2, 0.2, -0.2, 0.2, 0.04)) return false;
      }
      return true;
    }
    case TaskId::kStackBlock: {
      const auto bcolors = block_colors(palette);
      const auto& target = bcolors[static_cast<std::size_t>(s.variation / 2)];
      const int count = s.variation % 2 + 1;
      SceneObject pad;
      pad.shape = Shape::kPad;
      pad.color = kPadColor;
      pad.size = Vec3(0.12, 0.12, 0.01);
      pad.center.z() = kTableTop + 0.005;
      if (!placer.place(pad, -0.15, 0.15, -0.15, 0.15)) return false;
      for (int i = 0; i < count; ++i) {
        if (!placer.place(make_block(target, yaw(rng)), -0.2, 0.2, -0.2, 0.2)) return false;
      }
      std::vector<std::string> others;
      for (const auto& c : bcolors) {
        if (c != target) others.push_back(c);
      }
      std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
      for (int i = 0; i < 2; ++i) {
        if (!placer.place(make_block(others[pick(rng)], yaw(rng)), -0.2, 0.2, -0.2, 0.2)) return false;
      }
      return true;
    }
    case TaskId::kPutInSlot: {
      std::uniform_real_distribution<double> jitter(-0.015, 0.015);
      std::uniform_real_distribution<double> sx(-0.2, -0.1);
      const double x = sx(rng);
      for (int i = 0; i < 3; ++i) {
        SceneObject slot;
        slot.shape = Shape::kSlot;
        slot.color = "slot";
        slot.size = Vec3(0.09, 0.09, 0.012);
        slot.center = Vec3(x + jitter(rng), (i - 1) * 0.17 + jitter(rng), kTableTop + 0.006);
        slot.id = static_cast<int>(s.objects.size());
        s.objects.push_back(slot);
      }
      std::uniform_int_distribution<std::size_t> pick(0, palette.size() - 1);
      return placer.place(make_block(palette[pick(rng)], yaw(rng)), 0.05, 0.2, -0.2, 0.2);
    }
  }
  return false;
}

}  // namespace detail

/// Seeded scene for (task, variation). A layout that cannot be completed in
/// 100 rejection samples per object is retried with a derived seed.
[[nodiscard]] inline SceneState reset_scene(TaskId task, int variation, std::uint64_t seed, const EnvConfig& cfg) {
  cfg.validate();
  check_variation(task, variation, cfg);
  for (std::uint64_t attempt = 0;; ++attempt) {
    SceneState s;
    s.task = task;
    s.variation = variation;
    s.seed = seed;
    s.colors = cfg.palette();
    std::mt19937_64 rng(seed ^ (attempt * 0x9e3779b97f4a7c15ULL));
    if (detail::layout(s, rng, cfg)) return s;
  }
}

[[nodiscard]] inline std::vector<const SceneObject*> slots_left_to_right(const SceneState& s) {
  std::vector<const SceneObject*> slots;
  for (const auto& o : s.objects) {
    if (o.shape == Shape::kSlot) slots.push_back(&o);
  }
  std::sort(slots.begin(), slots.end(), [](auto* a, auto* b) { return a->center.y() < b->center.y(); });
  return slots;
}

[[nodiscard]] inline bool task_success(const SceneState& s) {
  const auto held = [&](const SceneObject& o) { return s.gripper.held && *s.gripper.held == o.id; };
  switch (s.task) {
    case TaskId::kPressButton: {
      const auto& target = s.colors[static_cast<std::size_t>(s.variation)];
      bool ok = false;
      for (const auto& o : s.objects) {
        if (o.shape != Shape::kButton) continue;
        if (o.color == target) ok = o.pressed;
        else if (o.pressed) return false;
      }
      return ok;
    }
    case TaskId::kStackBlock: {
      const std::string target = block_colors(s.colors)[static_cast<std::size_t>(s.variation / 2)];
      const SceneObject* pad = nullptr;
      for (const auto& o : s.objects) {
        if (o.shape == Shape::kPad) pad = &o;
      }
      for (const auto& o : s.objects) {
        if (o.shape != Shape::kBlock) continue;
        const bool on_pad = !held(o) && pad->footprint_contains(o.center.x(), o.center.y()) &&
                            o.bottom() >= pad->top() - 1e-9;
        if (on_pad != (o.color == target)) return false;
      }
      return true;
    }
    case TaskId::kPutInSlot: {
      const auto slots = slots_left_to_right(s);
      const auto& slot = *slots[static_cast<std::size_t>(s.variation)];
      for (const auto& o : s.objects) {
        if (o.shape != Shape::kBlock) continue;
        return !held(o) && slot.footprint_contains(o.center.x(), o.center.y()) && o.bottom() >= slot.top() - 1e-9;
      }
      return false;
    }
  }
  return false;
}

// -------------------------------------------------------------- kinematics

/// Teleports the gripper (carrying any held object), then applies the
/// open/close transition at the new pose, then presses buttons.
inline void apply_pose(SceneState& s, const Vec3& position, const Quat& orientation, bool open, const EnvConfig& cfg) {
  auto& g = s.gripper;
  g.position = position;
  g.orientation = orientation.normalized();
  const double yaw = gripper_yaw_deg(g.orientation);
  const auto yaw_rot = [](double deg) { return Eigen::AngleAxisd(deg * kRadPerDeg, Vec3::UnitZ()).toRotationMatrix(); };
  if (g.held) {
    auto& o = s.object(*g.held);
    o.center = g.position + yaw_rot(yaw) * g.held_offset;
    o.yaw_deg = wrap_degrees(yaw + g.held_yaw_offset);
  }
  if (g.open && !open) {
    const SceneObject* best = nullptr;
    double best_d = cfg.grasp_radius();
    for (const auto& o : s.objects) {
      if (o.shape != Shape::kBlock) continue;
      const double d = (o.center - g.position).norm();
      if (d <= best_d) {
        best_d = d;
        best = &o;
      }
    }
    if (best) {
      g.held = best->id;
      g.held_offset = yaw_rot(-yaw) * (best->center - g.position);
      g.held_yaw_offset = best->yaw_deg - yaw;
    }
  } else if (!g.open && open && g.held) {
    auto& o = s.object(*g.held);
    g.held.reset();
    // Settle onto the highest surface below the object's centre.
    double support = kTableTop;
    for (const auto& other : s.objects) {
      if (other.id == o.id || other.shape == Shape::kButton) continue;
      if (other.top() <= o.center.z() && other.footprint_contains(o.center.x(), o.center.y())) {
        support = std::max(support, other.top());
      }
    }
    o.center.z() = support + 0.5 * o.size.z();
  }
  g.open = open;
  if (!g.open) {
    for (auto& o : s.objects) {
      if (o.shape != Shape::kButton || o.pressed) continue;
      const Vec3 top(o.center.x(), o.center.y(), o.top());
      if ((top - g.position).norm() <= cfg.press_radius()) {
        o.pressed = true;
        o.size.z() = 0.01;
        o.center.z() = kTableTop + 0.005;
      }
    }
  }
}

[[nodiscard]] inline std::array<double, 2> finger_positions(const SceneState& s) {
  if (s.gripper.open) return {0.04, 0.04};
  if (s.gripper.held) return {0.02, 0.02};
  return {0.0, 0.0};
}

[[nodiscard]] inline Proprio observe_proprio(const SceneState& s) {
  const auto f = finger_positions(s);
  const double t = std::min(1.0, static_cast<double>(s.steps) / nominal_waypoints(s.task, s.variation));
  return {s.gripper.open ? 1.0f : 0.0f, static_cast<float>(f[0]), static_cast<float>(f[1]), static_cast<float>(t)};
}

enum class Termination { kRunning, kSuccess, kStepLimit, kInvalidAction };

[[nodiscard]] inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::kRunning: return "running";
    case Termination::kSuccess: return "success";
    case Termination::kStepLimit: return "step-limit";
    case Termination::kInvalidAction: return "invalid-action";
  }
  return "?";
}

/// One discrete action through teleport kinematics. Returns kSuccess once the
/// task predicate holds, kInvalidAction for undecodable actions.
inline Termination step(SceneState& s, const DiscreteAction& action, const EnvConfig& cfg) {
  const auto bounds = cfg.bounds();
  if (!is_valid(action, bounds, cfg.bin_deg)) return Termination::kInvalidAction;
  const auto pose = undiscretize(action, bounds, cfg.bin_deg);
  apply_pose(s, pose.position, pose.orientation, pose.open, cfg);
  ++s.steps;
  return task_success(s) ? Termination::kSuccess : Termination::kRunning;
}

// ------------------------------------------------------------------ expert

struct Waypoint {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  bool open = true;
  bool collide = false;
};

[[nodiscard]] inline Quat gripper_down(double yaw_deg) { return euler_to_quat({180.0, 0.0, wrap_degrees(yaw_deg)}); }

[[nodiscard]] inline std::vector<Waypoint> expert_waypoints(const SceneState& s) {
  std::vector<Waypoint> w;
  const auto pick_place = [&](const SceneObject& block, const Vec3& place) {
    const Quat q = gripper_down(std::fmod(block.yaw_deg, 90.0));
    w.push_back({block.center + Vec3(0, 0, 0.08), q, true, false});
    w.push_back({block.center, q, false, true});
    w.push_back({block.center + Vec3(0, 0, 0.1), q, false, false});
    w.push_back({place + Vec3(0, 0, 0.08), q, false, false});
    w.push_back({place, q, true, true});
  };
  switch (s.task) {
    case TaskId::kPressButton: {
      const auto& target = s.colors[static_cast<std::size_t>(s.variation)];
      for (const auto& o : s.objects) {
        if (o.shape == Shape::kButton && o.color == target) {
          const Vec3 top(o.center.x(), o.center.y(), o.top());
          w.push_back({top + Vec3(0, 0, 0.08), gripper_down(0.0), false, false});
          w.push_back({top, gripper_down(0.0), false, true});
        }
      }
      break;
    }
    case TaskId::kStackBlock: {
      const std::string target = block_colors(s.colors)[static_cast<std::size_t>(s.variation / 2)];
      const SceneObject* pad = nullptr;
      for (const auto& o : s.objects) {
        if (o.shape == Shape::kPad) pad = &o;
      }
      int level = 0;
      for (const auto& o : s.objects) {
        if (o.shape != Shape::kBlock || o.color != target) continue;
        pick_place(o, Vec3(pad->center.x(), pad->center.y(), pad->top() + 0.02 + 0.04 * level++));
      }
      break;
    }
    case TaskId::kPutInSlot: {
      const auto& slot = *slots_left_to_right(s)[static_cast<std::size_t>(s.variation)];
      for (const auto& o : s.objects) {
        if (o.shape == Shape::kBlock) pick_place(o, Vec3(slot.center.x(), slot.center.y(), slot.top() + 0.02));
      }
      break;
    }
  }
  return w;
}

inline constexpr int kInteriorFrames = 2;
inline constexpr int kJointCount = 7;

/// Dense demonstration: two interior frames per waypoint segment with a
/// sin-shaped joint-velocity profile, then the arrival frame at rest. The
/// gripper state switches on the arrival frame.
[[nodiscard]] inline DemoEpisode scripted_expert(SceneState s, const EnvConfig& cfg) {
  const auto cams = cfg.cameras();
  DemoEpisode ep;
  ep.language_goal = goal_for(s.task, s.variation, cfg);
  ep.task_id = task_name(s.task);
  ep.variation_id = s.variation;
  const Eigen::VectorXd direction = Eigen::VectorXd::LinSpaced(kJointCount, 1.0, -0.5);
  const auto record = [&](double speed, bool collide) {
    DemoFrame f;
    f.views = render_all(s, cams);
    f.gripper_position = s.gripper.position;
    f.gripper_orientation = s.gripper.orientation;
    f.gripper_open = s.gripper.open;
    f.finger_positions = finger_positions(s);
    f.joint_velocities = speed * direction;
    f.timestep = static_cast<std::int64_t>(ep.frames.size());
    ep.frames.push_back(std::move(f));
    ep.collide_flags.push_back(collide);
  };
  record(0.0, false);
  for (const auto& wp : expert_waypoints(s)) {
    const Vec3 p0 = s.gripper.position;
    const Quat q0 = s.gripper.orientation;
    for (int k = 1; k <= kInteriorFrames; ++k) {
      const double u = static_cast<double>(k) / (kInteriorFrames + 1);
      apply_pose(s, p0 + u * (wp.position - p0), q0.slerp(u, wp.orientation), s.gripper.open, cfg);
      record(std::sin(std::numbers::pi * u), wp.collide);
    }
    apply_pose(s, wp.position, wp.orientation, wp.open, cfg);
    record(0.0, wp.collide);
  }
  return ep;
}

}  // namespace peract::toy

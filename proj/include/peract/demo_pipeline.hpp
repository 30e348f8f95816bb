#pragma once

// Demonstrations -> keyframes -> (observation, goal, next-keyframe action) tuples.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peract/action_codec.hpp"
#include "peract/errors.hpp"
#include "peract/geometry.hpp"
#include "peract/voxelizer.hpp"

namespace peract {

inline constexpr double kDefaultVelocityEpsilon = 0.1;  // rad/s

struct DemoFrame {
  std::vector<CameraView> views;
  Vec3 gripper_position = Vec3::Zero();
  Quat gripper_orientation = Quat::Identity();
  bool gripper_open = true;
  std::array<double, 2> finger_positions{0.0, 0.0};  // left, right (metres)
  Eigen::VectorXd joint_velocities;                  // rad/s
  std::int64_t timestep = 0;
};

struct DemoEpisode {
  std::vector<DemoFrame> frames;
  std::string language_goal;
  std::string task_id;
  int variation_id = 0;
  // collide_flags[i]: collision mode of the motion that arrives at frame i.
  std::vector<bool> collide_flags;

  [[nodiscard]] std::size_t size() const { return frames.size(); }

  void validate() const {
    if (frames.size() < 2) throw InvalidInput("episode: at least two frames are required");
    if (language_goal.empty()) throw InvalidInput("episode: language goal must be non-empty");
    if (collide_flags.size() != frames.size()) throw InvalidInput("episode: one collide flag per frame is required");
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto& f = frames[i];
      if (std::abs(f.gripper_orientation.norm() - 1.0) > 1e-6) {
        throw InvalidInput("episode: gripper quaternion is not normalized");
      }
      if (i > 0 && f.timestep <= frames[i - 1].timestep) {
        throw InvalidInput("episode: timesteps must be strictly increasing");
      }
    }
  }
};

/// Frame i >= 1 is a keyframe when the arm is at rest with an unchanged gripper,
/// or when the gripper state changes. Frame 0 (the initial observation) is never
/// a keyframe. The final frame is always appended, and consecutive keyframes
/// with the same pose (1e-6) and open bit collapse to the first.
[[nodiscard]] inline std::vector<std::size_t> extract_keyframes(const DemoEpisode& episode,
                                                                double vel_epsilon = kDefaultVelocityEpsilon) {
  if (episode.frames.size() < 2) throw InvalidInput("extract_keyframes: single-frame episode");
  const auto& frames = episode.frames;
  std::vector<std::size_t> raw;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const bool changed = frames[i].gripper_open != frames[i - 1].gripper_open;
    const double vmax = frames[i].joint_velocities.size() ? frames[i].joint_velocities.cwiseAbs().maxCoeff() : 0.0;
    if (changed || vmax < vel_epsilon) raw.push_back(i);
  }
  if (raw.empty() || raw.back() != frames.size() - 1) raw.push_back(frames.size() - 1);

  std::vector<std::size_t> keyframes;
  for (std::size_t k : raw) {
    if (!keyframes.empty()) {
      const auto& prev = frames[keyframes.back()];
      const auto& cur = frames[k];
      const bool same_pose = (prev.gripper_position - cur.gripper_position).cwiseAbs().maxCoeff() <= 1e-6 &&
                             geodesic_distance(prev.gripper_orientation, cur.gripper_orientation) <= 1e-6;
      if (same_pose && prev.gripper_open == cur.gripper_open) continue;
    }
    keyframes.push_back(k);
  }
  return keyframes;
}

struct CodecConfig {
  WorkspaceBounds bounds;
  double bin_deg = 5.0;
};

[[nodiscard]] inline ContinuousAction frame_action(const DemoEpisode& episode, std::size_t index) {
  const auto& f = episode.frames[index];
  return {f.gripper_position, f.gripper_orientation, f.gripper_open, static_cast<bool>(episode.collide_flags[index])};
}

/// gripper open, left finger, right finger, normalized timestep.
using Proprio = std::array<float, 4>;

[[nodiscard]] inline Proprio frame_proprio(const DemoFrame& f, double normalized_time) {
  return {f.gripper_open ? 1.0f : 0.0f, static_cast<float>(f.finger_positions[0]),
          static_cast<float>(f.finger_positions[1]), static_cast<float>(normalized_time)};
}

/// Everything needed to build one training tuple, minus the fused grid.
struct TupleSpec {
  std::size_t frame = 0;
  std::size_t keyframe = 0;
  Proprio proprio{};
  ContinuousAction target_pose;
  DiscreteAction target;
};

struct TrainingTuple {
  VoxelGrid voxel_obs;
  Proprio proprio{};
  std::string language_goal;
  DiscreteAction target;
  std::string task_id;
  // Retained for re-voxelization under augmentation.
  std::vector<ColoredPoint> raw_points;
  ContinuousAction target_pose;
};

[[nodiscard]] inline std::vector<TupleSpec> make_tuple_specs(const DemoEpisode& episode,
                                                             std::span<const std::size_t> keyframes,
                                                             const CodecConfig& codec) {
  if (keyframes.empty()) throw InvalidInput("make_training_tuples: keyframe list is empty");
  if (episode.collide_flags.size() != episode.frames.size()) {
    throw InvalidInput("make_training_tuples: one collide flag per frame is required");
  }
  for (std::size_t i = 0; i < keyframes.size(); ++i) {
    if (keyframes[i] >= episode.frames.size()) {
      throw InvalidInput("make_training_tuples: keyframe index is not a frame of the episode");
    }
    if (i > 0 && keyframes[i] <= keyframes[i - 1]) throw InvalidInput("make_training_tuples: keyframes must be sorted");
  }
  const double denom = static_cast<double>(episode.frames.size() - 1);
  std::vector<TupleSpec> specs;
  std::size_t next = 0;
  for (std::size_t t = 0; t < keyframes.back(); ++t) {
    while (keyframes[next] <= t) ++next;
    TupleSpec s;
    s.frame = t;
    s.keyframe = keyframes[next];
    s.proprio = frame_proprio(episode.frames[t], denom > 0 ? static_cast<double>(t) / denom : 0.0);
    s.target_pose = frame_action(episode, s.keyframe);
    s.target = discretize(s.target_pose, codec.bounds, codec.bin_deg);
    specs.push_back(s);
  }
  return specs;
}

[[nodiscard]] inline TrainingTuple materialize_tuple(const DemoEpisode& episode, const TupleSpec& spec,
                                                     const CodecConfig& codec) {
  TrainingTuple tuple;
  tuple.raw_points = collect_points(episode.frames[spec.frame].views);
  tuple.voxel_obs = fuse_points(tuple.raw_points, codec.bounds);
  tuple.proprio = spec.proprio;
  tuple.language_goal = episode.language_goal;
  tuple.target = spec.target;
  tuple.task_id = episode.task_id;
  tuple.target_pose = spec.target_pose;
  return tuple;
}

/// One tuple per frame before the last keyframe, paired with the next keyframe's action.
[[nodiscard]] inline std::vector<TrainingTuple> make_training_tuples(const DemoEpisode& episode,
                                                                     std::span<const std::size_t> keyframes,
                                                                     const CodecConfig& codec) {
  std::vector<TrainingTuple> tuples;
  for (const auto& spec : make_tuple_specs(episode, keyframes, codec)) {
    tuples.push_back(materialize_tuple(episode, spec, codec));
  }
  return tuples;
}

}  // namespace peract

#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. Deliberately slow and literal.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "peract/demo_pipeline.hpp"
#include "peract/geometry.hpp"
#include "peract/loss.hpp"
#include "peract/policy.hpp"
#include "peract/voxelizer.hpp"

namespace peract::oracle {

/// Frame-by-frame keyframe predicate, written out without any shared helpers.
inline std::vector<std::size_t> brute_force_keyframes(const DemoEpisode& ep, double eps) {
  std::vector<std::size_t> out;
  const std::size_t n = ep.frames.size();
  for (std::size_t i = 1; i < n; ++i) {
    bool key = ep.frames[i].gripper_open != ep.frames[i - 1].gripper_open;
    double vmax = 0.0;
    for (Eigen::Index j = 0; j < ep.frames[i].joint_velocities.size(); ++j) {
      vmax = std::max(vmax, std::abs(ep.frames[i].joint_velocities[j]));
    }
    if (vmax < eps) key = true;
    if (i == n - 1) key = true;
    if (!key) continue;
    if (!out.empty()) {
      const auto& a = ep.frames[out.back()];
      const auto& b = ep.frames[i];
      bool same = a.gripper_open == b.gripper_open;
      for (int k = 0; k < 3; ++k) same = same && std::abs(a.gripper_position[k] - b.gripper_position[k]) <= 1e-6;
      same = same && geodesic_distance(a.gripper_orientation, b.gripper_orientation) <= 1e-6;
      if (same) continue;
    }
    out.push_back(i);
  }
  return out;
}

/// Synthetic pose/velocity stream with no camera views: runs of motion and
/// rest, random gripper toggles and repeated poses so collapsing is exercised.
inline DemoEpisode random_episode(std::mt19937_64& rng, double eps = kDefaultVelocityEpsilon) {
  std::uniform_int_distribution<int> len(2, 40), run(1, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DemoEpisode ep;
  ep.language_goal = "synthetic";
  ep.task_id = "synthetic";
  const int n = len(rng);
  Vec3 pos(0.1, 0.0, 0.3);
  Quat rot = Quat::Identity();
  bool open = true;
  bool moving = u(rng) < 0.5;
  int left = run(rng);
  for (int i = 0; i < n; ++i) {
    if (--left <= 0) {
      moving = !moving;
      left = run(rng);
    }
    DemoFrame f;
    f.timestep = i;
    if (u(rng) < 0.15) open = !open;
    f.joint_velocities.resize(7);
    for (Eigen::Index j = 0; j < 7; ++j) {
      // Stopped frames sit strictly below eps; moving frames have one joint above it.
      f.joint_velocities[j] = (u(rng) * 2 - 1) * (moving ? 1.0 : 0.9 * eps);
    }
    if (moving) {
      f.joint_velocities[0] = eps + u(rng);
      if (u(rng) < 0.8) pos += Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5) * 0.02;
      if (u(rng) < 0.3) rot = (rot * Quat(Eigen::AngleAxisd(u(rng), Vec3::UnitZ()))).normalized();
    }
    f.gripper_position = pos;
    f.gripper_orientation = rot;
    f.gripper_open = open;
    ep.frames.push_back(f);
    ep.collide_flags.push_back(u(rng) < 0.5);
  }
  return ep;
}

/// Random occupied grid: `count` uniformly placed coloured points.
inline VoxelGrid random_grid(const WorkspaceBounds& bounds, int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> c(0, 255);
  std::vector<ColoredPoint> pts;
  for (int i = 0; i < count; ++i) {
    ColoredPoint p;
    for (int a = 0; a < 3; ++a) {
      p.position[a] = static_cast<float>(bounds.min_corner[a] + u(rng) * (bounds.max_corner[a] - bounds.min_corner[a]));
    }
    p.rgb = {static_cast<std::uint8_t>(c(rng)), static_cast<std::uint8_t>(c(rng)), static_cast<std::uint8_t>(c(rng))};
    pts.push_back(p);
  }
  return fuse_points(pts, bounds);
}

/// The configuration used for the double-precision gradient check.
inline PolicyConfig tiny_config() {
  PolicyConfig c;
  c.grid_size = 8;
  c.patch_size = 4;
  c.num_latents = 4;
  c.latent_dim = 8;
  c.num_self_attn_layers = 1;
  c.voxel_feature_dim = 4;
  c.embed_dim = 8;
  c.num_lang_tokens = 3;
  c.lang_feature_dim = 8;
  c.num_attention_heads = 2;
  c.num_cross_heads = 1;
  c.cross_head_dim = 8;
  c.ff_mult = 2;
  c.init_seed = 7;
  return c;
}

struct GroupError {
  std::string name;
  double relative = 0.0;
  std::int64_t size = 0;
};

/// Central differences of the summed loss for every parameter element,
/// compared tensor-by-tensor as ||g_a - g_fd|| / max(||g_a|| + ||g_fd||, 1e-12).
inline std::vector<GroupError> gradient_check(PerceiverPolicy<double>& policy, const VoxelGrid& grid,
                                              const Proprio& proprio, const LanguageEncoding& lang,
                                              const DiscreteAction& target, double h = 1e-5) {
  using M = nn::Mat<double>;
  policy.zero_grad();
  typename PerceiverPolicy<double>::ForwardCache cache;
  const auto q = policy.forward(grid, proprio, lang, &cache);
  QPrediction<double> dq;
  (void)policy_loss(q, target, 1.0, &dq);
  policy.backward(cache, dq);

  const auto loss_at = [&]() { return policy_loss(policy.forward(grid, proprio, lang), target).total(); };

  std::vector<GroupError> out;
  policy.visit_parameters([&](const std::string& name, M& value, M& grad) {
    M fd(value.rows(), value.cols());
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double orig = value.data()[i];
      value.data()[i] = orig + h;
      const double lp = loss_at();
      value.data()[i] = orig - h;
      const double lm = loss_at();
      value.data()[i] = orig;
      fd.data()[i] = (lp - lm) / (2 * h);
    }
    const double denom = std::max(grad.norm() + fd.norm(), 1e-12);
    out.push_back({name, (grad - fd).norm() / denom, value.size()});
  });
  return out;
}

}  // namespace peract::oracle

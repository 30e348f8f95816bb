#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>

#include "peract/dataset_io.hpp"
#include "peract/demo_pipeline.hpp"
#include "peract/toyworld/world.hpp"
#include "support/oracles.hpp"

using namespace peract;

namespace {

// n frames; velocities from `speed(i)`, gripper from `open(i)`, position
// advancing only while moving so rest frames are distinct poses.
template <typename Speed, typename Open>
DemoEpisode scripted(int n, Speed speed, Open open) {
  DemoEpisode ep;
  ep.language_goal = "test";
  ep.task_id = "test";
  Vec3 p = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    DemoFrame f;
    f.timestep = i;
    f.joint_velocities = Eigen::VectorXd::Constant(7, speed(i));
    p.x() += 0.01;
    f.gripper_position = p;
    f.gripper_open = open(i);
    ep.frames.push_back(f);
    ep.collide_flags.push_back(false);
  }
  return ep;
}

CameraView random_view(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CameraView v;
  v.height = 3;
  v.width = 5;
  for (int i = 0; i < 15; ++i) {
    v.depth.push_back(static_cast<float>(u(rng)));
    for (int c = 0; c < 3; ++c) v.rgb.push_back(static_cast<std::uint8_t>(u(rng) * 255));
  }
  v.intrinsics << 4 + u(rng), 0, 2, 0, 4 + u(rng), 1, 0, 0, 1;
  v.extrinsics.topRightCorner<3, 1>() = Vec3(u(rng), u(rng), u(rng));
  return v;
}

}  // namespace

TEST(Keyframes, StopsAndGripperToggle) {
  // move 0-2, stop 3, move 4-6 (gripper toggles at 7, still moving), stop 8, move 9-10
  const auto ep = scripted(
      11, [](int i) { return (i == 3 || i == 8) ? 0.0 : 0.5; }, [](int i) { return i < 7; });
  EXPECT_EQ(extract_keyframes(ep), (std::vector<std::size_t>{3, 7, 8, 10}));
  EXPECT_EQ(extract_keyframes(ep), oracle::brute_force_keyframes(ep, 0.1));
}

TEST(Keyframes, ConstantMotionGivesOnlyTheLastFrame) {
  const auto ep = scripted(9, [](int) { return 0.7; }, [](int) { return true; });
  EXPECT_EQ(extract_keyframes(ep), (std::vector<std::size_t>{8}));
}

TEST(Keyframes, MatchesBruteForceOnRandomEpisodes) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 300; ++i) {
    const auto ep = oracle::random_episode(rng);
    ASSERT_EQ(extract_keyframes(ep), oracle::brute_force_keyframes(ep, kDefaultVelocityEpsilon)) << "episode " << i;
  }
}

TEST(Keyframes, ToyExpertCountsAreRealistic) {
  toy::EnvConfig env;
  for (toy::TaskId t : toy::kAllTasks) {
    for (int v = 0; v < 3; ++v) {
      const auto ep = toy::scripted_expert(toy::reset_scene(t, v % toy::variation_count(t, env), 40 + v, env), env);
      const auto n = extract_keyframes(ep).size();
      EXPECT_GE(n, 2u);
      EXPECT_LE(n, 17u);
    }
  }
}

TEST(Tuples, PairEachFrameWithTheNextKeyframe) {
  const auto ep = scripted(10, [](int) { return 0.5; }, [](int) { return true; });
  const CodecConfig codec{WorkspaceBounds::cube(Vec3(-0.5, -0.5, -0.5), 2.0, 20), 5.0};
  const std::vector<std::size_t> kf{4, 9};
  const auto specs = make_tuple_specs(ep, kf, codec);
  ASSERT_EQ(specs.size(), 9u);
  for (std::size_t t = 0; t < 9; ++t) {
    EXPECT_EQ(specs[t].frame, t);
    EXPECT_EQ(specs[t].keyframe, t < 4 ? 4u : 9u);
    EXPECT_FLOAT_EQ(specs[t].proprio[3], static_cast<float>(t) / 9.0f);
  }
  const std::vector<std::size_t> last{9};
  for (const auto& s : make_tuple_specs(ep, last, codec)) EXPECT_EQ(s.keyframe, 9u);
  const std::vector<std::size_t> unsorted{9, 4};
  EXPECT_THROW((void)make_tuple_specs(ep, unsorted, codec), InvalidInput);
}

TEST(Tuples, TargetsDecodeNearTheKeyframePose) {
  toy::EnvConfig env;
  const CodecConfig codec{env.bounds(), env.bin_deg};
  for (toy::TaskId t : toy::kAllTasks) {
    const auto ep = toy::scripted_expert(toy::reset_scene(t, 0, 3, env), env);
    for (const auto& s : make_tuple_specs(ep, extract_keyframes(ep), codec)) {
      const auto back = undiscretize(s.target, codec.bounds, codec.bin_deg);
      EXPECT_LE((back.position - s.target_pose.position).cwiseAbs().maxCoeff(), 0.5 * codec.bounds.edge_length() + 1e-12);
      const auto e0 = quat_to_euler(s.target_pose.orientation);
      const auto e1 = quat_to_euler(back.orientation);
      for (int a = 0; a < 3; ++a) EXPECT_LE(angular_distance_deg(e0[a], e1[a]), 2.5 + 1e-6);
    }
  }
}

TEST(DatasetIo, RoundTripIsExact) {
  std::mt19937_64 rng(4);
  std::vector<DemoEpisode> eps;
  for (int e = 0; e < 3; ++e) {
    auto ep = oracle::random_episode(rng);
    ep.language_goal = "goal " + std::to_string(e);
    ep.variation_id = e;
    for (auto& f : ep.frames) {
      f.views = {random_view(rng), random_view(rng)};
      f.finger_positions = {0.01 * e, 0.02};
    }
    eps.push_back(ep);
  }
  const auto root = std::filesystem::temp_directory_path() / "peract_dataset_rt";
  std::filesystem::remove_all(root);
  save_dataset(eps, root);
  const auto back = load_dataset(root);
  ASSERT_EQ(back.size(), eps.size());
  for (std::size_t e = 0; e < eps.size(); ++e) {
    const auto &a = eps[e], &b = back[e];
    EXPECT_EQ(a.language_goal, b.language_goal);
    EXPECT_EQ(a.task_id, b.task_id);
    EXPECT_EQ(a.variation_id, b.variation_id);
    EXPECT_EQ(a.collide_flags, b.collide_flags);
    ASSERT_EQ(a.frames.size(), b.frames.size());
    for (std::size_t i = 0; i < a.frames.size(); ++i) {
      const auto &fa = a.frames[i], &fb = b.frames[i];
      EXPECT_EQ(fa.timestep, fb.timestep);
      EXPECT_EQ(fa.gripper_position, fb.gripper_position);
      EXPECT_EQ(fa.gripper_orientation.coeffs(), fb.gripper_orientation.coeffs());
      EXPECT_EQ(fa.gripper_open, fb.gripper_open);
      EXPECT_EQ(fa.finger_positions, fb.finger_positions);
      EXPECT_EQ(fa.joint_velocities, fb.joint_velocities);
      ASSERT_EQ(fa.views.size(), fb.views.size());
      for (std::size_t v = 0; v < fa.views.size(); ++v) {
        EXPECT_EQ(fa.views[v].rgb, fb.views[v].rgb);
        EXPECT_EQ(fa.views[v].depth, fb.views[v].depth);
        EXPECT_EQ(fa.views[v].intrinsics, fb.views[v].intrinsics);
        EXPECT_EQ(fa.views[v].extrinsics, fb.views[v].extrinsics);
      }
    }
  }
  std::filesystem::remove_all(root);
}

TEST(DatasetIo, VersionAndCorruptionAreReported) {
  std::mt19937_64 rng(6);
  std::vector<DemoEpisode> eps{oracle::random_episode(rng)};
  const auto root = std::filesystem::temp_directory_path() / "peract_dataset_bad";
  std::filesystem::remove_all(root);
  save_dataset(eps, root);
  {
    auto j = detail::read_json(root / "manifest.json");
    j["version"] = kDatasetVersion + 1;
    detail::write_json(root / "manifest.json", j);
  }
  EXPECT_THROW((void)load_dataset(root), IncompatibleVersion);
  std::filesystem::remove_all(root);
  save_dataset(eps, root);
  {
    std::ofstream f(root / "episode_00000" / "frame_00000.bin", std::ios::binary | std::ios::trunc);
    f << "PAFRxx";
  }
  EXPECT_THROW((void)load_dataset(root), CorruptData);
  std::filesystem::remove_all(root);
}

TEST(DatasetIo, FiftyThreeDemosLoadQuickly) {
  toy::EnvConfig env;
  std::vector<DemoEpisode> eps;
  for (int e = 0; e < 53; ++e) {
    const auto t = toy::kAllTasks[e % 3];
    eps.push_back(toy::scripted_expert(toy::reset_scene(t, 0, 500 + e, env), env));
  }
  const auto root = std::filesystem::temp_directory_path() / "peract_dataset_53";
  std::filesystem::remove_all(root);
  save_dataset(eps, root);
  const auto start = std::chrono::steady_clock::now();
  const auto back = load_dataset(root);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(back.size(), 53u);
  EXPECT_LT(secs, 10.0);
  std::filesystem::remove_all(root);
}

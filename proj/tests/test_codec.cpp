#include <gtest/gtest.h>

#include <random>

#include "peract/action_codec.hpp"

using namespace peract;

namespace {
const WorkspaceBounds kUnit = WorkspaceBounds::cube(Vec3::Zero(), 1.0, 100);
}

TEST(Codec, BinCounts) {
  EXPECT_EQ(rotation_bin_count(5.0), 72);
  EXPECT_EQ(3 * rotation_bin_count(5.0), 216);
  EXPECT_THROW((void)rotation_bin_count(7.0), InvalidInput);
  EXPECT_THROW((void)rotation_bin_count(0.0), InvalidInput);
}

TEST(Codec, DiscretizeExamples) {
  ContinuousAction a;
  a.position = Vec3(0.5, 0.5, 0.5);
  auto d = discretize(a, kUnit, 5.0);
  EXPECT_EQ(d.rot_indices, (std::array<int, 3>{0, 0, 0}));
  a.orientation = euler_to_quat({7.0, 0.0, 359.0});
  d = discretize(a, kUnit, 5.0);
  EXPECT_EQ(d.rot_indices, (std::array<int, 3>{1, 0, 71}));
  a.position = Vec3(1.0, 0.5, 0.5);
  EXPECT_THROW((void)discretize(a, kUnit, 5.0), OutOfBounds);
}

TEST(Codec, UndiscretizeExamples) {
  DiscreteAction d;
  d.trans_index = {0, 0, 0};
  d.rot_indices = {1, 0, 0};
  const auto a = undiscretize(d, kUnit, 5.0);
  EXPECT_NEAR((a.position - Vec3::Constant(0.005)).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR(quat_to_euler(a.orientation).x, 7.5, 1e-9);
}

TEST(Codec, RoundTripWithinHalfABin) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  for (int i = 0; i < 10000; ++i) {
    ContinuousAction a;
    a.position = Vec3(u(rng), u(rng), u(rng)) * 0.999999;
    a.orientation = Quat(g(rng), g(rng), g(rng), g(rng)).normalized();
    a.open = u(rng) < 0.5;
    a.collide = u(rng) < 0.5;
    const auto d = discretize(a, kUnit, 5.0);
    ASSERT_TRUE(is_valid(d, kUnit, 5.0));
    const auto back = undiscretize(d, kUnit, 5.0);
    ASSERT_LE((back.position - a.position).cwiseAbs().maxCoeff(), 0.5 * kUnit.edge_length() + 1e-12);
    const auto e = quat_to_euler(a.orientation);
    for (int k = 0; k < 3; ++k) {
      ASSERT_LE(angular_distance_deg(e[k], bin_center_deg(d.rot_indices[static_cast<std::size_t>(k)], 5.0)), 2.5 + 1e-9);
    }
    EXPECT_EQ(back.open, a.open);
    EXPECT_EQ(back.collide, a.collide);
  }
}

TEST(Codec, CanonicalPitchBinsRoundTrip) {
  for (int b = 0; b < 72; ++b) {
    DiscreteAction d;
    d.trans_index = {3, 4, 5};
    d.rot_indices = {10, b, 40};
    if (!is_canonical_pitch_bin(b, 5.0)) continue;
    EXPECT_EQ(discretize(undiscretize(d, kUnit, 5.0), kUnit, 5.0), d) << "pitch bin " << b;
  }
}

TEST(Codec, OneHotLabels) {
  DiscreteAction d;
  d.trans_index = {99, 0, 42};
  d.rot_indices = {0, 71, 36};
  d.open = false;
  d.collide = true;
  const auto y = encode_labels(d, {100, 100, 100}, 72);
  EXPECT_EQ(y.y_trans.size(), 1000000);
  EXPECT_EQ(y.y_trans.sum(), 1.0f);
  EXPECT_EQ(y.y_trans[(99 * 100 + 0) * 100 + 42], 1.0f);
  EXPECT_EQ(y.y_rot.rows(), 72);
  EXPECT_EQ(y.y_rot.cols(), 3);
  for (int a = 0; a < 3; ++a) EXPECT_EQ(y.y_rot.col(a).sum(), 1.0f);
  EXPECT_EQ(y.y_open.sum(), 1.0f);
  EXPECT_EQ(y.y_open[0], 1.0f);
  EXPECT_EQ(y.y_collide[1], 1.0f);
  d.rot_indices[0] = 72;
  EXPECT_THROW((void)encode_labels(d, {100, 100, 100}, 72), InvalidInput);
}

TEST(Codec, SelectBestAction) {
  QPrediction<float> q;
  q.grid = {8, 8, 8};
  q.q_trans = Eigen::VectorXf::Zero(512);
  q.q_trans[(3 * 8 + 4) * 8 + 5] = 5.0f;
  q.q_rot = Eigen::MatrixXf::Zero(72, 3);
  const auto d = select_best_action(q);
  EXPECT_EQ(d.trans_index, (VoxelIndex{3, 4, 5}));
  EXPECT_FALSE(d.open);
  EXPECT_FALSE(d.collide);

  std::mt19937_64 rng(8);
  std::normal_distribution<float> n;
  for (int t = 0; t < 50; ++t) {
    for (auto& v : q.q_trans) v = n(rng);
    for (Eigen::Index i = 0; i < q.q_rot.size(); ++i) q.q_rot.data()[i] = n(rng);
    q.q_open << n(rng), n(rng);
    q.q_collide << n(rng), n(rng);
    const auto got = select_best_action(q);
    int best = 0;
    for (int i = 0; i < 512; ++i) best = q.q_trans[i] > q.q_trans[best] ? i : best;
    EXPECT_EQ(got.trans_index, (VoxelIndex{best / 64, (best / 8) % 8, best % 8}));
    for (int a = 0; a < 3; ++a) {
      int r = 0;
      for (int i = 0; i < 72; ++i) r = q.q_rot(i, a) > q.q_rot(r, a) ? i : r;
      EXPECT_EQ(got.rot_indices[static_cast<std::size_t>(a)], r);
    }
    EXPECT_EQ(got.open, q.q_open[1] > q.q_open[0]);
    EXPECT_EQ(got.collide, q.q_collide[1] > q.q_collide[0]);
  }
  q.q_trans[0] = std::numeric_limits<float>::infinity();
  EXPECT_THROW((void)select_best_action(q), InvalidInput);
}

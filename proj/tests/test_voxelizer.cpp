#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "peract/voxelizer.hpp"

using namespace peract;

namespace {

CameraView blank_view(int h, int w) {
  CameraView v;
  v.height = h;
  v.width = w;
  v.rgb.assign(static_cast<std::size_t>(h * w * 3), 0);
  v.depth.assign(static_cast<std::size_t>(h * w), 0.0f);
  v.intrinsics << 2.0, 0.0, 3.0, 0.0, 2.0, 4.0, 0.0, 0.0, 1.0;
  return v;
}

}  // namespace

TEST(Voxelizer, PrincipalRayLandsOnOpticalAxis) {
  auto v = blank_view(8, 8);
  v.depth[4 * 8 + 3] = 1.0f;
  const auto pts = project_pointcloud(v);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_NEAR(pts[0].position.x(), 0.0f, 1e-7);
  EXPECT_NEAR(pts[0].position.y(), 0.0f, 1e-7);
  EXPECT_NEAR(pts[0].position.z(), 1.0f, 1e-7);
  EXPECT_TRUE(project_pointcloud(blank_view(8, 8)).empty());
}

TEST(Voxelizer, BackProjectionMatchesScalarOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto v = blank_view(8, 8);
  const double fx = 3 + 5 * u(rng), fy = 3 + 5 * u(rng), cx = 8 * u(rng), cy = 8 * u(rng);
  v.intrinsics << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  const Eigen::Matrix3d r = Eigen::AngleAxisd(u(rng) * 6, Vec3(u(rng), u(rng), 1).normalized()).toRotationMatrix();
  v.extrinsics.topLeftCorner<3, 3>() = r;
  v.extrinsics.topRightCorner<3, 1>() = Vec3(u(rng), u(rng), u(rng));
  for (auto& d : v.depth) d = u(rng) < 0.2 ? 0.0f : static_cast<float>(0.5 + u(rng));
  for (auto& c : v.rgb) c = static_cast<std::uint8_t>(u(rng) * 255);
  const auto pts = project_pointcloud(v);
  std::size_t k = 0;
  for (int row = 0; row < 8; ++row) {
    for (int col = 0; col < 8; ++col) {
      const double d = v.depth[static_cast<std::size_t>(row * 8 + col)];
      if (d == 0.0) continue;
      const double xc = (col - cx) / fx * d, yc = (row - cy) / fy * d, zc = d;
      ASSERT_LT(k, pts.size());
      for (int a = 0; a < 3; ++a) {
        const double w = r(a, 0) * xc + r(a, 1) * yc + r(a, 2) * zc + v.extrinsics(a, 3);
        EXPECT_NEAR(pts[k].position[a], w, 1e-5);
      }
      EXPECT_EQ(pts[k].rgb[0], v.rgb[static_cast<std::size_t>(row * 8 + col) * 3]);
      ++k;
    }
  }
  EXPECT_EQ(k, pts.size());
}

TEST(Voxelizer, IndexOfFollowsFloorRule) {
  const auto b = WorkspaceBounds::cube(Vec3::Zero(), 1.0, 100);
  EXPECT_EQ(*voxel_index_of(Vec3(0.005, 0.005, 0.005), b), (VoxelIndex{0, 0, 0}));
  EXPECT_FALSE(voxel_index_of(Vec3(1.0, 0.5, 0.5), b).has_value());
  EXPECT_FALSE(voxel_index_of(Vec3(-1e-9, 0.5, 0.5), b).has_value());
  const WorkspaceBounds odd{Vec3(-0.3, 0.1, -2.0), Vec3(0.9, 1.3, -0.8), {48, 48, 48}};
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.1, 1.1);
  for (int i = 0; i < 10000; ++i) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = odd.min_corner[a] + u(rng) * 1.2;
    const auto got = voxel_index_of(p, odd);
    bool inside = true;
    int idx[3];
    for (int a = 0; a < 3; ++a) {
      const double rel = p[a] - odd.min_corner[a];
      inside = inside && rel >= 0 && p[a] < odd.max_corner[a];
      idx[a] = static_cast<int>(std::floor(rel / 0.025));
    }
    ASSERT_EQ(got.has_value(), inside);
    if (inside) {
      EXPECT_EQ(*got, (VoxelIndex{std::min(idx[0], 47), std::min(idx[1], 47), std::min(idx[2], 47)}));
    }
  }
}

TEST(Voxelizer, SinglePointAndChannelLayout) {
  const auto b = WorkspaceBounds::cube(Vec3::Zero(), 1.0, 100);
  std::vector<ColoredPoint> pts(1);
  pts[0].position = Eigen::Vector3f(0.5f, 0.5f, 0.5f);
  pts[0].rgb = {255, 0, 128};
  const auto g = fuse_points(pts, b);
  EXPECT_EQ(g.channels.size(), 100u * 100u * 100u * 10u);
  int occupied = 0;
  for (std::int64_t i = 0; i < g.voxel_count(); ++i) occupied += g.channels[static_cast<std::size_t>(i * 10 + 6)] != 0.0f;
  EXPECT_EQ(occupied, 1);
  const VoxelIndex c{50, 50, 50};
  EXPECT_TRUE(g.occupied(c));
  EXPECT_FLOAT_EQ(g.at(c, channel::kRgb), 1.0f);
  EXPECT_FLOAT_EQ(g.at(c, channel::kRgb + 1), -1.0f);
  EXPECT_FLOAT_EQ(g.at(c, channel::kPoint + 2), 0.5f);
  EXPECT_FLOAT_EQ(g.at(VoxelIndex{0, 99, 50}, channel::kPosition), -1.0f);
  EXPECT_FLOAT_EQ(g.at(VoxelIndex{0, 99, 50}, channel::kPosition + 1), 1.0f);
}

TEST(Voxelizer, LaterPointWinsLikeSequentialScatter) {
  const auto b = WorkspaceBounds::cube(Vec3::Zero(), 1.0, 4);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<ColoredPoint> pts(300);
  for (auto& p : pts) {
    p.position = Eigen::Vector3f(u(rng), u(rng), u(rng));
    p.rgb = {static_cast<std::uint8_t>(u(rng) * 255), 7, 9};
  }
  const auto g = fuse_points(pts, b);
  // Oracle: the last point mapping to each voxel.
  std::vector<int> last(64, -1);
  for (int i = 0; i < 300; ++i) {
    const auto& q = pts[static_cast<std::size_t>(i)].position;
    const int x = static_cast<int>(q.x() * 4), y = static_cast<int>(q.y() * 4), z = static_cast<int>(q.z() * 4);
    last[static_cast<std::size_t>((x * 4 + y) * 4 + z)] = i;
  }
  for (int f = 0; f < 64; ++f) {
    const auto v = b.unflat(f);
    const int i = last[static_cast<std::size_t>(f)];
    if (i < 0) {
      EXPECT_FALSE(g.occupied(v));
      continue;
    }
    const auto& p = pts[static_cast<std::size_t>(i)];
    EXPECT_EQ(g.at(v, channel::kPoint), p.position.x());
    EXPECT_EQ(g.at(v, channel::kRgb), normalize_color(p.rgb[0]));
  }
}

TEST(Voxelizer, RejectsBadViews) {
  auto v = blank_view(4, 4);
  v.depth.pop_back();
  EXPECT_THROW((void)project_pointcloud(v), InvalidInput);
  v = blank_view(4, 4);
  v.depth[0] = -1.0f;
  EXPECT_THROW((void)project_pointcloud(v), InvalidInput);
  v = blank_view(4, 4);
  v.extrinsics(0, 0) = 2.0;
  EXPECT_THROW((void)project_pointcloud(v), InvalidInput);
  EXPECT_THROW((void)fuse(std::vector<CameraView>{}, WorkspaceBounds{}), InvalidInput);
}

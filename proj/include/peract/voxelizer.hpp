#pragma once

// Multi-view RGB-D fusion into the 10-channel voxel observation.
//
// Camera convention (used everywhere, including the toy world's renderer):
// pinhole, z forward, x right, y down. Pixel (u = column, v = row) has its
// center at integer coordinates; a pixel with depth d back-projects to
// d * K^-1 [u, v, 1]^T in the camera frame, where d is the camera-frame z.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peract/errors.hpp"
#include "peract/geometry.hpp"

namespace peract {

struct CameraView {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  // height * width * 3, row-major
  std::vector<float> depth;       // height * width, metres, 0 = no return
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
  Eigen::Matrix4d extrinsics = Eigen::Matrix4d::Identity();  // camera -> world

  void validate() const {
    if (height <= 0 || width <= 0) throw InvalidInput("camera view: image size must be positive");
    const auto pixels = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    if (rgb.size() != pixels * 3 || depth.size() != pixels) {
      throw InvalidInput("camera view: buffer sizes do not match image size");
    }
    if (!(intrinsics(0, 0) > 0.0) || !(intrinsics(1, 1) > 0.0)) {
      throw InvalidInput("camera view: focal lengths must be positive");
    }
    const Eigen::Matrix3d r = extrinsics.topLeftCorner<3, 3>();
    if ((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() >= 1e-6) {
      throw InvalidInput("camera view: extrinsics rotation is not orthonormal");
    }
    for (float d : depth) {
      if (!std::isfinite(d) || d < 0.0f) throw InvalidInput("camera view: depth must be finite and >= 0");
    }
  }
};

struct VoxelIndex {
  int x = 0;
  int y = 0;
  int z = 0;

  friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
  [[nodiscard]] int operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
};

struct WorkspaceBounds {
  Vec3 min_corner = Vec3::Zero();
  Vec3 max_corner = Vec3::Ones();
  std::array<int, 3> grid_size{100, 100, 100};

  [[nodiscard]] double edge_length(int axis = 0) const {
    return (max_corner[axis] - min_corner[axis]) / grid_size[static_cast<std::size_t>(axis)];
  }
  [[nodiscard]] std::int64_t voxel_count() const {
    return std::int64_t{grid_size[0]} * grid_size[1] * grid_size[2];
  }
  [[nodiscard]] std::int64_t flat(const VoxelIndex& v) const {
    return (std::int64_t{v.x} * grid_size[1] + v.y) * grid_size[2] + v.z;
  }
  [[nodiscard]] VoxelIndex unflat(std::int64_t i) const {
    const int z = static_cast<int>(i % grid_size[2]);
    i /= grid_size[2];
    const int y = static_cast<int>(i % grid_size[1]);
    return {static_cast<int>(i / grid_size[1]), y, z};
  }
  [[nodiscard]] bool contains(const VoxelIndex& v) const {
    return v.x >= 0 && v.y >= 0 && v.z >= 0 && v.x < grid_size[0] && v.y < grid_size[1] && v.z < grid_size[2];
  }
  [[nodiscard]] Vec3 voxel_center(const VoxelIndex& v) const {
    Vec3 c;
    for (int a = 0; a < 3; ++a) c[a] = min_corner[a] + (v[a] + 0.5) * edge_length(a);
    return c;
  }
  [[nodiscard]] Vec3 center() const { return 0.5 * (min_corner + max_corner); }

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (grid_size[static_cast<std::size_t>(a)] <= 0) throw InvalidInput("workspace: grid size must be positive");
      if (!(max_corner[a] > min_corner[a])) throw InvalidInput("workspace: max corner must exceed min corner");
    }
    const double e0 = edge_length(0);
    for (int a = 1; a < 3; ++a) {
      if (std::abs(edge_length(a) - e0) > 1e-9 * std::max(1.0, e0)) {
        throw InvalidInput("workspace: voxels must be cubic (equal edge length on every axis)");
      }
    }
  }

  // Cube of side `side` starting at `min` with `cells` voxels per axis.
  static WorkspaceBounds cube(const Vec3& min, double side, int cells) {
    return {min, min + Vec3::Constant(side), {cells, cells, cells}};
  }
};

struct ColoredPoint {
  Eigen::Vector3f position = Eigen::Vector3f::Zero();  // world frame, metres
  std::array<std::uint8_t, 3> rgb{0, 0, 0};
};

/// Floor rule over half-open voxels; anything outside [min, max) is rejected.
[[nodiscard]] inline std::optional<VoxelIndex> voxel_index_of(const Vec3& p, const WorkspaceBounds& bounds) {
  std::array<int, 3> idx{};
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] >= bounds.min_corner[a]) || !(p[a] < bounds.max_corner[a])) return std::nullopt;
    const int n = bounds.grid_size[static_cast<std::size_t>(a)];
    const auto i = static_cast<int>(std::floor((p[a] - bounds.min_corner[a]) / bounds.edge_length(a)));
    // p < max but the quotient rounded up to n: the point belongs to the last voxel.
    idx[static_cast<std::size_t>(a)] = std::min(i, n - 1);
  }
  return VoxelIndex{idx[0], idx[1], idx[2]};
}

namespace channel {
inline constexpr int kRgb = 0;
inline constexpr int kPoint = 3;
inline constexpr int kOccupancy = 6;
inline constexpr int kPosition = 7;
inline constexpr int kCount = 10;
}  // namespace channel

/// Channel-last grid: element (x, y, z, c) lives at (flat(x,y,z) * 10 + c).
struct VoxelGrid {
  WorkspaceBounds bounds;
  std::vector<float> channels;

  [[nodiscard]] float at(const VoxelIndex& v, int c) const {
    return channels[static_cast<std::size_t>(bounds.flat(v) * channel::kCount + c)];
  }
  float& at(const VoxelIndex& v, int c) {
    return channels[static_cast<std::size_t>(bounds.flat(v) * channel::kCount + c)];
  }
  [[nodiscard]] bool occupied(const VoxelIndex& v) const { return at(v, channel::kOccupancy) != 0.0f; }
  [[nodiscard]] std::int64_t voxel_count() const { return bounds.voxel_count(); }
};

[[nodiscard]] inline float normalized_position_index(int i, int n) {
  return n > 1 ? static_cast<float>(2.0 * i / (n - 1) - 1.0) : 0.0f;
}

/// Empty grid with only the position-index channels filled.
[[nodiscard]] inline VoxelGrid make_empty_grid(const WorkspaceBounds& bounds) {
  bounds.validate();
  VoxelGrid grid;
  grid.bounds = bounds;
  grid.channels.assign(static_cast<std::size_t>(bounds.voxel_count() * channel::kCount), 0.0f);
  const auto& g = bounds.grid_size;
  for (int x = 0; x < g[0]; ++x) {
    for (int y = 0; y < g[1]; ++y) {
      for (int z = 0; z < g[2]; ++z) {
        const VoxelIndex v{x, y, z};
        grid.at(v, channel::kPosition + 0) = normalized_position_index(x, g[0]);
        grid.at(v, channel::kPosition + 1) = normalized_position_index(y, g[1]);
        grid.at(v, channel::kPosition + 2) = normalized_position_index(z, g[2]);
      }
    }
  }
  return grid;
}

[[nodiscard]] inline std::vector<ColoredPoint> project_pointcloud(const CameraView& view) {
  view.validate();
  const Eigen::Matrix3d k_inv = view.intrinsics.inverse();
  const Eigen::Matrix3d rot = view.extrinsics.topLeftCorner<3, 3>();
  const Vec3 trans = view.extrinsics.topRightCorner<3, 1>();
  std::vector<ColoredPoint> points;
  points.reserve(view.depth.size());
  for (int row = 0; row < view.height; ++row) {
    for (int col = 0; col < view.width; ++col) {
      const auto pix = static_cast<std::size_t>(row) * static_cast<std::size_t>(view.width) + static_cast<std::size_t>(col);
      const double d = view.depth[pix];
      if (d <= 0.0) continue;
      const Vec3 cam = d * (k_inv * Vec3(col, row, 1.0));
      const Vec3 world = rot * cam + trans;
      ColoredPoint p;
      p.position = world.cast<float>();
      p.rgb = {view.rgb[pix * 3], view.rgb[pix * 3 + 1], view.rgb[pix * 3 + 2]};
      points.push_back(p);
    }
  }
  return points;
}

[[nodiscard]] inline float normalize_color(std::uint8_t c) {
  return (static_cast<float>(c) / 255.0f - 0.5f) * 2.0f;
}

/// Scatters points in order; a later point overwrites an earlier one in the same voxel.
inline void scatter_points(std::span<const ColoredPoint> points, VoxelGrid& grid) {
  for (const auto& p : points) {
    const auto idx = voxel_index_of(p.position.cast<double>(), grid.bounds);
    if (!idx) continue;
    float* cell = grid.channels.data() + grid.bounds.flat(*idx) * channel::kCount;
    for (int c = 0; c < 3; ++c) {
      cell[channel::kRgb + c] = normalize_color(p.rgb[static_cast<std::size_t>(c)]);
      cell[channel::kPoint + c] = p.position[c];
    }
    cell[channel::kOccupancy] = 1.0f;
  }
}

[[nodiscard]] inline VoxelGrid fuse_points(std::span<const ColoredPoint> points, const WorkspaceBounds& bounds) {
  VoxelGrid grid = make_empty_grid(bounds);
  scatter_points(points, grid);
  return grid;
}

/// Fuses views in list order, each in row-major pixel order.
[[nodiscard]] inline VoxelGrid fuse(std::span<const CameraView> views, const WorkspaceBounds& bounds) {
  if (views.empty()) throw InvalidInput("fuse: at least one camera view is required");
  VoxelGrid grid = make_empty_grid(bounds);
  for (const auto& view : views) {
    const auto points = project_pointcloud(view);
    scatter_points(points, grid);
  }
  return grid;
}

/// Concatenated point cloud of every view, in fusion order.
[[nodiscard]] inline std::vector<ColoredPoint> collect_points(std::span<const CameraView> views) {
  std::vector<ColoredPoint> all;
  for (const auto& view : views) {
    auto pts = project_pointcloud(view);
    all.insert(all.end(), pts.begin(), pts.end());
  }
  return all;
}

}  // namespace peract

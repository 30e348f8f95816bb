#pragma once

// Continuous 6-DoF gripper actions <-> discrete classification targets.

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "peract/errors.hpp"
#include "peract/geometry.hpp"
#include "peract/voxelizer.hpp"

namespace peract {

struct ContinuousAction {
  Vec3 position = Vec3::Zero();  // centre of the gripper fingers, world frame
  Quat orientation = Quat::Identity();
  bool open = true;
  bool collide = false;
};

struct DiscreteAction {
  VoxelIndex trans_index;
  std::array<int, 3> rot_indices{0, 0, 0};
  bool open = true;
  bool collide = false;

  friend bool operator==(const DiscreteAction&, const DiscreteAction&) = default;
};

/// Number of rotation bins per axis; the bin width must divide 360 degrees.
[[nodiscard]] inline int rotation_bin_count(double bin_deg) {
  if (!(bin_deg > 0.0)) throw InvalidInput("rotation bin width must be positive");
  const double n = 360.0 / bin_deg;
  const double r = std::round(n);
  if (std::abs(n - r) > 1e-9) throw InvalidInput("rotation bin width must divide 360 degrees");
  return static_cast<int>(r);
}

/// Floor into half-open [b*R, (b+1)*R) bins. Angles within 1e-9 bin widths
/// below a boundary are assigned to the upper bin so that poses built from
/// exact multiples of R survive quaternion round-off.
[[nodiscard]] inline int angle_to_bin(double deg, double bin_deg, int bins) {
  const double w = wrap_degrees(deg);
  const int b = static_cast<int>(std::floor(w / bin_deg + 1e-9));
  return b % bins;
}

[[nodiscard]] inline double bin_center_deg(int bin, double bin_deg) { return (bin + 0.5) * bin_deg; }

[[nodiscard]] inline DiscreteAction discretize(const ContinuousAction& action, const WorkspaceBounds& bounds,
                                               double bin_deg) {
  const int bins = rotation_bin_count(bin_deg);
  const auto idx = voxel_index_of(action.position, bounds);
  if (!idx) throw OutOfBounds("discretize: action position lies outside the workspace");
  DiscreteAction d;
  d.trans_index = *idx;
  const EulerXYZ e = quat_to_euler(action.orientation);
  for (int a = 0; a < 3; ++a) d.rot_indices[static_cast<std::size_t>(a)] = angle_to_bin(e[a], bin_deg, bins);
  d.open = action.open;
  d.collide = action.collide;
  return d;
}

[[nodiscard]] inline bool is_valid(const DiscreteAction& d, const WorkspaceBounds& bounds, double bin_deg) {
  const int bins = rotation_bin_count(bin_deg);
  if (!bounds.contains(d.trans_index)) return false;
  for (int r : d.rot_indices) {
    if (r < 0 || r >= bins) return false;
  }
  return true;
}

[[nodiscard]] inline ContinuousAction undiscretize(const DiscreteAction& d, const WorkspaceBounds& bounds,
                                                   double bin_deg) {
  ContinuousAction a;
  a.position = bounds.voxel_center(d.trans_index);
  a.orientation = euler_to_quat({bin_center_deg(d.rot_indices[0], bin_deg), bin_center_deg(d.rot_indices[1], bin_deg),
                                 bin_center_deg(d.rot_indices[2], bin_deg)});
  a.open = d.open;
  a.collide = d.collide;
  return a;
}

/// Pitch bins whose centres are reachable by the canonical Euler extraction
/// (pitch in [0, 90] or [270, 360)). Only these round-trip exactly.
[[nodiscard]] inline bool is_canonical_pitch_bin(int bin, double bin_deg) {
  const double c = bin_center_deg(bin, bin_deg);
  return c < 90.0 - 1e-9 || c > 270.0 + 1e-9;
}

struct OneHotLabels {
  std::array<int, 3> grid{0, 0, 0};
  Eigen::VectorXf y_trans;  // flattened row-major H*W*D
  Eigen::MatrixXf y_rot;    // bins x 3
  Eigen::Vector2f y_open = Eigen::Vector2f::Zero();
  Eigen::Vector2f y_collide = Eigen::Vector2f::Zero();
};

[[nodiscard]] inline OneHotLabels encode_labels(const DiscreteAction& d, const std::array<int, 3>& grid, int bins) {
  WorkspaceBounds shape;
  shape.grid_size = grid;
  if (!shape.contains(d.trans_index)) throw InvalidInput("encode_labels: translation index outside grid");
  OneHotLabels y;
  y.grid = grid;
  y.y_trans = Eigen::VectorXf::Zero(shape.voxel_count());
  y.y_trans[shape.flat(d.trans_index)] = 1.0f;
  y.y_rot = Eigen::MatrixXf::Zero(bins, 3);
  for (int a = 0; a < 3; ++a) {
    const int r = d.rot_indices[static_cast<std::size_t>(a)];
    if (r < 0 || r >= bins) throw InvalidInput("encode_labels: rotation index outside bin range");
    y.y_rot(r, a) = 1.0f;
  }
  y.y_open[d.open ? 1 : 0] = 1.0f;
  y.y_collide[d.collide ? 1 : 0] = 1.0f;
  return y;
}

/// The four action-value heads produced by the policy.
template <typename Scalar>
struct QPrediction {
  std::array<int, 3> grid{0, 0, 0};
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> q_trans;               // flattened row-major H*W*D
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> q_rot;  // bins x 3
  Eigen::Matrix<Scalar, 2, 1> q_open = Eigen::Matrix<Scalar, 2, 1>::Zero();
  Eigen::Matrix<Scalar, 2, 1> q_collide = Eigen::Matrix<Scalar, 2, 1>::Zero();

  [[nodiscard]] int rotation_bins() const { return static_cast<int>(q_rot.rows()); }

  [[nodiscard]] bool all_finite() const {
    return q_trans.allFinite() && q_rot.allFinite() && q_open.allFinite() && q_collide.allFinite();
  }
};

namespace detail {
// Index of the first maximal element (lowest index wins ties).
template <typename Vector>
[[nodiscard]] Eigen::Index first_argmax(const Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}
}  // namespace detail

template <typename Scalar>
[[nodiscard]] DiscreteAction select_best_action(const QPrediction<Scalar>& q) {
  WorkspaceBounds shape;
  shape.grid_size = q.grid;
  if (q.q_trans.size() != shape.voxel_count() || q.q_rot.cols() != 3 || q.q_rot.rows() < 1) {
    throw InvalidInput("select_best_action: Q shapes do not match the grid");
  }
  if (!q.all_finite()) throw InvalidInput("select_best_action: non-finite Q values");
  DiscreteAction d;
  d.trans_index = shape.unflat(detail::first_argmax(q.q_trans));
  for (int a = 0; a < 3; ++a) {
    d.rot_indices[static_cast<std::size_t>(a)] = static_cast<int>(detail::first_argmax(q.q_rot.col(a)));
  }
  d.open = detail::first_argmax(q.q_open) == 1;
  d.collide = detail::first_argmax(q.q_collide) == 1;
  return d;
}

}  // namespace peract

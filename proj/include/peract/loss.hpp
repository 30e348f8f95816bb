#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "peract/action_codec.hpp"
#include "peract/errors.hpp"

namespace peract {

struct LossBreakdown {
  double trans = 0.0;
  double rot = 0.0;  // summed over the three axes
  double open = 0.0;
  double collide = 0.0;

  [[nodiscard]] double total() const { return trans + rot + open + collide; }

  LossBreakdown& operator+=(const LossBreakdown& o) {
    trans += o.trans;
    rot += o.rot;
    open += o.open;
    collide += o.collide;
    return *this;
  }
  LossBreakdown& operator*=(double s) {
    trans *= s;
    rot *= s;
    open *= s;
    collide *= s;
    return *this;
  }
};

namespace detail {

// Cross-entropy of softmax(logits) against a one-hot target. Writes
// scale * (softmax - onehot) into grad when it is non-null.
template <typename Vec, typename GradVec>
double softmax_cross_entropy(const Vec& logits, Eigen::Index target, double scale, GradVec* grad) {
  using S = typename Vec::Scalar;
  const S mx = logits.maxCoeff();
  double z = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) z += std::exp(static_cast<double>(logits[i] - mx));
  const double log_z = std::log(z) + static_cast<double>(mx);
  if (grad) {
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      (*grad)[i] = static_cast<S>(scale * std::exp(static_cast<double>(logits[i]) - log_z));
    }
    (*grad)[target] -= static_cast<S>(scale);
  }
  return log_z - static_cast<double>(logits[target]);
}

}  // namespace detail

/// Cross-entropy over each head against the discretized target. When `dq` is
/// given it receives `scale` times the gradient with respect to the logits.
template <typename Scalar>
LossBreakdown policy_loss(const QPrediction<Scalar>& q, const DiscreteAction& target, double scale = 1.0,
                          QPrediction<Scalar>* dq = nullptr) {
  WorkspaceBounds shape;
  shape.grid_size = q.grid;
  if (!shape.contains(target.trans_index)) throw InvalidInput("loss: target voxel outside the grid");
  if (q.q_trans.size() != shape.voxel_count()) throw InvalidInput("loss: q_trans size does not match the grid");
  const int bins = q.rotation_bins();
  if (dq) {
    dq->grid = q.grid;
    dq->q_trans.resize(q.q_trans.size());
    dq->q_rot.resize(bins, 3);
  }
  LossBreakdown l;
  l.trans = detail::softmax_cross_entropy(q.q_trans, shape.flat(target.trans_index), scale, dq ? &dq->q_trans : nullptr);
  for (int a = 0; a < 3; ++a) {
    const int r = target.rot_indices[static_cast<std::size_t>(a)];
    if (r < 0 || r >= bins) throw InvalidInput("loss: rotation target outside the bin range");
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> g(bins);
    l.rot += detail::softmax_cross_entropy(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>(q.q_rot.col(a)), r, scale,
                                           dq ? &g : nullptr);
    if (dq) dq->q_rot.col(a) = g;
  }
  l.open = detail::softmax_cross_entropy(q.q_open, target.open ? 1 : 0, scale, dq ? &dq->q_open : nullptr);
  l.collide = detail::softmax_cross_entropy(q.q_collide, target.collide ? 1 : 0, scale, dq ? &dq->q_collide : nullptr);
  const std::pair<const char*, double> terms[] = {{"trans", l.trans}, {"rot", l.rot}, {"open", l.open}, {"collide", l.collide}};
  for (const auto& [head, value] : terms) {
    if (!std::isfinite(value)) throw NonFiniteLoss(std::string("non-finite loss in the ") + head + " head");
  }
  return l;
}

namespace detail {
template <typename Vec>
Eigen::Index one_hot_index(const Vec& v, const char* head) {
  Eigen::Index hot = -1;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] == 1.0f && hot < 0) {
      hot = i;
    } else if (v[i] != 0.0f) {
      hot = -2;
      break;
    }
  }
  if (hot < 0) throw InvalidInput(std::string("loss: ") + head + " label is not one-hot");
  return hot;
}
}  // namespace detail

/// Same loss against explicit one-hot label arrays.
template <typename Scalar>
LossBreakdown policy_loss(const QPrediction<Scalar>& q, const OneHotLabels& y, double scale = 1.0,
                          QPrediction<Scalar>* dq = nullptr) {
  if (y.grid != q.grid || y.y_trans.size() != q.q_trans.size() || y.y_rot.rows() != q.q_rot.rows() ||
      y.y_rot.cols() != 3) {
    throw InvalidInput("loss: label shapes do not match the predictions");
  }
  WorkspaceBounds shape;
  shape.grid_size = y.grid;
  DiscreteAction d;
  d.trans_index = shape.unflat(detail::one_hot_index(y.y_trans, "trans"));
  for (int a = 0; a < 3; ++a) {
    d.rot_indices[static_cast<std::size_t>(a)] = static_cast<int>(detail::one_hot_index(y.y_rot.col(a), "rot"));
  }
  d.open = detail::one_hot_index(y.y_open, "open") == 1;
  d.collide = detail::one_hot_index(y.y_collide, "collide") == 1;
  return policy_loss(q, d, scale, dq);
}

}  // namespace peract

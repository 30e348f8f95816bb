#pragma once

#include <cmath>
#include <string>

#include "peract/nn/tensor.hpp"

namespace peract::nn {

// Every layer exposes visit(prefix, f) with f(name, value, grad) so that the
// owner can enumerate parameters without storing pointers into itself.

template <typename Scalar>
struct Linear {
  Mat<Scalar> weight;  // in x out
  Mat<Scalar> bias;    // 1 x out (empty when the layer has no bias)
  Mat<Scalar> weight_grad;
  Mat<Scalar> bias_grad;

  Linear() = default;
  Linear(int in, int out, InitRng& rng, bool with_bias = true) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight.resize(in, out);
    rng.fill_uniform(weight, bound);
    weight_grad = Mat<Scalar>::Zero(in, out);
    if (with_bias) {
      bias.resize(1, out);
      rng.fill_uniform(bias, bound);
      bias_grad = Mat<Scalar>::Zero(1, out);
    }
  }

  [[nodiscard]] Eigen::Index in_features() const { return weight.rows(); }
  [[nodiscard]] Eigen::Index out_features() const { return weight.cols(); }

  [[nodiscard]] Mat<Scalar> forward(const Mat<Scalar>& x) const {
    Mat<Scalar> y(x.rows(), weight.cols());
    y.noalias() = x * weight;
    if (bias.size()) y.rowwise() += bias.row(0);
    return y;
  }

  /// Accumulates parameter gradients and returns dL/dx.
  Mat<Scalar> backward(const Mat<Scalar>& x, const Mat<Scalar>& dy) {
    weight_grad.noalias() += x.transpose() * dy;
    if (bias.size()) bias_grad += dy.colwise().sum();
    Mat<Scalar> dx(dy.rows(), weight.rows());
    dx.noalias() = dy * weight.transpose();
    return dx;
  }

  /// Parameter gradients only, for layers whose input needs no gradient.
  void backward_params(const Mat<Scalar>& x, const Mat<Scalar>& dy) {
    weight_grad.noalias() += x.transpose() * dy;
    if (bias.size()) bias_grad += dy.colwise().sum();
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight, weight_grad);
    if (bias.size()) f(prefix + ".bias", bias, bias_grad);
  }
};

template <typename Scalar>
struct LayerNorm {
  Mat<Scalar> gamma;
  Mat<Scalar> beta;
  Mat<Scalar> gamma_grad;
  Mat<Scalar> beta_grad;
  double eps = 1e-5;

  struct Cache {
    Mat<Scalar> xhat;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std;
  };

  LayerNorm() = default;
  explicit LayerNorm(int dim) {
    gamma = Mat<Scalar>::Ones(1, dim);
    beta = Mat<Scalar>::Zero(1, dim);
    gamma_grad = Mat<Scalar>::Zero(1, dim);
    beta_grad = Mat<Scalar>::Zero(1, dim);
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, Cache* cache = nullptr) const {
    const auto n = x.cols();
    Mat<Scalar> xhat(x.rows(), n);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Scalar mean = x.row(r).mean();
      const auto centered = (x.row(r).array() - mean).matrix();
      const Scalar var = centered.squaredNorm() / static_cast<Scalar>(n);
      inv_std[r] = Scalar(1) / std::sqrt(var + static_cast<Scalar>(eps));
      xhat.row(r) = centered * inv_std[r];
    }
    Mat<Scalar> y = (xhat.array().rowwise() * gamma.row(0).array()).matrix();
    y.rowwise() += beta.row(0);
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = std::move(inv_std);
    }
    return y;
  }

  Mat<Scalar> backward(const Cache& c, const Mat<Scalar>& dy) {
    gamma_grad += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    beta_grad += dy.colwise().sum();
    const auto n = static_cast<Scalar>(dy.cols());
    Mat<Scalar> dxhat = (dy.array().rowwise() * gamma.row(0).array()).matrix();
    Mat<Scalar> dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      const Scalar mean_d = dxhat.row(r).sum() / n;
      const Scalar mean_dx = dxhat.row(r).dot(c.xhat.row(r)) / n;
      dx.row(r) = c.inv_std[r] * (dxhat.row(r).array() - mean_d - c.xhat.row(r).array() * mean_dx).matrix();
    }
    return dx;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".gamma", gamma, gamma_grad);
    f(prefix + ".beta", beta, beta_grad);
  }
};

/// Linear -> GELU -> Linear.
template <typename Scalar>
struct FeedForward {
  Linear<Scalar> fc1;
  Linear<Scalar> fc2;

  struct Cache {
    Mat<Scalar> x;
    Mat<Scalar> pre;
    Mat<Scalar> act;
  };

  FeedForward() = default;
  FeedForward(int dim, int hidden, InitRng& rng) : fc1(dim, hidden, rng), fc2(hidden, dim, rng) {}

  Mat<Scalar> forward(const Mat<Scalar>& x, Cache* cache = nullptr) const {
    Mat<Scalar> pre = fc1.forward(x);
    Mat<Scalar> act = Gelu<Scalar>::forward(pre);
    Mat<Scalar> y = fc2.forward(act);
    if (cache) {
      cache->x = x;
      cache->pre = std::move(pre);
      cache->act = std::move(act);
    }
    return y;
  }

  Mat<Scalar> backward(const Cache& c, const Mat<Scalar>& dy) {
    const Mat<Scalar> dact = fc2.backward(c.act, dy);
    const Mat<Scalar> dpre = Gelu<Scalar>::backward(c.pre, dact);
    return fc1.backward(c.x, dpre);
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    fc1.visit(prefix + ".fc1", f);
    fc2.visit(prefix + ".fc2", f);
  }
};

}  // namespace peract::nn

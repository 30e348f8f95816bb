#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "peract/nn/layers.hpp"
#include "peract/nn/tensor.hpp"

namespace peract::nn {

/// Multi-head scaled dot-product attention. Queries come from `xq`, keys and
/// values from `xkv`; self-attention passes the same matrix twice.
template <typename Scalar>
struct MultiHeadAttention {
  Linear<Scalar> to_q;
  Linear<Scalar> to_k;
  Linear<Scalar> to_v;
  Linear<Scalar> to_out;
  int heads = 1;
  int head_dim = 1;

  struct Cache {
    Mat<Scalar> xq;
    Mat<Scalar> xkv;
    Mat<Scalar> q;
    Mat<Scalar> k;
    Mat<Scalar> v;
    std::vector<Mat<Scalar>> probs;  // one Lq x Lkv matrix per head
    Mat<Scalar> merged;
  };

  MultiHeadAttention() = default;
  MultiHeadAttention(int q_dim, int kv_dim, int num_heads, int dim_per_head, int out_dim, InitRng& rng)
      : to_q(q_dim, num_heads * dim_per_head, rng, false),
        to_k(kv_dim, num_heads * dim_per_head, rng, false),
        to_v(kv_dim, num_heads * dim_per_head, rng, false),
        to_out(num_heads * dim_per_head, out_dim, rng),
        heads(num_heads),
        head_dim(dim_per_head) {}

  [[nodiscard]] Scalar scale() const { return Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim)); }

  Mat<Scalar> forward(const Mat<Scalar>& xq, const Mat<Scalar>& xkv, Cache* cache = nullptr) const {
    Mat<Scalar> q = to_q.forward(xq);
    Mat<Scalar> k = to_k.forward(xkv);
    Mat<Scalar> v = to_v.forward(xkv);
    Mat<Scalar> merged(xq.rows(), heads * head_dim);
    if (cache) cache->probs.resize(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      const auto cols = Eigen::seqN(h * head_dim, head_dim);
      Mat<Scalar> p(xq.rows(), xkv.rows());
      p.noalias() = q(Eigen::all, cols) * k(Eigen::all, cols).transpose();
      p *= scale();
      softmax_rows(p);
      merged(Eigen::all, cols).noalias() = p * v(Eigen::all, cols);
      if (cache) cache->probs[static_cast<std::size_t>(h)] = std::move(p);
    }
    Mat<Scalar> y = to_out.forward(merged);
    if (cache) {
      cache->xq = xq;
      cache->xkv = xkv;
      cache->q = std::move(q);
      cache->k = std::move(k);
      cache->v = std::move(v);
      cache->merged = std::move(merged);
    }
    return y;
  }

  struct InputGrads {
    Mat<Scalar> dxq;
    Mat<Scalar> dxkv;
  };

  InputGrads backward(const Cache& c, const Mat<Scalar>& dy) {
    const Mat<Scalar> dmerged = to_out.backward(c.merged, dy);
    Mat<Scalar> dq(c.q.rows(), c.q.cols());
    Mat<Scalar> dk(c.k.rows(), c.k.cols());
    Mat<Scalar> dv(c.v.rows(), c.v.cols());
    for (int h = 0; h < heads; ++h) {
      const auto cols = Eigen::seqN(h * head_dim, head_dim);
      const Mat<Scalar>& p = c.probs[static_cast<std::size_t>(h)];
      const Mat<Scalar> dout = dmerged(Eigen::all, cols);
      Mat<Scalar> dp(p.rows(), p.cols());
      dp.noalias() = dout * c.v(Eigen::all, cols).transpose();
      dv(Eigen::all, cols).noalias() = p.transpose() * dout;
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_dot = (dp.array() * p.array()).rowwise().sum();
      Mat<Scalar> ds = (p.array() * (dp.array().colwise() - row_dot.array())).matrix();
      ds *= scale();
      dq(Eigen::all, cols).noalias() = ds * c.k(Eigen::all, cols);
      dk(Eigen::all, cols).noalias() = ds.transpose() * c.q(Eigen::all, cols);
    }
    InputGrads g;
    g.dxq = to_q.backward(c.xq, dq);
    g.dxkv = to_k.backward(c.xkv, dk);
    g.dxkv += to_v.backward(c.xkv, dv);
    return g;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    to_q.visit(prefix + ".to_q", f);
    to_k.visit(prefix + ".to_k", f);
    to_v.visit(prefix + ".to_v", f);
    to_out.visit(prefix + ".to_out", f);
  }
};

}  // namespace peract::nn

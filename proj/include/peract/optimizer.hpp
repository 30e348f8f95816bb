#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstdint>
#include <string>
#include <vector>

#include "peract/errors.hpp"
#include "peract/nn/tensor.hpp"

namespace peract {

enum class OptimizerKind { kLamb, kAdam };

[[nodiscard]] inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "lamb") return OptimizerKind::kLamb;
  if (s == "adam") return OptimizerKind::kAdam;
  throw InvalidInput("unknown optimizer '" + s + "' (expected lamb or adam)");
}

[[nodiscard]] inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::kLamb ? "lamb" : "adam"; }

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kLamb;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  double weight_decay = 0.0;
  double max_trust_ratio = 10.0;
  double grad_clip_norm = 0.0;  // 0 disables
  int warmup_steps = 0;
  // Cosine decay of lr to lr * min_lr_ratio over this many steps; 0 keeps lr constant.
  std::int64_t decay_steps = 0;
  double min_lr_ratio = 0.0;
};

/// Adam moments per parameter tensor, with the LAMB layer-wise trust ratio
/// ||w|| / ||update|| applied on top when kind == kLamb.
template <typename Scalar>
class Optimizer {
public:
  using M = nn::Mat<Scalar>;

  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {}

  [[nodiscard]] const OptimizerConfig& config() const { return cfg_; }
  [[nodiscard]] std::int64_t step_count() const { return step_; }

  /// Applies one update to every tensor visited by `visit(f)` where f(name, value, grad).
  template <typename Visitor>
  void step(Visitor&& visit) {
    ++step_;
    double scale = 1.0;
    if (cfg_.grad_clip_norm > 0.0) {
      double sq = 0.0;
      visit([&](const std::string&, M&, M& g) { sq += g.template cast<double>().squaredNorm(); });
      const double norm = std::sqrt(sq);
      if (norm > cfg_.grad_clip_norm) scale = cfg_.grad_clip_norm / norm;
    }
    double lr = cfg_.lr;
    if (cfg_.warmup_steps > 0 && step_ <= cfg_.warmup_steps) lr *= static_cast<double>(step_) / cfg_.warmup_steps;
    if (cfg_.decay_steps > 0) {
      const double t = std::min(1.0, static_cast<double>(step_) / static_cast<double>(cfg_.decay_steps));
      lr *= cfg_.min_lr_ratio + (1.0 - cfg_.min_lr_ratio) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));

    std::size_t i = 0;
    visit([&](const std::string&, M& w, M& g) {
      if (i == m_.size()) {
        m_.push_back(M::Zero(w.rows(), w.cols()));
        v_.push_back(M::Zero(w.rows(), w.cols()));
      }
      M& m = m_[i];
      M& v = v_[i];
      ++i;
      const M gs = g * static_cast<Scalar>(scale);
      m = static_cast<Scalar>(cfg_.beta1) * m + static_cast<Scalar>(1 - cfg_.beta1) * gs;
      v = static_cast<Scalar>(cfg_.beta2) * v + static_cast<Scalar>(1 - cfg_.beta2) * gs.cwiseProduct(gs);
      M update = ((m.array() / static_cast<Scalar>(bc1)) /
                  ((v.array() / static_cast<Scalar>(bc2)).sqrt() + static_cast<Scalar>(cfg_.eps)))
                     .matrix();
      if (cfg_.weight_decay > 0.0) update += static_cast<Scalar>(cfg_.weight_decay) * w;
      double ratio = 1.0;
      if (cfg_.kind == OptimizerKind::kLamb) {
        const double wn = static_cast<double>(w.norm());
        const double un = static_cast<double>(update.norm());
        if (wn > 0.0 && un > 0.0) ratio = std::min(wn / un, cfg_.max_trust_ratio);
      }
      w -= static_cast<Scalar>(lr * ratio) * update;
    });
  }

  // State access for checkpoints.
  [[nodiscard]] const std::vector<M>& first_moments() const { return m_; }
  [[nodiscard]] const std::vector<M>& second_moments() const { return v_; }
  void restore(std::int64_t step, std::vector<M> m, std::vector<M> v) {
    if (m.size() != v.size()) throw CorruptData("optimizer state: moment counts differ");
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
  }

private:
  OptimizerConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<M> m_;
  std::vector<M> v_;
};

}  // namespace peract

#pragma once

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "peract/checkpoint.hpp"
#include "peract/demo_pipeline.hpp"
#include "peract/loss.hpp"
#include "peract/optimizer.hpp"
#include "peract/policy.hpp"

namespace peract {

struct TrainConfig {
  int batch_size = 16;
  std::int64_t total_iterations = 600000;
  OptimizerConfig optimizer;
  Vec3 aug_trans_range = Vec3::Constant(0.125);
  double aug_yaw_range_deg = 45.0;
  std::int64_t checkpoint_interval = 10000;
  std::uint64_t seed = 0;
  double vel_epsilon = kDefaultVelocityEpsilon;
  int log_interval = 1;

  void validate() const {
    if (batch_size < 1) throw InvalidInput("train config: batch_size must be >= 1");
    if (total_iterations < 0) throw InvalidInput("train config: total_iterations must be >= 0");
    if ((aug_trans_range.array() < 0.0).any() || aug_yaw_range_deg < 0.0) {
      throw InvalidInput("train config: augmentation ranges must be >= 0");
    }
    if (!(optimizer.lr > 0.0)) throw InvalidInput("train config: learning_rate must be positive");
    if (optimizer.decay_steps < 0 || optimizer.min_lr_ratio < 0.0 || optimizer.min_lr_ratio > 1.0) {
      throw InvalidInput("train config: lr_decay_steps >= 0 and min_lr_ratio in [0, 1] required");
    }
    if (checkpoint_interval < 0 || log_interval < 1) throw InvalidInput("train config: bad checkpoint/log interval");
  }
};

/// Tuple specs grouped by task. Grids are fused on demand from the stored
/// camera views so that memory stays proportional to the raw demonstrations.
class TrainingSet {
public:
  struct Item {
    std::shared_ptr<const DemoEpisode> episode;
    TupleSpec spec;
  };

  TrainingSet(const std::vector<DemoEpisode>& episodes, CodecConfig codec,
              double vel_epsilon = kDefaultVelocityEpsilon)
      : codec_(std::move(codec)) {
    std::map<std::string, std::size_t> index;
    for (const auto& e : episodes) {
      e.validate();
      auto ep = std::make_shared<const DemoEpisode>(e);
      const auto keyframes = extract_keyframes(*ep, vel_epsilon);
      auto [it, inserted] = index.try_emplace(ep->task_id, task_ids_.size());
      if (inserted) {
        task_ids_.push_back(ep->task_id);
        items_.emplace_back();
      }
      for (const auto& spec : make_tuple_specs(*ep, keyframes, codec_)) items_[it->second].push_back({ep, spec});
    }
    if (items_.empty()) throw InvalidInput("training set: no episodes");
  }

  [[nodiscard]] std::size_t num_tasks() const { return items_.size(); }
  [[nodiscard]] const std::string& task_id(std::size_t t) const { return task_ids_[t]; }
  [[nodiscard]] std::size_t tuple_count(std::size_t t) const { return items_[t].size(); }
  [[nodiscard]] std::vector<std::size_t> tuple_counts() const {
    std::vector<std::size_t> out;
    for (const auto& v : items_) out.push_back(v.size());
    return out;
  }
  [[nodiscard]] std::size_t total_tuples() const {
    std::size_t n = 0;
    for (const auto& v : items_) n += v.size();
    return n;
  }
  [[nodiscard]] const CodecConfig& codec() const { return codec_; }
  [[nodiscard]] const Item& item(std::size_t task, std::size_t i) const { return items_[task][i]; }

  [[nodiscard]] TrainingTuple materialize(std::size_t task, std::size_t i) const {
    const auto& it = items_[task][i];
    return materialize_tuple(*it.episode, it.spec, codec_);
  }

private:
  CodecConfig codec_;
  std::vector<std::string> task_ids_;
  std::vector<std::vector<Item>> items_;
};

struct BatchIndex {
  std::size_t task = 0;
  std::size_t tuple = 0;
};

/// Task ids uniformly with replacement, then one uniform tuple within each task.
template <typename Rng>
[[nodiscard]] std::vector<BatchIndex> sample_batch_indices(const std::vector<std::size_t>& tuple_counts, int batch_size,
                                                           Rng& rng) {
  if (tuple_counts.empty()) throw InvalidInput("sample_batch: dataset is empty");
  for (auto c : tuple_counts) {
    if (c == 0) throw InvalidInput("sample_batch: a task has no tuples");
  }
  std::uniform_int_distribution<std::size_t> task(0, tuple_counts.size() - 1);
  std::vector<BatchIndex> out(static_cast<std::size_t>(batch_size));
  for (auto& b : out) b.task = task(rng);
  for (auto& b : out) b.tuple = std::uniform_int_distribution<std::size_t>(0, tuple_counts[b.task] - 1)(rng);
  return out;
}

template <typename Rng>
[[nodiscard]] std::vector<TrainingTuple> sample_batch(const TrainingSet& data, int batch_size, Rng& rng) {
  std::vector<TrainingTuple> batch;
  for (const auto& b : sample_batch_indices(data.tuple_counts(), batch_size, rng)) {
    batch.push_back(data.materialize(b.task, b.tuple));
  }
  return batch;
}

struct AugmentRanges {
  Vec3 translation = Vec3::Constant(0.125);
  double yaw_deg = 45.0;
};

struct AugmentOutcome {
  TrainingTuple tuple;
  bool applied = false;
  int attempts = 0;
};

/// Random yaw about the vertical axis through the workspace centre plus a
/// translation, applied to the raw points and the target pose, then
/// re-fused and re-discretized. Perturbations that push the target outside
/// the grid are redrawn, up to 10 times.
template <typename Rng>
[[nodiscard]] AugmentOutcome augment(const TrainingTuple& tuple, const AugmentRanges& ranges, const CodecConfig& codec,
                                     Rng& rng) {
  AugmentOutcome out{tuple, false, 0};
  if (ranges.translation.isZero(0.0) && ranges.yaw_deg == 0.0) return out;
  const Vec3 pivot = codec.bounds.center();
  for (int attempt = 1; attempt <= 10; ++attempt) {
    Vec3 t;
    for (int a = 0; a < 3; ++a) t[a] = std::uniform_real_distribution<double>(-ranges.translation[a], ranges.translation[a])(rng);
    const double yaw = std::uniform_real_distribution<double>(-ranges.yaw_deg, ranges.yaw_deg)(rng);
    out.attempts = attempt;
    const Eigen::Matrix3d r = Eigen::AngleAxisd(yaw * kRadPerDeg, Vec3::UnitZ()).toRotationMatrix();
    const auto transform = [&](const Vec3& p) {
      Vec3 q = p - pivot;
      q = r * q;
      return Vec3(q + pivot + t);
    };
    ContinuousAction pose = tuple.target_pose;
    pose.position = transform(pose.position);
    pose.orientation = Quat(r * pose.orientation.toRotationMatrix()).normalized();
    if (!voxel_index_of(pose.position, codec.bounds)) continue;
    DiscreteAction target;
    try {
      target = discretize(pose, codec.bounds, codec.bin_deg);
    } catch (const OutOfBounds&) {
      continue;
    }
    TrainingTuple aug = tuple;
    for (auto& p : aug.raw_points) p.position = transform(p.position.cast<double>()).template cast<float>();
    aug.voxel_obs = fuse_points(aug.raw_points, codec.bounds);
    aug.target_pose = pose;
    aug.target = target;
    out.tuple = std::move(aug);
    out.applied = true;
    return out;
  }
  return out;
}

/// Mean loss over the batch, one backward pass per sample, then one update.
template <typename Scalar>
LossBreakdown train_step(PerceiverPolicy<Scalar>& policy, const std::vector<TrainingTuple>& batch,
                         Optimizer<Scalar>& optimizer) {
  if (batch.empty()) throw InvalidInput("train_step: batch is empty");
  policy.zero_grad();
  const double scale = 1.0 / static_cast<double>(batch.size());
  LossBreakdown total;
  for (const auto& tuple : batch) {
    typename PerceiverPolicy<Scalar>::ForwardCache cache;
    const auto q = policy.forward(tuple.voxel_obs, tuple.proprio, policy.encode_language(tuple.language_goal), &cache);
    QPrediction<Scalar> dq;
    total += policy_loss(q, tuple.target, scale, &dq);
    policy.backward(cache, dq);
  }
  total *= scale;
  optimizer.step([&](auto&& f) { policy.visit_parameters(f); });
  return total;
}

// ------------------------------------------------------------------ driver

namespace detail {
inline std::atomic<bool> g_interrupted{false};
inline void on_sigint(int) { g_interrupted.store(true); }
}  // namespace detail

/// Routes SIGINT into a flag the training loop polls between iterations.
class InterruptGuard {
public:
  InterruptGuard() {
    detail::g_interrupted.store(false);
    previous_ = std::signal(SIGINT, detail::on_sigint);
  }
  ~InterruptGuard() { std::signal(SIGINT, previous_); }
  InterruptGuard(const InterruptGuard&) = delete;
  InterruptGuard& operator=(const InterruptGuard&) = delete;
  [[nodiscard]] static bool interrupted() { return detail::g_interrupted.load(); }

private:
  void (*previous_)(int) = SIG_DFL;
};

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path loss_log;
  std::int64_t iterations = 0;
  bool interrupted = false;
  LossBreakdown last_loss;
};

class Trainer {
public:
  Trainer(const PolicyConfig& policy_config, TrainConfig cfg, std::shared_ptr<const TrainingSet> data)
      : cfg_(std::move(cfg)), data_(std::move(data)), policy_(policy_config), optimizer_(cfg_.optimizer), rng_(cfg_.seed) {
    cfg_.validate();
    if (data_->codec().bounds.grid_size != policy_config.grid()) {
      throw InvalidInput("trainer: dataset grid does not match the policy grid_size");
    }
    if (std::abs(data_->codec().bin_deg - policy_config.rotation_bin_deg) > 1e-12) {
      throw InvalidInput("trainer: dataset rotation bins do not match the policy");
    }
  }

  [[nodiscard]] PerceiverPolicy<float>& policy() { return policy_; }
  [[nodiscard]] const PerceiverPolicy<float>& policy() const { return policy_; }
  [[nodiscard]] std::int64_t iteration() const { return iteration_; }
  [[nodiscard]] const TrainConfig& config() const { return cfg_; }

  std::vector<TrainingTuple> next_batch() {
    auto batch = sample_batch(*data_, cfg_.batch_size, rng_);
    const AugmentRanges ranges{cfg_.aug_trans_range, cfg_.aug_yaw_range_deg};
    for (auto& t : batch) t = augment(t, ranges, data_->codec(), rng_).tuple;
    return batch;
  }

  LossBreakdown step() {
    const auto batch = next_batch();
    const auto loss = train_step(policy_, batch, optimizer_);
    ++iteration_;
    return loss;
  }

  void save(const std::filesystem::path& path) const {
    auto ck = make_checkpoint(policy_, &optimizer_);
    ck.iteration = iteration_;
    std::ostringstream rng_state;
    rng_state << rng_;
    ck.rng_state = rng_state.str();
    write_checkpoint(ck, path);
  }

  void resume(const std::filesystem::path& path) {
    const auto ck = read_checkpoint(path);
    load_parameters(ck, policy_);
    load_optimizer(ck, optimizer_);
    iteration_ = ck.iteration;
    std::istringstream in(ck.rng_state);
    in >> rng_;
    if (!in) throw CorruptData("checkpoint: bad RNG state");
  }

  /// Trains up to total_iterations, appending one line per logged iteration
  /// to out_dir/loss.log: "iteration total trans rot open collide seconds".
  TrainResult run(const std::filesystem::path& out_dir, std::FILE* progress = nullptr) {
    std::filesystem::create_directories(out_dir);
    TrainResult result;
    result.loss_log = out_dir / "loss.log";
    std::ofstream log(result.loss_log, iteration_ == 0 ? std::ios::trunc : std::ios::app);
    if (!log) throw std::runtime_error("cannot open " + result.loss_log.string());
    log << std::setprecision(9);
    InterruptGuard guard;
    const auto start = std::chrono::steady_clock::now();
    while (iteration_ < cfg_.total_iterations) {
      result.last_loss = step();
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (iteration_ % cfg_.log_interval == 0 || iteration_ == cfg_.total_iterations) {
        log << iteration_ << ' ' << result.last_loss.total() << ' ' << result.last_loss.trans << ' '
            << result.last_loss.rot << ' ' << result.last_loss.open << ' ' << result.last_loss.collide << ' ' << secs
            << '\n';
        if (progress && iteration_ % (cfg_.log_interval * 50) == 0) {
          std::fprintf(progress, "iter %lld  loss %.4f  (%.0fs)\n", static_cast<long long>(iteration_),
                       result.last_loss.total(), secs);
          std::fflush(progress);
        }
      }
      if (cfg_.checkpoint_interval > 0 && iteration_ % cfg_.checkpoint_interval == 0) {
        checkpoint_to(out_dir / ("checkpoint_" + std::to_string(iteration_) + ".bin"));
      }
      if (InterruptGuard::interrupted()) {
        log.flush();
        result.interrupted = true;
        break;
      }
    }
    log.flush();
    result.final_checkpoint = out_dir / (result.interrupted ? "checkpoint_interrupted.bin" : "checkpoint_final.bin");
    checkpoint_to(result.final_checkpoint);
    result.iterations = iteration_;
    return result;
  }

private:
  void checkpoint_to(const std::filesystem::path& path) const {
    try {
      save(path);
    } catch (const std::exception& e) {
      throw std::runtime_error("could not write checkpoint at iteration " + std::to_string(iteration_) + ": " +
                               e.what() + "; the previous checkpoint in the same directory is intact");
    }
  }

  TrainConfig cfg_;
  std::shared_ptr<const TrainingSet> data_;
  PerceiverPolicy<float> policy_;
  Optimizer<float> optimizer_;
  std::mt19937_64 rng_;
  std::int64_t iteration_ = 0;
};

}  // namespace peract

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "peract/policy.hpp"
#include "peract/toyworld/world.hpp"

namespace peract::toy {

struct Observation {
  std::vector<CameraView> views;
  Proprio proprio{};
  std::string goal;
  int step = 0;
};

class Agent {
public:
  virtual ~Agent() = default;
  /// Called once per episode with the initial scene, before the first act().
  virtual void begin_episode(const SceneState&, const EnvConfig&) {}
  virtual DiscreteAction act(const Observation& obs) = 0;
  [[nodiscard]] virtual std::string name() const = 0;
};

/// Discretizes the scripted expert's waypoints and plays them back.
class ReplayExpertAgent final : public Agent {
public:
  void begin_episode(const SceneState& s, const EnvConfig& cfg) override {
    actions_.clear();
    for (const auto& w : expert_waypoints(s)) {
      actions_.push_back(discretize({w.position, w.orientation, w.open, w.collide}, cfg.bounds(), cfg.bin_deg));
    }
  }
  DiscreteAction act(const Observation& obs) override {
    if (actions_.empty()) throw InvalidInput("replay agent: no waypoints");
    return actions_[std::min(static_cast<std::size_t>(obs.step), actions_.size() - 1)];
  }
  [[nodiscard]] std::string name() const override { return "replay-expert"; }

private:
  std::vector<DiscreteAction> actions_;
};

/// Every action component uniform over its discrete range.
class RandomAgent final : public Agent {
public:
  RandomAgent(int grid_size, double bin_deg, std::uint64_t seed)
      : grid_(grid_size), bins_(rotation_bin_count(bin_deg)), rng_(seed) {}
  DiscreteAction act(const Observation&) override {
    std::uniform_int_distribution<int> cell(0, grid_ - 1), bin(0, bins_ - 1), bit(0, 1);
    DiscreteAction a;
    a.trans_index = {cell(rng_), cell(rng_), cell(rng_)};
    a.rot_indices = {bin(rng_), bin(rng_), bin(rng_)};
    a.open = bit(rng_) == 1;
    a.collide = bit(rng_) == 1;
    return a;
  }
  [[nodiscard]] std::string name() const override { return "random"; }

private:
  int grid_;
  int bins_;
  std::mt19937_64 rng_;
};

/// Fuses the views at the policy's grid and takes the arg-max of every head.
class PolicyAgent final : public Agent {
public:
  explicit PolicyAgent(std::shared_ptr<const PerceiverPolicy<float>> policy) : policy_(std::move(policy)) {}

  void begin_episode(const SceneState&, const EnvConfig& cfg) override {
    if (cfg.grid_size != policy_->config().grid_size) {
      throw InvalidInput("policy agent: environment grid_size differs from the policy's");
    }
    bounds_ = cfg.bounds();
  }
  DiscreteAction act(const Observation& obs) override {
    const auto grid = fuse(obs.views, bounds_);
    return select_best_action(policy_->forward(grid, obs.proprio, obs.goal));
  }
  [[nodiscard]] std::string name() const override { return "policy"; }

private:
  std::shared_ptr<const PerceiverPolicy<float>> policy_;
  WorkspaceBounds bounds_;
};

struct EpisodeResult {
  TaskId task = TaskId::kPressButton;
  int variation = 0;
  std::uint64_t seed = 0;
  std::string goal;
  int score = 0;
  int steps_taken = 0;
  Termination termination = Termination::kStepLimit;
};

enum class GoalMode { kCorrect, kSwapped };

/// For press_button, the colour of another button in the scene; otherwise
/// the goal of a different variation.
[[nodiscard]] inline std::string swapped_goal(const SceneState& s, const EnvConfig& cfg, std::mt19937_64& rng) {
  if (s.task == TaskId::kPressButton) {
    const auto& target = s.colors[static_cast<std::size_t>(s.variation)];
    std::vector<std::string> others;
    for (const auto& o : s.objects) {
      if (o.shape == Shape::kButton && o.color != target) others.push_back(o.color);
    }
    std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
    return "push the " + others[pick(rng)] + " button";
  }
  const int n = variation_count(s.task, cfg);
  std::uniform_int_distribution<int> shift(1, n - 1);
  return goal_for(s.task, (s.variation + shift(rng)) % n, cfg);
}

[[nodiscard]] inline EpisodeResult run_episode(Agent& agent, TaskId task, int variation, std::uint64_t seed,
                                               const EnvConfig& cfg, int max_steps, GoalMode mode = GoalMode::kCorrect) {
  SceneState s = reset_scene(task, variation, seed, cfg);
  EpisodeResult r;
  r.task = task;
  r.variation = variation;
  r.seed = seed;
  std::mt19937_64 goal_rng(seed ^ 0x60a1ULL);
  r.goal = mode == GoalMode::kCorrect ? goal_for(task, variation, cfg) : swapped_goal(s, cfg, goal_rng);
  agent.begin_episode(s, cfg);
  const auto cams = cfg.cameras();
  r.termination = Termination::kStepLimit;
  for (int t = 0; t < max_steps; ++t) {
    Observation obs{render_all(s, cams), observe_proprio(s), r.goal, t};
    Termination term;
    try {
      term = step(s, agent.act(obs), cfg);
    } catch (const InvalidInput&) {
      term = Termination::kInvalidAction;
    }
    r.steps_taken = t + 1;
    if (term != Termination::kRunning) {
      r.termination = term;
      break;
    }
  }
  r.score = r.termination == Termination::kSuccess ? 100 : 0;
  return r;
}

/// Episode e of a task uses seed (base, task, e) and a variation drawn from it.
[[nodiscard]] inline std::uint64_t episode_seed(std::uint64_t base, TaskId task, int episode) {
  std::uint64_t z = base * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(task) * 0x632be59bd9b4e019ULL +
                    static_cast<std::uint64_t>(episode) + 1;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct EvalOptions {
  int episodes_per_task = 25;
  int max_steps = 25;
  std::uint64_t seed = 0;
  GoalMode goal_mode = GoalMode::kCorrect;
};

[[nodiscard]] inline std::vector<EpisodeResult> evaluate(Agent& agent, const std::vector<TaskId>& tasks,
                                                         const EnvConfig& cfg, const EvalOptions& opt) {
  std::vector<EpisodeResult> results;
  for (TaskId task : tasks) {
    for (int e = 0; e < opt.episodes_per_task; ++e) {
      const auto seed = episode_seed(opt.seed, task, e);
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> var(0, variation_count(task, cfg) - 1);
      results.push_back(run_episode(agent, task, var(rng), seed, cfg, opt.max_steps, opt.goal_mode));
    }
  }
  return results;
}

[[nodiscard]] inline double mean_score(const std::vector<EpisodeResult>& results, std::optional<TaskId> task = {}) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : results) {
    if (task && r.task != *task) continue;
    sum += r.score;
    ++n;
  }
  return n ? sum / n : 0.0;
}

/// Rows of (task, variation, episodes, mean score, termination histogram);
/// variation "all" aggregates a task.
[[nodiscard]] inline nlohmann::json report_json(const std::vector<EpisodeResult>& results, const std::string& agent) {
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::vector<const EpisodeResult*>> groups;
  for (const auto& r : results) {
    groups[{task_name(r.task), std::to_string(r.variation)}].push_back(&r);
    groups[{task_name(r.task), "all"}].push_back(&r);
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [key, rs] : groups) {
    nlohmann::json hist = {{"success", 0}, {"step-limit", 0}, {"invalid-action", 0}};
    double sum = 0.0;
    for (const auto* r : rs) {
      hist[termination_name(r->termination)] = hist[termination_name(r->termination)].get<int>() + 1;
      sum += r->score;
    }
    rows.push_back({{"task", key.first},
                    {"variation", key.second},
                    {"episodes", rs.size()},
                    {"mean_score", sum / static_cast<double>(rs.size())},
                    {"terminations", hist}});
  }
  return {{"agent", agent}, {"rows", rows}};
}

}  // namespace peract::toy

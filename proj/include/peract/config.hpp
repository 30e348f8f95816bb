#pragma once

// Run configuration: "key = value" lines, '#' starts a comment. Keys are
// grouped by prefix (policy., train., data., env., eval.). Later sources
// override earlier ones: file < --set flags < dedicated flags such as --seed.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "peract/errors.hpp"
#include "peract/policy_config.hpp"
#include "peract/toyworld/world.hpp"
#include "peract/trainer.hpp"

namespace peract {

struct DataConfig {
  std::string path;
  std::vector<toy::TaskId> tasks{std::begin(toy::kAllTasks), std::end(toy::kAllTasks)};
  int episodes_per_task = 10;
  std::uint64_t seed = 0;
};

struct EvalConfig {
  std::vector<toy::TaskId> tasks{std::begin(toy::kAllTasks), std::end(toy::kAllTasks)};
  int episodes_per_task = 25;
  int max_steps = 25;
  std::uint64_t seed = 0;
  std::string agent = "policy";  // policy | random | replay-expert
  std::string goal_mode = "correct";  // correct | swapped
  std::string checkpoint;
};

[[nodiscard]] inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

[[nodiscard]] inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Reads "key = value" pairs. Malformed lines are reported together.
[[nodiscard]] inline KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read config file '" + path.string() + "'");
  KeyValues kv;
  std::vector<std::string> bad;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty()) {
      bad.push_back(path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  if (!bad.empty()) {
    std::string msg = "config errors:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw InvalidInput(msg);
  }
  return kv;
}

/// Parses "key=value" as given to --set.
[[nodiscard]] inline std::pair<std::string, std::string> parse_override(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw InvalidInput("override '" + s + "' must look like key=value");
  return {trim(s.substr(0, eq)), trim(s.substr(eq + 1))};
}

struct RunConfig {
  PolicyConfig policy;
  TrainConfig train;
  DataConfig data;
  toy::EnvConfig env;
  EvalConfig eval;

  RunConfig() {
    // Desk-scale defaults: the toy world's 32^3 grid and a small text encoder.
    policy.grid_size = 32;
    policy.patch_size = 4;
    policy.num_latents = 512;
    policy.latent_dim = 64;
    policy.num_self_attn_layers = 2;
    policy.voxel_feature_dim = 16;
    policy.embed_dim = 32;
    policy.num_lang_tokens = 8;
    policy.lang_feature_dim = 32;
    policy.num_attention_heads = 4;
    policy.cross_head_dim = 32;
    train.batch_size = 4;
    train.total_iterations = 5000;
    train.checkpoint_interval = 1000;
    sync();
  }

  /// Applies every pair; collects unknown keys and unparsable values and
  /// reports them all in one exception.
  void apply(const KeyValues& kv) {
    const auto table = setters();
    std::vector<std::string> errors;
    for (const auto& [k, v] : kv) {
      const auto it = table.find(k);
      if (it == table.end()) {
        errors.push_back("unknown key '" + k + "'");
        continue;
      }
      try {
        it->second(v);
      } catch (const std::exception& e) {
        errors.push_back("bad value '" + v + "' for '" + k + "': " + e.what());
      }
    }
    if (!errors.empty()) {
      std::string msg = "config errors:";
      for (const auto& e : errors) msg += "\n  " + e;
      throw InvalidInput(msg);
    }
    sync();
  }

  void set(const std::string& key, const std::string& value) { apply({{key, value}}); }

  void validate() const {
    policy.validate();
    train.validate();
    env.validate();
    if (data.episodes_per_task < 0) throw InvalidInput("data.episodes_per_task must be >= 0");
    if (eval.episodes_per_task < 0 || eval.max_steps < 1) throw InvalidInput("eval: episodes >= 0 and max_steps >= 1");
    if (eval.agent != "policy" && eval.agent != "random" && eval.agent != "replay-expert") {
      throw InvalidInput("eval.agent must be policy, random or replay-expert");
    }
    if (eval.goal_mode != "correct" && eval.goal_mode != "swapped") {
      throw InvalidInput("eval.goal_mode must be correct or swapped");
    }
  }

  /// Every key with its resolved value; reading this back reproduces the config.
  [[nodiscard]] KeyValues to_map() const {
    KeyValues kv;
    for (const auto& [k, v] : policy.to_map()) kv["policy." + k] = v;
    const auto d = [](double x) { return PolicyConfig::format_double(x); };
    kv["train.batch_size"] = std::to_string(train.batch_size);
    kv["train.total_iterations"] = std::to_string(train.total_iterations);
    kv["train.learning_rate"] = d(train.optimizer.lr);
    kv["train.optimizer"] = to_string(train.optimizer.kind);
    kv["train.beta1"] = d(train.optimizer.beta1);
    kv["train.beta2"] = d(train.optimizer.beta2);
    kv["train.eps"] = d(train.optimizer.eps);
    kv["train.weight_decay"] = d(train.optimizer.weight_decay);
    kv["train.max_trust_ratio"] = d(train.optimizer.max_trust_ratio);
    kv["train.grad_clip_norm"] = d(train.optimizer.grad_clip_norm);
    kv["train.warmup_steps"] = std::to_string(train.optimizer.warmup_steps);
    kv["train.lr_decay_steps"] = std::to_string(train.optimizer.decay_steps);
    kv["train.min_lr_ratio"] = d(train.optimizer.min_lr_ratio);
    kv["train.aug_trans_range"] = d(train.aug_trans_range.x()) + "," + d(train.aug_trans_range.y()) + "," +
                                  d(train.aug_trans_range.z());
    kv["train.aug_yaw_range_deg"] = d(train.aug_yaw_range_deg);
    kv["train.checkpoint_interval"] = std::to_string(train.checkpoint_interval);
    kv["train.seed"] = std::to_string(train.seed);
    kv["train.vel_epsilon"] = d(train.vel_epsilon);
    kv["train.log_interval"] = std::to_string(train.log_interval);
    kv["data.path"] = data.path;
    kv["data.tasks"] = join_tasks(data.tasks);
    kv["data.episodes_per_task"] = std::to_string(data.episodes_per_task);
    kv["data.seed"] = std::to_string(data.seed);
    kv["env.num_cameras"] = std::to_string(env.num_cameras);
    kv["env.image_size"] = std::to_string(env.image_size);
    kv["env.colors"] = env.colors.empty() ? "all" : join(env.colors);
    kv["env.grasp_radius_voxels"] = d(env.grasp_radius_voxels);
    kv["env.press_radius_voxels"] = d(env.press_radius_voxels);
    kv["eval.tasks"] = join_tasks(eval.tasks);
    kv["eval.episodes_per_task"] = std::to_string(eval.episodes_per_task);
    kv["eval.max_steps"] = std::to_string(eval.max_steps);
    kv["eval.seed"] = std::to_string(eval.seed);
    kv["eval.agent"] = eval.agent;
    kv["eval.goal_mode"] = eval.goal_mode;
    kv["eval.checkpoint"] = eval.checkpoint;
    return kv;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    for (const auto& [k, v] : to_map()) out << k << " = " << v << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
  }

  [[nodiscard]] static RunConfig load(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
    RunConfig c;
    if (!path.empty()) c.apply(read_key_values(path));
    KeyValues kv;
    for (const auto& o : overrides) kv.insert_or_assign(parse_override(o).first, parse_override(o).second);
    c.apply(kv);
    return c;
  }

private:
  // The toy world decodes actions on the policy's grid.
  void sync() {
    env.grid_size = policy.grid_size;
    env.bin_deg = policy.rotation_bin_deg;
  }

  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return s;
  }
  static std::string join_tasks(const std::vector<toy::TaskId>& v) {
    std::vector<std::string> names;
    for (auto t : v) names.emplace_back(toy::task_name(t));
    return join(names);
  }
  static std::vector<toy::TaskId> parse_tasks(const std::string& s) {
    std::vector<toy::TaskId> out;
    for (const auto& name : split_list(s)) out.push_back(toy::parse_task(name));
    return out;
  }

  static int to_int(const std::string& s) {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw InvalidInput("not an integer");
    return v;
  }
  static std::int64_t to_i64(const std::string& s) {
    std::size_t pos = 0;
    const auto v = std::stoll(s, &pos);
    if (pos != s.size()) throw InvalidInput("not an integer");
    return v;
  }
  static std::uint64_t to_u64(const std::string& s) {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos, 0);
    if (pos != s.size()) throw InvalidInput("not an unsigned integer");
    return v;
  }
  static double to_double(const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw InvalidInput("not a number");
    return v;
  }

  std::map<std::string, std::function<void(const std::string&)>> setters() {
    std::map<std::string, std::function<void(const std::string&)>> t;
    for (const auto& [k, unused] : policy.to_map()) {
      t["policy." + k] = [this, key = k](const std::string& v) {
        if (!policy.set(key, v)) throw InvalidInput("unknown policy key");
      };
    }
    t["train.batch_size"] = [this](const std::string& v) { train.batch_size = to_int(v); };
    t["train.total_iterations"] = [this](const std::string& v) { train.total_iterations = to_i64(v); };
    t["train.learning_rate"] = [this](const std::string& v) { train.optimizer.lr = to_double(v); };
    t["train.optimizer"] = [this](const std::string& v) { train.optimizer.kind = parse_optimizer(v); };
    t["train.beta1"] = [this](const std::string& v) { train.optimizer.beta1 = to_double(v); };
    t["train.beta2"] = [this](const std::string& v) { train.optimizer.beta2 = to_double(v); };
    t["train.eps"] = [this](const std::string& v) { train.optimizer.eps = to_double(v); };
    t["train.weight_decay"] = [this](const std::string& v) { train.optimizer.weight_decay = to_double(v); };
    t["train.max_trust_ratio"] = [this](const std::string& v) { train.optimizer.max_trust_ratio = to_double(v); };
    t["train.grad_clip_norm"] = [this](const std::string& v) { train.optimizer.grad_clip_norm = to_double(v); };
    t["train.warmup_steps"] = [this](const std::string& v) { train.optimizer.warmup_steps = to_int(v); };
    t["train.lr_decay_steps"] = [this](const std::string& v) { train.optimizer.decay_steps = to_i64(v); };
    t["train.min_lr_ratio"] = [this](const std::string& v) { train.optimizer.min_lr_ratio = to_double(v); };
    t["train.aug_trans_range"] = [this](const std::string& v) {
      const auto parts = split_list(v);
      if (parts.size() == 1) {
        train.aug_trans_range = Vec3::Constant(to_double(parts[0]));
      } else if (parts.size() == 3) {
        for (int a = 0; a < 3; ++a) train.aug_trans_range[a] = to_double(parts[static_cast<std::size_t>(a)]);
      } else {
        throw InvalidInput("expected one or three comma-separated values");
      }
    };
    t["train.aug_yaw_range_deg"] = [this](const std::string& v) { train.aug_yaw_range_deg = to_double(v); };
    t["train.checkpoint_interval"] = [this](const std::string& v) { train.checkpoint_interval = to_i64(v); };
    t["train.seed"] = [this](const std::string& v) { train.seed = to_u64(v); };
    t["train.vel_epsilon"] = [this](const std::string& v) { train.vel_epsilon = to_double(v); };
    t["train.log_interval"] = [this](const std::string& v) { train.log_interval = to_int(v); };
    t["data.path"] = [this](const std::string& v) { data.path = v; };
    t["data.tasks"] = [this](const std::string& v) { data.tasks = parse_tasks(v); };
    t["data.episodes_per_task"] = [this](const std::string& v) { data.episodes_per_task = to_int(v); };
    t["data.seed"] = [this](const std::string& v) { data.seed = to_u64(v); };
    t["env.num_cameras"] = [this](const std::string& v) { env.num_cameras = to_int(v); };
    t["env.image_size"] = [this](const std::string& v) { env.image_size = to_int(v); };
    t["env.colors"] = [this](const std::string& v) {
      env.colors = v == "all" ? std::vector<std::string>{} : split_list(v);
      for (const auto& c : env.colors) (void)toy::color_rgb(c);
    };
    t["env.grasp_radius_voxels"] = [this](const std::string& v) { env.grasp_radius_voxels = to_double(v); };
    t["env.press_radius_voxels"] = [this](const std::string& v) { env.press_radius_voxels = to_double(v); };
    t["eval.tasks"] = [this](const std::string& v) { eval.tasks = parse_tasks(v); };
    t["eval.episodes_per_task"] = [this](const std::string& v) { eval.episodes_per_task = to_int(v); };
    t["eval.max_steps"] = [this](const std::string& v) { eval.max_steps = to_int(v); };
    t["eval.seed"] = [this](const std::string& v) { eval.seed = to_u64(v); };
    t["eval.agent"] = [this](const std::string& v) { eval.agent = v; };
    t["eval.goal_mode"] = [this](const std::string& v) { eval.goal_mode = v; };
    t["eval.checkpoint"] = [this](const std::string& v) { eval.checkpoint = v; };
    return t;
  }
};

}  // namespace peract

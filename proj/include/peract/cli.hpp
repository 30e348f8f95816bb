#pragma once

// Subcommand bodies behind tools/peract_cli. Each takes a resolved RunConfig
// plus command-specific options and writes its outputs under `out`.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "peract/checkpoint.hpp"
#include "peract/config.hpp"
#include "peract/dataset_io.hpp"
#include "peract/demo_pipeline.hpp"
#include "peract/toyworld/evaluate.hpp"
#include "peract/trainer.hpp"

namespace peract::cli {

inline constexpr const char* kConfigSnapshot = "resolved_config.cfg";

/// Creates `dir` and proves it is writable before any long work starts.
inline void ensure_writable_dir(const std::filesystem::path& dir) {
  if (dir.empty()) throw InvalidInput("an output path is required (--out)");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw std::runtime_error("output path '" + dir.string() + "' is not a writable directory");
  }
  const auto probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out || !(out << "ok")) throw std::runtime_error("output path '" + dir.string() + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

inline CodecConfig codec_for(const RunConfig& c) { return {c.env.bounds(), c.policy.rotation_bin_deg}; }

// ---------------------------------------------------------------- generate

struct GenerateSummary {
  struct Row {
    std::string task;
    int demos = 0;
    std::size_t keyframes = 0;
    std::size_t tuples = 0;
  };
  std::vector<Row> rows;
};

/// Scripted-expert demos for every task in data.tasks. Episode seeds follow
/// the same derivation as evaluation, offset by data.seed.
[[nodiscard]] inline std::vector<DemoEpisode> generate_episodes(const RunConfig& c) {
  std::vector<DemoEpisode> episodes;
  for (toy::TaskId task : c.data.tasks) {
    for (int e = 0; e < c.data.episodes_per_task; ++e) {
      const auto seed = toy::episode_seed(c.data.seed, task, e);
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> var(0, toy::variation_count(task, c.env) - 1);
      const auto scene = toy::reset_scene(task, var(rng), seed, c.env);
      episodes.push_back(toy::scripted_expert(scene, c.env));
    }
  }
  return episodes;
}

inline GenerateSummary cmd_generate(const RunConfig& c, const std::filesystem::path& out, std::FILE* log = stdout) {
  c.validate();
  ensure_writable_dir(out);
  c.write(out / kConfigSnapshot);
  const auto episodes = generate_episodes(c);
  GenerateSummary summary;
  for (toy::TaskId task : c.data.tasks) summary.rows.push_back({toy::task_name(task)});
  for (const auto& ep : episodes) {
    auto row = std::find_if(summary.rows.begin(), summary.rows.end(), [&](const auto& r) { return r.task == ep.task_id; });
    const auto kf = extract_keyframes(ep, c.train.vel_epsilon);
    ++row->demos;
    row->keyframes += kf.size();
    row->tuples += kf.empty() ? 0 : kf.back();
  }
  save_dataset(episodes, out);
  if (log) {
    for (const auto& r : summary.rows) {
      std::fprintf(log, "%-14s demos %3d  keyframes %4zu  tuples %5zu\n", r.task.c_str(), r.demos, r.keyframes, r.tuples);
    }
    std::fprintf(log, "wrote %zu episodes to %s\n", episodes.size(), out.string().c_str());
  }
  return summary;
}

// ------------------------------------------------------------------- train

struct TrainOptions {
  std::filesystem::path resume;
};

inline TrainResult cmd_train(const RunConfig& c, const std::filesystem::path& out, const TrainOptions& opt = {},
                             std::FILE* log = stdout) {
  c.validate();
  if (c.data.path.empty()) throw InvalidInput("train needs a dataset (--data or data.path)");
  if (!std::filesystem::exists(std::filesystem::path(c.data.path) / "manifest.json")) {
    throw InvalidInput("no dataset manifest under '" + c.data.path + "'");
  }
  if (!opt.resume.empty() && !std::filesystem::exists(opt.resume)) {
    throw InvalidInput("resume checkpoint '" + opt.resume.string() + "' does not exist");
  }
  ensure_writable_dir(out);
  c.write(out / kConfigSnapshot);
  const auto episodes = load_dataset(c.data.path);
  if (episodes.empty()) throw InvalidInput("dataset '" + c.data.path + "' has no episodes");
  auto data = std::make_shared<const TrainingSet>(episodes, codec_for(c), c.train.vel_epsilon);
  Trainer trainer(c.policy, c.train, data);
  if (!opt.resume.empty()) trainer.resume(opt.resume);
  if (log) {
    std::fprintf(log, "training on %zu tuples over %zu tasks, %lld parameters, from iteration %lld\n",
                 data->total_tuples(), data->num_tasks(), static_cast<long long>(trainer.policy().parameter_count()),
                 static_cast<long long>(trainer.iteration()));
  }
  const auto r = trainer.run(out, log);
  if (log) {
    std::fprintf(log, "%s at iteration %lld, last loss %.6f, checkpoint %s\n",
                 r.interrupted ? "interrupted" : "finished", static_cast<long long>(r.iterations), r.last_loss.total(),
                 r.final_checkpoint.string().c_str());
  }
  return r;
}

// -------------------------------------------------------------------- eval

struct EvalSummary {
  std::vector<toy::EpisodeResult> results;
  nlohmann::json report;
};

inline EvalSummary cmd_eval(RunConfig c, const std::filesystem::path& out, std::FILE* log = stdout) {
  std::unique_ptr<toy::Agent> agent;
  if (c.eval.agent == "policy") {
    if (c.eval.checkpoint.empty()) throw InvalidInput("eval with the policy agent needs --checkpoint");
    auto policy = std::make_shared<const PerceiverPolicy<float>>(load_policy(c.eval.checkpoint));
    // The environment decodes actions on the checkpoint's grid.
    c.policy = policy->config();
    c.set("policy.grid_size", std::to_string(c.policy.grid_size));
    agent = std::make_unique<toy::PolicyAgent>(policy);
  } else if (c.eval.agent == "random") {
    agent = std::make_unique<toy::RandomAgent>(c.env.grid_size, c.env.bin_deg, c.eval.seed ^ 0x5eedULL);
  } else if (c.eval.agent == "replay-expert") {
    agent = std::make_unique<toy::ReplayExpertAgent>();
  }
  c.validate();
  ensure_writable_dir(out);
  c.write(out / kConfigSnapshot);
  toy::EvalOptions opt;
  opt.episodes_per_task = c.eval.episodes_per_task;
  opt.max_steps = c.eval.max_steps;
  opt.seed = c.eval.seed;
  opt.goal_mode = c.eval.goal_mode == "swapped" ? toy::GoalMode::kSwapped : toy::GoalMode::kCorrect;
  EvalSummary s;
  s.results = toy::evaluate(*agent, c.eval.tasks, c.env, opt);
  s.report = toy::report_json(s.results, agent->name());
  s.report["goal_mode"] = c.eval.goal_mode;
  s.report["seed"] = c.eval.seed;
  std::ofstream f(out / "report.json");
  if (!f || !(f << s.report.dump(2) << '\n')) throw std::runtime_error("cannot write " + (out / "report.json").string());
  if (log) {
    for (toy::TaskId t : c.eval.tasks) {
      std::fprintf(log, "%-14s %6.1f\n", toy::task_name(t), toy::mean_score(s.results, t));
    }
    std::fprintf(log, "report: %s\n", (out / "report.json").string().c_str());
  }
  return s;
}

// --------------------------------------------------- predict and inspect

struct TupleRef {
  std::size_t episode = 0;
  std::size_t tuple = 0;
};

struct LoadedTuple {
  DemoEpisode episode;
  TrainingTuple tuple;
  std::size_t tuple_count = 0;
};

/// Tuple `ref.tuple` of episode `ref.episode`, as the trainer would build it.
[[nodiscard]] inline LoadedTuple load_tuple(const std::filesystem::path& data, const TupleRef& ref,
                                            const CodecConfig& codec, double vel_eps) {
  const auto dirs = dataset_episode_dirs(data);
  if (ref.episode >= dirs.size()) {
    throw InvalidInput("tuple not found: dataset has " + std::to_string(dirs.size()) + " episodes, asked for episode " +
                       std::to_string(ref.episode));
  }
  LoadedTuple out;
  out.episode = load_episode(dirs[ref.episode]);
  const auto kf = extract_keyframes(out.episode, vel_eps);
  const auto specs = make_tuple_specs(out.episode, kf, codec);
  out.tuple_count = specs.size();
  if (ref.tuple >= specs.size()) {
    throw InvalidInput("tuple not found: episode " + std::to_string(ref.episode) + " has " +
                       std::to_string(specs.size()) + " tuples, asked for tuple " + std::to_string(ref.tuple));
  }
  out.tuple = materialize_tuple(out.episode, specs[ref.tuple], codec);
  return out;
}

/// A goal from another episode of the same task with different wording;
/// for press_button that is a different button colour. Toy tasks fall back
/// to the environment's other variations when the dataset has none.
[[nodiscard]] inline std::string swapped_dataset_goal(const std::filesystem::path& data, const DemoEpisode& ep,
                                                      const toy::EnvConfig& env, std::uint64_t seed) {
  std::vector<std::string> others;
  for (const auto& dir : dataset_episode_dirs(data)) {
    const auto j = detail::read_json(dir / "episode.json");
    const auto goal = j.at("language_goal").get<std::string>();
    if (j.at("task_id").get<std::string>() == ep.task_id && goal != ep.language_goal &&
        std::find(others.begin(), others.end(), goal) == others.end()) {
      others.push_back(goal);
    }
  }
  if (others.empty()) {
    try {
      const auto task = toy::parse_task(ep.task_id);
      for (int v = 0; v < toy::variation_count(task, env); ++v) {
        if (auto g = toy::goal_for(task, v, env); g != ep.language_goal) others.push_back(g);
      }
    } catch (const InvalidInput&) {
    }
  }
  if (others.empty()) throw InvalidInput("no other goal for task '" + ep.task_id + "' in the dataset to swap in");
  std::sort(others.begin(), others.end());
  std::mt19937_64 rng(seed);
  return others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng)];
}

[[nodiscard]] inline nlohmann::json action_json(const DiscreteAction& d, const WorkspaceBounds& b, double bin_deg) {
  const auto a = undiscretize(d, b, bin_deg);
  const auto e = quat_to_euler(a.orientation);
  return {{"voxel", {d.trans_index.x, d.trans_index.y, d.trans_index.z}},
          {"rot_bins", {d.rot_indices[0], d.rot_indices[1], d.rot_indices[2]}},
          {"open", d.open},
          {"collide", d.collide},
          {"position", {a.position.x(), a.position.y(), a.position.z()}},
          {"euler_deg", {e.x, e.y, e.z}}};
}

struct PredictOptions {
  std::filesystem::path checkpoint;
  TupleRef ref;
  std::string goal_mode = "correct";  // correct | swapped
  std::string goal_text;              // overrides goal_mode when set
};

struct Prediction {
  LoadedTuple input;
  std::string goal;
  QPrediction<float> q;
  DiscreteAction best;
  WorkspaceBounds bounds;
  double bin_deg = 5.0;
};

[[nodiscard]] inline Prediction run_prediction(const RunConfig& c, const PredictOptions& opt) {
  if (opt.checkpoint.empty()) throw InvalidInput("--checkpoint is required");
  if (c.data.path.empty()) throw InvalidInput("a dataset is required (--data or data.path)");
  const auto policy = load_policy(opt.checkpoint);
  Prediction p;
  p.bounds = c.env.bounds();
  p.bounds.grid_size = policy.config().grid();
  p.bin_deg = policy.config().rotation_bin_deg;
  p.input = load_tuple(c.data.path, opt.ref, {p.bounds, p.bin_deg}, c.train.vel_epsilon);
  if (!opt.goal_text.empty()) {
    p.goal = opt.goal_text;
  } else if (opt.goal_mode == "swapped") {
    p.goal = swapped_dataset_goal(c.data.path, p.input.episode, c.env, c.eval.seed);
  } else if (opt.goal_mode == "correct") {
    p.goal = p.input.tuple.language_goal;
  } else {
    throw InvalidInput("goal mode must be correct or swapped");
  }
  p.q = policy.forward(p.input.tuple.voxel_obs, p.input.tuple.proprio, p.goal);
  p.best = select_best_action(p.q);
  return p;
}

inline nlohmann::json cmd_predict(const RunConfig& c, const PredictOptions& opt, const std::filesystem::path& out,
                                  std::FILE* log = stdout) {
  ensure_writable_dir(out);
  const auto p = run_prediction(c, opt);
  nlohmann::json j = {{"episode", opt.ref.episode},
                      {"tuple", opt.ref.tuple},
                      {"goal", p.goal},
                      {"prediction", action_json(p.best, p.bounds, p.bin_deg)},
                      {"label", action_json(p.input.tuple.target, p.bounds, p.bin_deg)},
                      {"matches_label", p.best == p.input.tuple.target}};
  std::ofstream f(out / "prediction.json");
  if (!f || !(f << j.dump(2) << '\n')) throw std::runtime_error("cannot write prediction.json");
  if (log) std::fprintf(log, "%s\n", j.dump(2).c_str());
  return j;
}

/// softmax(q_trans) laid out as the voxel grid.
[[nodiscard]] inline std::vector<double> trans_distribution(const QPrediction<float>& q) {
  const double mx = q.q_trans.maxCoeff();
  std::vector<double> p(static_cast<std::size_t>(q.q_trans.size()));
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(q.q_trans[static_cast<Eigen::Index>(i)] - mx);
  for (auto& v : p) v /= z;
  return p;
}

/// Max-projection of a grid-shaped distribution along `axis`; rows and
/// columns are the remaining two axes in order.
[[nodiscard]] inline Eigen::MatrixXd max_projection(const std::vector<double>& p, const std::array<int, 3>& g, int axis) {
  const int r_axis = axis == 0 ? 1 : 0;
  const int c_axis = axis == 2 ? 1 : 2;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(g[static_cast<std::size_t>(r_axis)], g[static_cast<std::size_t>(c_axis)]);
  for (int x = 0; x < g[0]; ++x) {
    for (int y = 0; y < g[1]; ++y) {
      for (int z = 0; z < g[2]; ++z) {
        const int idx[3] = {x, y, z};
        const double v = p[static_cast<std::size_t>((x * g[1] + y) * g[2] + z)];
        double& cell = m(idx[r_axis], idx[c_axis]);
        cell = std::max(cell, v);
      }
    }
  }
  return m;
}

inline void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  out << "P5\n" << m.cols() << ' ' << m.rows() << "\n255\n";
  const double top = m.maxCoeff() > 0 ? m.maxCoeff() : 1.0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.put(static_cast<char>(std::lround(255.0 * m(r, c) / top)));
  }
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

struct InspectResult {
  Prediction prediction;
  std::array<Eigen::MatrixXd, 3> projections;  // along x, y, z
};

inline InspectResult cmd_inspect(const RunConfig& c, const PredictOptions& opt, const std::filesystem::path& out,
                                 std::FILE* log = stdout) {
  ensure_writable_dir(out);
  InspectResult r{run_prediction(c, opt), {}};
  const auto& p = r.prediction;
  const auto dist = trans_distribution(p.q);
  static const char* kAxis[3] = {"x", "y", "z"};
  std::ofstream csv(out / "q_trans_projections.csv");
  csv << "axis,row,col,value\n";
  for (int a = 0; a < 3; ++a) {
    r.projections[static_cast<std::size_t>(a)] = max_projection(dist, p.q.grid, a);
    const auto& m = r.projections[static_cast<std::size_t>(a)];
    write_pgm(out / (std::string("q_trans_max_") + kAxis[a] + ".pgm"), m);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) csv << kAxis[a] << ',' << i << ',' << j << ',' << m(i, j) << '\n';
    }
  }
  if (!csv) throw std::runtime_error("cannot write q_trans_projections.csv");

  std::vector<std::size_t> order(dist.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t k = std::min<std::size_t>(5, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
  const auto& label = p.input.tuple.target;
  std::ofstream txt(out / "summary.txt");
  txt << "episode " << opt.ref.episode << " tuple " << opt.ref.tuple << " of " << p.input.tuple_count << '\n';
  txt << "goal: " << p.goal << '\n';
  txt << "label goal: " << p.input.tuple.language_goal << '\n';
  txt << "argmax voxel: " << p.best.trans_index.x << ' ' << p.best.trans_index.y << ' ' << p.best.trans_index.z << '\n';
  txt << "label voxel: " << label.trans_index.x << ' ' << label.trans_index.y << ' ' << label.trans_index.z << '\n';
  txt << "argmax equals label: " << (p.best.trans_index == label.trans_index ? "yes" : "no") << '\n';
  txt << "full action equals label: " << (p.best == label ? "yes" : "no") << '\n';
  txt << "top voxels:\n";
  WorkspaceBounds shape;
  shape.grid_size = p.q.grid;
  for (std::size_t i = 0; i < k; ++i) {
    const auto v = shape.unflat(static_cast<Eigen::Index>(order[i]));
    txt << "  " << v.x << ' ' << v.y << ' ' << v.z << "  p=" << dist[order[i]] << '\n';
  }
  if (!txt) throw std::runtime_error("cannot write summary.txt");
  if (log) {
    std::fprintf(log, "argmax %d %d %d, label %d %d %d, wrote heatmaps to %s\n", p.best.trans_index.x,
                 p.best.trans_index.y, p.best.trans_index.z, label.trans_index.x, label.trans_index.y,
                 label.trans_index.z, out.string().c_str());
  }
  return r;
}

}  // namespace peract::cli

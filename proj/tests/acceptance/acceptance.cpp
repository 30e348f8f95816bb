// Acceptance checks. One PASS/FAIL line per requested criterion; the exit
// status is non-zero when any requested criterion fails.
//
//   acceptance [--criteria 1,2,...] [--work-dir DIR] [--skip-full-scale]

#include <sys/resource.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "peract/cli.hpp"
#include "support/oracles.hpp"

using namespace peract;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double peak_rss_gb() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return static_cast<double>(u.ru_maxrss) / (1024.0 * 1024.0);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1 ---------------------------------------------------------------------------
Outcome shapes(bool skip_full_scale) {
  const auto t0 = std::chrono::steady_clock::now();
  {
    const auto cfg = oracle::tiny_config();
    PerceiverPolicy<float> p(cfg);
    std::mt19937_64 rng(1);
    const auto grid = oracle::random_grid(WorkspaceBounds::cube(Vec3::Zero(), 1.0, cfg.grid_size), 50, rng);
    const auto q = p.forward(grid, {1, 0, 0, 0}, "push the red button");
    if (q.q_trans.size() != 512 || q.q_rot.rows() != 72 || q.q_rot.cols() != 3 || !q.all_finite()) {
      return {false, "tiny-config head shapes are wrong"};
    }
    const auto q2 = p.forward(grid, {1, 0, 0, 0}, "push the red button");
    if (q2.q_trans != q.q_trans) return {false, "tiny-config forward is not deterministic"};
  }
  const double tiny_secs = seconds_since(t0);
  if (tiny_secs >= 30.0) return {false, fmt("tiny shape suite took %.1fs (limit 30s)", tiny_secs)};
  if (skip_full_scale) return {true, fmt("tiny suite %.2fs; full-size pass SKIPPED by --skip-full-scale", tiny_secs)};

  const PolicyConfig full;  // defaults are the full-size configuration
  const auto t1 = std::chrono::steady_clock::now();
  PerceiverPolicy<float> p(full);
  std::mt19937_64 rng(2);
  const auto grid = oracle::random_grid(WorkspaceBounds::cube(Vec3::Zero(), 1.0, full.grid_size), 20000, rng);
  const auto lang = p.encode_language("push the maroon button");
  const auto pre = p.preprocess(grid, {1, 0.04f, 0.04f, 0}, lang);
  const auto out = p.latent_transform(pre.sequence);
  const auto q = p.decode(out, pre.skip);
  const bool ok = pre.sequence.rows() == 8077 && pre.sequence.cols() == 128 && out.rows() == 8077 &&
                  q.q_trans.size() == 1000000 && q.grid == std::array<int, 3>{100, 100, 100} && q.q_rot.rows() == 72 &&
                  q.q_rot.cols() == 3 && q.q_open.size() == 2 && q.q_collide.size() == 2 && q.all_finite();
  const double gb = peak_rss_gb();
  return {ok && gb < 16.0,
          fmt("sequence %ldx%ld, q_trans %ld, q_rot %ldx%ld, peak RSS %.2f GB, full-size forward %.1fs, tiny suite %.2fs",
              static_cast<long>(pre.sequence.rows()), static_cast<long>(pre.sequence.cols()),
              static_cast<long>(q.q_trans.size()), static_cast<long>(q.q_rot.rows()),
              static_cast<long>(q.q_rot.cols()), gb, seconds_since(t1), tiny_secs)};
}

// 2 ---------------------------------------------------------------------------
Outcome codec_round_trip() {
  const auto b = WorkspaceBounds::cube(Vec3::Zero(), 1.0, 100);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  int failures = 0;
  double worst_pos = 0.0, worst_rot = 0.0;
  for (int i = 0; i < 10000; ++i) {
    ContinuousAction a;
    for (int k = 0; k < 3; ++k) a.position[k] = u(rng) * (1.0 - 1e-9);
    a.orientation = Quat(g(rng), g(rng), g(rng), g(rng)).normalized();
    a.open = u(rng) < 0.5;
    a.collide = u(rng) < 0.5;
    const auto d = discretize(a, b, 5.0);
    const auto back = undiscretize(d, b, 5.0);
    const double pos = (back.position - a.position).cwiseAbs().maxCoeff();
    const auto e = quat_to_euler(a.orientation);
    double rot = 0.0;
    for (int k = 0; k < 3; ++k) {
      rot = std::max(rot, angular_distance_deg(e[k], bin_center_deg(d.rot_indices[static_cast<std::size_t>(k)], 5.0)));
    }
    worst_pos = std::max(worst_pos, pos);
    worst_rot = std::max(worst_rot, rot);
    if (pos > 0.5 * b.edge_length() + 1e-12 || rot > 2.5 + 1e-9 || back.open != a.open || back.collide != a.collide) {
      ++failures;
    }
  }
  return {failures == 0, fmt("10000 samples, %d failures, worst position error %.5f m (limit 0.005), worst angle "
                             "error %.4f deg (limit 2.5)",
                             failures, worst_pos, worst_rot)};
}

// 3 ---------------------------------------------------------------------------
Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = oracle::tiny_config();
  PerceiverPolicy<double> p(cfg);
  std::mt19937_64 rng(3);
  const auto grid = oracle::random_grid(WorkspaceBounds::cube(Vec3::Zero(), 1.0, cfg.grid_size), 60, rng);
  DiscreteAction target;
  target.trans_index = {1, 6, 3};
  target.rot_indices = {71, 3, 40};
  target.open = false;
  target.collide = true;
  const auto errs = oracle::gradient_check(p, grid, {1.0f, 0.04f, 0.04f, 0.25f}, p.encode_language("stack two blocks"),
                                           target);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& e : errs) {
    if (e.relative >= worst) {
      worst = e.relative;
      worst_name = e.name;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-3 && secs < 300.0,
          fmt("%zu parameter groups, max relative error %.3g (%s), %.1fs", errs.size(), worst, worst_name.c_str(), secs)};
}

// 4 ---------------------------------------------------------------------------
Outcome analytic_loss() {
  QPrediction<double> q;
  q.grid = {100, 100, 100};
  q.q_trans = Eigen::VectorXd::Zero(1000000);
  q.q_rot = Eigen::MatrixXd::Zero(72, 3);
  DiscreteAction d;
  d.trans_index = {12, 34, 56};
  d.rot_indices = {1, 2, 3};
  const auto l = policy_loss(q, d);
  const double et = std::abs(l.trans - std::log(1e6)), er = std::abs(l.rot - 3 * std::log(72.0));
  const double eo = std::abs(l.open - std::log(2.0)), ec = std::abs(l.collide - std::log(2.0));
  return {et <= 1e-6 && er <= 1e-6 && eo <= 1e-9 && ec <= 1e-9,
          fmt("trans %.7f rot %.7f open %.10f collide %.10f", l.trans, l.rot, l.open, l.collide)};
}

// 5 ---------------------------------------------------------------------------
Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  toy::EnvConfig env;
  env.grid_size = 32;
  env.colors = {"red", "lime", "blue"};
  const auto scene = toy::reset_scene(toy::TaskId::kStackBlock, 0, 1, env);
  const std::vector<DemoEpisode> eps{toy::scripted_expert(scene, env)};
  auto data = std::make_shared<const TrainingSet>(eps, CodecConfig{env.bounds(), env.bin_deg});

  RunConfig rc;
  rc.set("policy.num_latents", "128");
  PolicyConfig pc = rc.policy;
  TrainConfig tc;
  tc.batch_size = 4;
  tc.total_iterations = 2000;
  tc.aug_trans_range.setZero();
  tc.aug_yaw_range_deg = 0.0;
  tc.optimizer.lr = 1e-2;
  tc.optimizer.decay_steps = 2000;
  tc.optimizer.min_lr_ratio = 0.1;
  tc.seed = 1;
  Trainer tr(pc, tc, data);

  std::vector<TrainingTuple> tuples;
  for (std::size_t i = 0; i < data->tuple_count(0); ++i) tuples.push_back(data->materialize(0, i));
  double mean = 0.0;
  std::size_t matched = 0;
  std::int64_t it = 0;
  while (it < tc.total_iterations) {
    (void)tr.step();
    ++it;
    if (it % 100 != 0) continue;
    mean = 0.0;
    matched = 0;
    for (const auto& t : tuples) {
      const auto q = tr.policy().forward(t.voxel_obs, t.proprio, t.language_goal);
      mean += policy_loss(q, t.target).total() / static_cast<double>(tuples.size());
      matched += select_best_action(q) == t.target;
    }
    std::printf("  overfit iteration %lld: mean loss %.5f, %zu/%zu tuples matched (%.0fs)\n",
                static_cast<long long>(it), mean, matched, tuples.size(), seconds_since(t0));
    std::fflush(stdout);
    if (mean < 0.01 && matched == tuples.size()) break;
  }
  const double mins = seconds_since(t0) / 60.0;
  return {mean < 0.01 && matched == tuples.size() && mins < 60.0,
          fmt("%lld iterations, mean total loss %.5f (limit 0.01), %zu/%zu tuples matched, %.1f min CPU",
              static_cast<long long>(it), mean, matched, tuples.size(), mins)};
}

// 6 ---------------------------------------------------------------------------
Outcome keyframe_oracle() {
  std::mt19937_64 rng(66);
  int mismatches = 0;
  std::size_t total = 0;
  for (int i = 0; i < 100; ++i) {
    const auto ep = oracle::random_episode(rng);
    const auto got = extract_keyframes(ep);
    total += got.size();
    if (got != oracle::brute_force_keyframes(ep, kDefaultVelocityEpsilon)) ++mismatches;
  }
  return {mismatches == 0, fmt("100 episodes, %zu keyframes, %d mismatches", total, mismatches)};
}

// 7 ---------------------------------------------------------------------------
Outcome uniform_sampling() {
  std::mt19937_64 rng(77);
  const std::vector<std::size_t> counts{10, 100, 1000};
  std::vector<double> hits(3, 0.0);
  const int draws = 100000, batch = 16;
  int done = 0;
  while (done < draws) {
    const int b = std::min(batch, draws - done);
    for (const auto& s : sample_batch_indices(counts, b, rng)) hits[s.task] += 1.0;
    done += b;
  }
  double chi2 = 0.0, worst = 0.0;
  const double expected = draws / 3.0;
  for (double h : hits) {
    chi2 += (h - expected) * (h - expected) / expected;
    worst = std::max(worst, std::abs(h / draws - 1.0 / 3.0));
  }
  const double p = std::exp(-chi2 / 2.0);  // chi-square survival function, 2 degrees of freedom
  return {worst <= 0.01 && p > 0.01, fmt("frequencies %.4f %.4f %.4f, chi2 %.3f, p %.3f", hits[0] / draws,
                                         hits[1] / draws, hits[2] / draws, chi2, p)};
}

// 8 ---------------------------------------------------------------------------
Outcome augmentation() {
  toy::EnvConfig env;
  std::vector<DemoEpisode> eps;
  for (toy::TaskId t : toy::kAllTasks) {
    for (int e = 0; e < 3; ++e) eps.push_back(toy::scripted_expert(toy::reset_scene(t, e, 80 + e, env), env));
  }
  const TrainingSet data(eps, CodecConfig{env.bounds(), env.bin_deg});
  std::vector<std::vector<TrainingTuple>> tuples(data.num_tasks());
  for (std::size_t s = 0; s < data.num_tasks(); ++s) {
    for (std::size_t i = 0; i < data.tuple_count(s); ++i) tuples[s].push_back(data.materialize(s, i));
  }
  std::mt19937_64 rng(88);
  int retained = 0, violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto idx = sample_batch_indices(data.tuple_counts(), 1, rng)[0];
    const auto& t = tuples[idx.task][idx.tuple];
    const auto out = augment(t, AugmentRanges{}, data.codec(), rng);
    if (out.tuple.target.open != t.target.open || out.tuple.target.collide != t.target.collide) ++violations;
    if (!out.applied) continue;
    ++retained;
    const auto v = voxel_index_of(out.tuple.target_pose.position, data.codec().bounds);
    if (!v || !data.codec().bounds.contains(out.tuple.target.trans_index) || *v != out.tuple.target.trans_index ||
        discretize(out.tuple.target_pose, data.codec().bounds, data.codec().bin_deg) != out.tuple.target) {
      ++violations;
    }
  }
  return {violations == 0 && retained > 0,
          fmt("10000 samples, %d retained augmentations, %d violations", retained, violations)};
}

// 9 and 10 --------------------------------------------------------------------

struct ClosedLoop {
  Outcome c9;
  Outcome c10;
};

bool same_snapshot(const std::filesystem::path& file, const RunConfig& c) {
  if (!std::filesystem::exists(file)) return false;
  try {
    return RunConfig::load(file).to_map() == c.to_map();
  } catch (const std::exception&) {
    return false;
  }
}

// Newest checkpoint_N.bin in `dir`, if any.
std::filesystem::path latest_interval_checkpoint(const std::filesystem::path& dir) {
  std::filesystem::path best;
  long long best_it = -1;
  if (!std::filesystem::exists(dir)) return best;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("checkpoint_", 0) != 0 || name.size() < 16) continue;
    try {
      const long long it = std::stoll(name.substr(11, name.size() - 15));
      if (it > best_it) {
        best_it = it;
        best = entry.path();
      }
    } catch (const std::exception&) {
    }
  }
  return best;
}

ClosedLoop closed_loop(const std::filesystem::path& work, bool want10) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::filesystem::path cfg_path = std::filesystem::path(PERACT_SOURCE_DIR) / "configs" / "closed_loop.cfg";
  RunConfig base = RunConfig::load(cfg_path);
  std::filesystem::create_directories(work);

  // Demonstrations: reuse an identical earlier generation.
  const auto data_dir = work / "data";
  if (!(same_snapshot(data_dir / cli::kConfigSnapshot, base) && std::filesystem::exists(data_dir / "manifest.json"))) {
    std::filesystem::remove_all(data_dir);
    (void)cli::cmd_generate(base, data_dir);
  } else {
    std::printf("  reusing demonstrations in %s\n", data_dir.string().c_str());
  }
  base.data.path = data_dir.string();

  RunConfig eval_cfg = base;
  eval_cfg.eval.tasks = {toy::TaskId::kPressButton};

  // Random baseline on the same protocol.
  eval_cfg.eval.agent = "random";
  const double random_score = toy::mean_score(cli::cmd_eval(eval_cfg, work / "eval_random", nullptr).results);
  std::printf("  random agent press_button: %.1f\n", random_score);

  double best = -1.0;
  std::filesystem::path best_ckpt;
  std::string per_seed;
  for (int seed = 1; seed <= 3; ++seed) {
    RunConfig c = base;
    c.set("train.seed", std::to_string(seed));
    c.set("policy.init_seed", std::to_string(seed));
    const auto out = work / ("seed_" + std::to_string(seed));
    const auto final_ckpt = out / "checkpoint_final.bin";
    if (same_snapshot(out / cli::kConfigSnapshot, c) && std::filesystem::exists(final_ckpt)) {
      std::printf("  seed %d: reusing %s\n", seed, final_ckpt.string().c_str());
    } else {
      cli::TrainOptions opt;
      if (same_snapshot(out / cli::kConfigSnapshot, c)) {
        const auto interrupted = out / "checkpoint_interrupted.bin";
        opt.resume = std::filesystem::exists(interrupted) ? interrupted : latest_interval_checkpoint(out);
      } else {
        std::filesystem::remove_all(out);
      }
      if (!opt.resume.empty()) std::printf("  seed %d: resuming from %s\n", seed, opt.resume.string().c_str());
      const auto r = cli::cmd_train(c, out, opt);
      if (r.interrupted) return {{false, "training interrupted"}, {false, "training interrupted"}};
    }
    RunConfig e = eval_cfg;
    e.eval.agent = "policy";
    e.eval.checkpoint = final_ckpt.string();
    const double score = toy::mean_score(cli::cmd_eval(e, out / "eval_press", nullptr).results);
    std::printf("  seed %d press_button: %.1f (%.0f min elapsed)\n", seed, score, seconds_since(t0) / 60.0);
    std::fflush(stdout);
    per_seed += fmt("%sseed %d: %.0f", per_seed.empty() ? "" : ", ", seed, score);
    if (score > best) {
      best = score;
      best_ckpt = final_ckpt;
    }
    // Best-of-three is already decided once a seed clears the bar.
    if (best >= 65.0) break;
  }
  const double hours = seconds_since(t0) / 3600.0;
  ClosedLoop r;
  r.c9 = {best >= 65.0 && random_score < 10.0 && hours <= 4.0,
          fmt("best press_button success %.0f%% (limit >= 65) [%s], random baseline %.0f%% (limit < 10), %.2f h",
              best, per_seed.c_str(), random_score, hours)};
  if (want10) {
    RunConfig e = eval_cfg;
    e.eval.agent = "policy";
    e.eval.checkpoint = best_ckpt.string();
    e.eval.goal_mode = "swapped";
    const double swapped = toy::mean_score(cli::cmd_eval(e, work / "eval_swapped", nullptr).results);
    r.c10 = {best - swapped >= 30.0,
             fmt("correct goals %.0f%%, swapped goals %.0f%%, drop %.0f points (limit >= 30)", best, swapped,
                 best - swapped)};
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string list = "1,2,3,4,5,6,7,8,9,10";
  std::string work = "closed_loop";
  bool skip_full = false;
  app.add_option("--criteria", list, "comma-separated criterion numbers");
  app.add_option("--work-dir", work, "scratch directory for criteria 9 and 10");
  app.add_flag("--skip-full-scale", skip_full, "skip the 100^3 forward pass in criterion 1");
  CLI11_PARSE(app, argc, argv);

  std::set<int> wanted;
  for (const auto& s : split_list(list)) wanted.insert(std::stoi(s));

  const std::map<int, std::function<Outcome()>> checks = {
      {1, [&] { return shapes(skip_full); }}, {2, codec_round_trip}, {3, gradient_check},
      {4, analytic_loss},                      {5, overfit},          {6, keyframe_oracle},
      {7, uniform_sampling},                   {8, augmentation}};

  bool all = true;
  auto report = [&](int id, const Outcome& o) {
    std::printf("%s C%d: %s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  };
  for (int id : wanted) {
    if (id >= 9) continue;
    const auto it = checks.find(id);
    if (it == checks.end()) {
      std::fprintf(stderr, "unknown criterion %d\n", id);
      return 2;
    }
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    report(id, o);
  }
  if (wanted.count(9) || wanted.count(10)) {
    ClosedLoop r;
    try {
      r = closed_loop(work, wanted.count(10) > 0);
    } catch (const std::exception& e) {
      r.c9 = r.c10 = {false, std::string("exception: ") + e.what()};
    }
    if (wanted.count(9)) report(9, r.c9);
    if (wanted.count(10)) report(10, r.c10);
  }
  return all ? 0 : 1;
}

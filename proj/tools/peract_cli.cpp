#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "peract/cli.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value config file");
  cmd->add_option("--set", c.sets, "override one key, e.g. --set train.batch_size=8")->allow_extra_args(false);
  cmd->add_option("--seed", c.seed, "seed for this command's randomness");
  cmd->add_option("--out", c.out, "output directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace peract;
  CLI::App app{"Voxel-grid Perceiver policy: demos, training, evaluation and inspection"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, pred_c, insp_c;
  auto* gen = app.add_subcommand("generate", "write scripted-expert demos for the toy world");
  add_common(gen, gen_c);
  std::optional<int> gen_episodes;
  gen->add_option("--episodes", gen_episodes, "demos per task (data.episodes_per_task)");

  auto* train = app.add_subcommand("train", "train a policy on a demo dataset");
  add_common(train, train_c);
  std::string train_data, resume;
  train->add_option("--data", train_data, "dataset directory (data.path)");
  train->add_option("--resume", resume, "checkpoint to continue from");

  auto* eval = app.add_subcommand("eval", "run closed-loop episodes and write report.json");
  add_common(eval, eval_c);
  std::string checkpoint, agent, goal_mode;
  std::optional<int> episodes;
  eval->add_option("--checkpoint", checkpoint, "policy checkpoint (eval.checkpoint)");
  eval->add_option("--agent", agent, "policy | random | replay-expert");
  eval->add_option("--episodes", episodes, "episodes per task");
  eval->add_option("--goal", goal_mode, "correct | swapped");

  cli::PredictOptions popt;
  std::string pred_data;
  auto add_tuple_opts = [&](CLI::App* cmd, Common& c) {
    add_common(cmd, c);
    cmd->add_option("--checkpoint", popt.checkpoint, "policy checkpoint")->required();
    cmd->add_option("--data", pred_data, "dataset directory (data.path)");
    cmd->add_option("--episode", popt.ref.episode, "episode index in the dataset");
    cmd->add_option("--tuple", popt.ref.tuple, "tuple index within the episode");
    cmd->add_option("--goal", popt.goal_mode, "correct | swapped");
    cmd->add_option("--goal-text", popt.goal_text, "explicit instruction replacing the tuple's goal");
  };
  auto* pred = app.add_subcommand("predict", "predict the next keyframe action for a dataset tuple");
  add_tuple_opts(pred, pred_c);
  auto* insp = app.add_subcommand("inspect", "dump translation Q heatmaps for a dataset tuple");
  add_tuple_opts(insp, insp_c);

  CLI11_PARSE(app, argc, argv);

  auto resolve = [](const Common& c) {
    auto cfg = RunConfig::load(c.config, c.sets);
    return cfg;
  };
  try {
    if (gen->parsed()) {
      auto cfg = resolve(gen_c);
      if (gen_c.seed) cfg.data.seed = *gen_c.seed;
      if (gen_episodes) cfg.data.episodes_per_task = *gen_episodes;
      (void)cli::cmd_generate(cfg, gen_c.out);
    } else if (train->parsed()) {
      auto cfg = resolve(train_c);
      if (train_c.seed) cfg.train.seed = *train_c.seed;
      if (!train_data.empty()) cfg.data.path = train_data;
      const auto r = cli::cmd_train(cfg, train_c.out, {resume});
      return r.interrupted ? 130 : 0;
    } else if (eval->parsed()) {
      auto cfg = resolve(eval_c);
      if (eval_c.seed) cfg.eval.seed = *eval_c.seed;
      if (!checkpoint.empty()) cfg.eval.checkpoint = checkpoint;
      if (!agent.empty()) cfg.eval.agent = agent;
      if (!goal_mode.empty()) cfg.eval.goal_mode = goal_mode;
      if (episodes) cfg.eval.episodes_per_task = *episodes;
      (void)cli::cmd_eval(cfg, eval_c.out);
    } else {
      const bool is_pred = pred->parsed();
      const Common& c = is_pred ? pred_c : insp_c;
      auto cfg = resolve(c);
      if (c.seed) cfg.eval.seed = *c.seed;
      if (!pred_data.empty()) cfg.data.path = pred_data;
      if (is_pred) {
        (void)cli::cmd_predict(cfg, popt, c.out);
      } else {
        (void)cli::cmd_inspect(cfg, popt, c.out);
      }
    }
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

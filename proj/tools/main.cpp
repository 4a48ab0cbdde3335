#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>

#include "apfddpg/errors.hpp"
#include "apfddpg/harness.hpp"
#include "apfddpg/nn.hpp"

namespace {

namespace fs = std::filesystem;
using namespace apfddpg;

struct TrainOptions {
  std::string config_path;
  std::string agent;
  int episodes = -1;
  int runs = -1;
  int max_steps = -1;
  std::int64_t seed = -1;
  std::string out_dir;
  int threads = -1;
  bool save_models = false;
};

int run_train(const TrainOptions& opt) {
  harness::ExperimentConfig cfg;
  if (!opt.config_path.empty()) cfg = harness::load_config(opt.config_path);
  if (!opt.agent.empty()) cfg.agent_kind = harness::agent_kind_from_name(opt.agent);
  if (opt.episodes >= 0) cfg.episodes = opt.episodes;
  if (opt.runs >= 0) cfg.runs = opt.runs;
  if (opt.max_steps >= 0) cfg.env.max_steps = opt.max_steps;
  if (opt.seed >= 0) cfg.base_seed = static_cast<std::uint64_t>(opt.seed);
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  if (opt.threads >= 0) cfg.threads = opt.threads;
  if (opt.save_models) cfg.save_models = true;

  const auto start = std::chrono::steady_clock::now();
  const auto result = harness::run_experiment(cfg);
  const auto seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::cout << "agent: " << harness::agent_kind_name(cfg.agent_kind) << "\n"
            << "runs: " << cfg.runs << "  episodes: " << cfg.episodes << "  seed: " << cfg.base_seed
            << "\n"
            << "records: " << result.csv_path << "\n";
  for (std::size_t k = 0; k < result.run_stats.size(); ++k) {
    const auto& s = result.run_stats[k];
    if (s.diverged)
      std::cout << "run " << k << ": DIVERGED (" << s.divergence_message
                << "); training halted, run recorded as failed\n";
  }
  std::cout << "elapsed: " << seconds << " s\n";
  return 0;
}

struct CompareOptions {
  std::string path_a;
  std::string path_b;
  std::string out_dir = ".";
  double threshold = -50.0;
  int window = 100;
};

int run_compare(const CompareOptions& opt) {
  const auto a = harness::read_records_csv(opt.path_a);
  const auto b = harness::read_records_csv(opt.path_b);
  const auto report = harness::compare(a, b, opt.threshold);
  std::cout << format_report_text(report);
  fs::create_directories(opt.out_dir);
  const std::string report_path = (fs::path(opt.out_dir) / "comparison.csv").string();
  const std::string curves_path = (fs::path(opt.out_dir) / "curves.csv").string();
  harness::write_report_csv(report_path, report);
  harness::write_curves_csv(curves_path, report, opt.window);
  std::cout << "report: " << report_path << "\ncurves: " << curves_path << "\n";
  return 0;
}

struct EvalOptions {
  std::string model_path;
  std::string config_path;
  int episodes = 1;
};

int run_eval(const EvalOptions& opt) {
  harness::ExperimentConfig cfg;
  if (!opt.config_path.empty()) cfg = harness::load_config(opt.config_path);
  nn::DenseNet actor = nn::load_file(opt.model_path);
  if (actor.input_size() != 6 || actor.output_size() != 3)
    throw ConfigError("model '" + opt.model_path + "' is not an actor network (6 in, 3 out)");

  env::ArmEnv arm(cfg.effective_env());
  for (int episode = 0; episode < opt.episodes; ++episode) {
    env::EnvState state = arm.reset();
    double episode_reward = 0.0;
    std::cout << "episode " << episode << "\n";
    while (!arm.done()) {
      const Eigen::VectorXd out = nn::forward(actor, state.as_vector());
      const env::Action action{out(0), out(1), out(2)};
      const auto outcome = arm.step(action);
      episode_reward += outcome.reward;
      const auto& s = outcome.next_state;
      std::printf(
          "  step %3d  action (% .4f, % .4f, % .4f)  tip (% .3f, % .3f, % .3f)  "
          "dist %.3f  reward % .1f  %s\n",
          arm.steps_taken(), action.d1, action.d2, action.d4, s.tip_x, s.tip_y, s.tip_z,
          env::distance(s, arm.config().goal), outcome.reward,
          env::terminal_name(outcome.terminal));
      state = outcome.next_state;
    }
    std::cout << "  episodic reward " << episode_reward << " in " << arm.steps_taken()
              << " steps\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"APF-DDPG reaching-arm benchmark"};
  app.require_subcommand(1);

  TrainOptions train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train one agent over multiple runs");
  train_cmd->add_option("--config", train.config_path, "JSON config file");
  train_cmd->add_option("--agent", train.agent, "Agent kind: ddpg or apf-ddpg")
      ->check(CLI::IsMember({"ddpg", "apf-ddpg"}));
  train_cmd->add_option("--episodes", train.episodes, "Episodes per run");
  train_cmd->add_option("--runs", train.runs, "Independent runs");
  train_cmd->add_option("--max-steps", train.max_steps, "Steps per episode");
  train_cmd->add_option("--seed", train.seed, "Base seed (run k uses seed+k)");
  train_cmd->add_option("--out", train.out_dir, "Output directory");
  train_cmd->add_option("--threads", train.threads, "Concurrent run contexts (0 = auto)");
  train_cmd->add_flag("--save-models", train.save_models, "Save actor (and APF) networks per run");

  CompareOptions cmp;
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "Compare two experiment record files (A vs B)");
  compare_cmd->add_option("records_a", cmp.path_a, "Baseline records CSV")->required();
  compare_cmd->add_option("records_b", cmp.path_b, "Candidate records CSV")->required();
  compare_cmd->add_option("--out", cmp.out_dir, "Directory for comparison.csv and curves.csv");
  compare_cmd->add_option("--threshold", cmp.threshold, "Failure threshold on final-100 mean");
  compare_cmd->add_option("--window", cmp.window, "Smoothing window for curves.csv");

  EvalOptions eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Roll out a saved actor greedily");
  eval_cmd->add_option("--model", eval.model_path, "Actor model file")->required();
  eval_cmd->add_option("--config", eval.config_path, "JSON config file (environment settings)");
  eval_cmd->add_option("--episodes", eval.episodes, "Episodes to roll out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*compare_cmd) return run_compare(cmp);
    if (*eval_cmd) return run_eval(eval);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

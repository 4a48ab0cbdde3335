#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "apfddpg/apf.hpp"
#include "apfddpg/ddpg.hpp"
#include "apfddpg/env.hpp"
#include "apfddpg/rng.hpp"
#include "apfddpg/stats.hpp"

namespace apfddpg::harness {

enum class AgentKind { kDdpg, kApfDdpg };

const char* agent_kind_name(AgentKind kind);
AgentKind agent_kind_from_name(const std::string& name);

/// Everything one experiment needs. Defaults reproduce the benchmark
/// protocol: 20 runs of 2000 episodes, 100 steps each, discount 0.99,
/// 512-wide actor/critic, 512/256 potential network, batch 64, learning
/// rates 0.02 (critic, potential) and 0.01 (actor).
struct ExperimentConfig {
  AgentKind agent_kind = AgentKind::kApfDdpg;
  int episodes = 2000;
  int runs = 20;
  std::uint64_t base_seed = 1;
  double gamma = 0.99;

  env::EnvConfig env;        // max_steps/gamma mirrored from the fields above
  ddpg::AgentHyper agent;
  apf::ApfHyper apf;

  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.25;  // linear decay over this share of episodes

  bool shaping_includes_gamma = true;    // false: potential difference without the discount
  bool rank_by_shaped_reward = false;    // trajectory ranking uses raw rewards by default
  double failure_threshold = -50.0;      // on the final-100-episode mean

  std::string out_dir = ".";
  int threads = 0;  // 0: one worker per hardware thread, capped at `runs`
  bool save_models = false;

  void validate() const;

  /// Env config with max_steps and gamma mirrored in.
  env::EnvConfig effective_env() const;
  /// Agent hyperparameters with gamma mirrored in.
  ddpg::AgentHyper effective_agent() const;
};

/// Flat JSON key-value file; every field optional, unknown keys rejected.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);

double epsilon_for_episode(const ExperimentConfig& config, int episode);

struct EpisodeRecord {
  int run_id = 0;
  int episode = 0;
  double reward = 0.0;  // raw episodic reward (sum of environment rewards)
  int steps = 0;
  env::Terminal terminal = env::Terminal::kNone;
};

/// Counters asserting the update schedule: the potential network is updated
/// once per episode, the DDPG networks once per environment step.
struct RunStats {
  std::int64_t env_steps = 0;
  std::int64_t ddpg_update_attempts = 0;
  std::int64_t ddpg_updates_applied = 0;
  std::int64_t apf_update_attempts = 0;
  std::int64_t apf_updates_applied = 0;
  bool diverged = false;
  std::string divergence_message;
};

/// Mutable state of one training run.
struct RunContext {
  RunContext(const ExperimentConfig& config, int run_id);

  const ExperimentConfig* config;
  int run_id;
  env::ArmEnv arm;
  ddpg::AgentNets nets;
  ddpg::ReplayBuffer replay;
  Rng explore_rng;
  Rng replay_rng;
  Rng apf_rng;

  struct ApfState {
    nn::DenseNet net;
    apf::TrajectoryBuffer buffer;
  };
  std::optional<ApfState> apf_state;  // engaged for the APF agent only

  bool updates_enabled = true;  // cleared after a divergence
  RunStats stats;
};

/// One episode of the training loop: act, step, shape (when active), store,
/// per-step DDPG update; afterwards commit the trajectory and run the
/// per-episode potential update.
EpisodeRecord run_episode(RunContext& context, int episode_index);

/// One full run: fresh env/agent seeded with base_seed + run_id.
struct RunResult {
  std::vector<EpisodeRecord> records;
  RunStats stats;
};
RunResult run_single(const ExperimentConfig& config, int run_id);

/// All runs (possibly on a worker pool; the result is identical either way),
/// merged by run id and written as one CSV per experiment.
struct ExperimentResult {
  std::vector<EpisodeRecord> records;
  std::vector<RunStats> run_stats;
  std::string csv_path;
};
ExperimentResult run_experiment(const ExperimentConfig& config);

using stats::moving_average;

struct ComparisonReport {
  int episodes = 0;
  int runs_a = 0;
  int runs_b = 0;
  double mean_final100_a = 0.0;  // mean over runs of per-run final-100 means
  double mean_final100_b = 0.0;
  double t_statistic = 0.0;            // pooled Student's t over the averaged curves
  double p_two_sided = 1.0;
  double p_one_sided_b_greater = 1.0;  // alternative: curve b above curve a
  double welch_t = 0.0;
  double welch_p_two_sided = 1.0;
  std::vector<double> final100_a;      // per run, ordered by run id
  std::vector<double> final100_b;
  int failures_a = 0;  // runs whose final-100 mean is below the threshold
  int failures_b = 0;
  double failure_threshold = -50.0;
  std::vector<double> curve_a;  // per-episode across-run averages
  std::vector<double> curve_b;
};

/// Across-run averaged learning curves compared with Student's (and Welch's)
/// t-test, plus per-run final-100 means and failure counts.
ComparisonReport compare(const std::vector<EpisodeRecord>& records_a,
                         const std::vector<EpisodeRecord>& records_b,
                         double failure_threshold = -50.0);

std::vector<EpisodeRecord> read_records_csv(const std::string& path);
void write_records_csv(const std::string& path, const std::vector<EpisodeRecord>& records);

std::string format_report_text(const ComparisonReport& report);
void write_report_csv(const std::string& path, const ComparisonReport& report);
void write_curves_csv(const std::string& path, const ComparisonReport& report, int window);

}  // namespace apfddpg::harness

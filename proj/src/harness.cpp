#include "apfddpg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "apfddpg/errors.hpp"

namespace apfddpg::harness {

namespace {

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const char* agent_kind_name(AgentKind kind) {
  return kind == AgentKind::kDdpg ? "ddpg" : "apf-ddpg";
}

AgentKind agent_kind_from_name(const std::string& name) {
  if (name == "ddpg") return AgentKind::kDdpg;
  if (name == "apf-ddpg" || name == "apf_ddpg") return AgentKind::kApfDdpg;
  throw ConfigError("unknown agent kind '" + name + "' (expected ddpg or apf-ddpg)");
}

void ExperimentConfig::validate() const {
  if (episodes < 1) throw std::invalid_argument("config: episodes must be >= 1");
  if (runs < 1) throw std::invalid_argument("config: runs must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("config: gamma must lie in [0, 1]");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) ||
      !(epsilon_end >= 0.0 && epsilon_end <= 1.0))
    throw std::invalid_argument("config: epsilon bounds must lie in [0, 1]");
  if (!(epsilon_decay_fraction >= 0.0 && epsilon_decay_fraction <= 1.0))
    throw std::invalid_argument("config: epsilon decay fraction must lie in [0, 1]");
  if (agent.batch_size < 1) throw std::invalid_argument("config: batch size must be >= 1");
  effective_env().validate();
}

env::EnvConfig ExperimentConfig::effective_env() const {
  env::EnvConfig e = env;
  e.gamma = gamma;
  return e;
}

ddpg::AgentHyper ExperimentConfig::effective_agent() const {
  ddpg::AgentHyper a = agent;
  a.gamma = gamma;
  return a;
}

ExperimentConfig config_from_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config parse error: top level must be an object");

  ExperimentConfig cfg;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "agent") cfg.agent_kind = agent_kind_from_name(value.get<std::string>());
      else if (key == "episodes") cfg.episodes = value.get<int>();
      else if (key == "runs") cfg.runs = value.get<int>();
      else if (key == "seed") cfg.base_seed = value.get<std::uint64_t>();
      else if (key == "gamma") cfg.gamma = value.get<double>();
      else if (key == "max_steps") cfg.env.max_steps = value.get<int>();
      else if (key == "link1") cfg.env.link1 = value.get<double>();
      else if (key == "link2") cfg.env.link2 = value.get<double>();
      else if (key == "goal") cfg.env.goal = value.get<std::array<double, 3>>();
      else if (key == "goal_tolerance") cfg.env.goal_tolerance = value.get<double>();
      else if (key == "floor_z") cfg.env.floor_z = value.get<double>();
      else if (key == "joint_limits")
        cfg.env.joint_limits = value.get<std::array<std::array<double, 2>, 3>>();
      else if (key == "actor_hidden") cfg.agent.actor_hidden = value.get<std::vector<int>>();
      else if (key == "critic_hidden") cfg.agent.critic_hidden = value.get<std::vector<int>>();
      else if (key == "apf_hidden") cfg.apf.hidden = value.get<std::vector<int>>();
      else if (key == "batch_size") {
        cfg.agent.batch_size = value.get<int>();
        cfg.apf.batch_size = value.get<int>();
      } else if (key == "lr_critic") cfg.agent.lr_critic = value.get<double>();
      else if (key == "lr_actor") cfg.agent.lr_actor = value.get<double>();
      else if (key == "lr_apf") cfg.apf.learning_rate = value.get<double>();
      else if (key == "tau") cfg.agent.tau = value.get<double>();
      else if (key == "replay_capacity") cfg.agent.replay_capacity = value.get<std::size_t>();
      else if (key == "trajectory_capacity") cfg.apf.buffer_capacity = value.get<std::size_t>();
      else if (key == "epsilon_start") cfg.epsilon_start = value.get<double>();
      else if (key == "epsilon_end") cfg.epsilon_end = value.get<double>();
      else if (key == "epsilon_decay_fraction") cfg.epsilon_decay_fraction = value.get<double>();
      else if (key == "shaping_gamma") cfg.shaping_includes_gamma = value.get<bool>();
      else if (key == "rank_by_shaped") cfg.rank_by_shaped_reward = value.get<bool>();
      else if (key == "failure_threshold") cfg.failure_threshold = value.get<double>();
      else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
      else if (key == "threads") cfg.threads = value.get<int>();
      else if (key == "save_models") cfg.save_models = value.get<bool>();
      else throw ConfigError("config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: bad value type: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return config_from_json_text(buffer.str());
}

double epsilon_for_episode(const ExperimentConfig& config, int episode) {
  const double decay_episodes =
      std::floor(config.epsilon_decay_fraction * static_cast<double>(config.episodes));
  if (decay_episodes < 1.0 || episode >= static_cast<int>(decay_episodes))
    return config.epsilon_end;
  const double progress = static_cast<double>(episode) / decay_episodes;
  return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * progress;
}

RunContext::RunContext(const ExperimentConfig& cfg, int id)
    : config(&cfg),
      run_id(id),
      arm(cfg.effective_env()),
      nets(ddpg::init_agent_nets(cfg.effective_agent(), cfg.base_seed + static_cast<std::uint64_t>(id))),
      replay(cfg.agent.replay_capacity),
      explore_rng(stream_seed(cfg.base_seed + static_cast<std::uint64_t>(id), Stream::kExplore)),
      replay_rng(stream_seed(cfg.base_seed + static_cast<std::uint64_t>(id), Stream::kReplay)),
      apf_rng(stream_seed(cfg.base_seed + static_cast<std::uint64_t>(id), Stream::kApfSample)) {
  if (cfg.agent_kind == AgentKind::kApfDdpg) {
    const std::uint64_t run_seed = cfg.base_seed + static_cast<std::uint64_t>(id);
    apf_state.emplace(RunContext::ApfState{
        apf::init_apf_net(cfg.apf, stream_seed(run_seed, Stream::kApfInit)),
        apf::TrajectoryBuffer(cfg.apf.buffer_capacity)});
  }
}

EpisodeRecord run_episode(RunContext& context, int episode_index) {
  const ExperimentConfig& cfg = *context.config;
  const ddpg::AgentHyper hyper = cfg.effective_agent();
  const double epsilon = epsilon_for_episode(cfg, episode_index);

  env::EnvState state = context.arm.reset();
  apf::Trajectory trajectory;
  if (context.apf_state) trajectory.states.push_back(apf::map_state(state));

  double raw_return = 0.0;
  double shaped_return = 0.0;
  int steps = 0;
  env::Terminal terminal = env::Terminal::kNone;

  while (true) {
    const env::Action action = ddpg::select_action(context.nets, state, epsilon, context.explore_rng);
    const env::StepOutcome outcome = context.arm.step(action);
    ++context.stats.env_steps;

    double stored_reward = outcome.reward;
    if (context.apf_state)
      stored_reward += apf::shaping_reward(context.apf_state->net, state, outcome.next_state,
                                           cfg.gamma, cfg.shaping_includes_gamma);
    const bool is_terminal = outcome.terminal != env::Terminal::kNone;
    context.replay.store({state, action, stored_reward, outcome.next_state, is_terminal});

    ++context.stats.ddpg_update_attempts;
    if (context.updates_enabled) {
      try {
        const auto update = ddpg::update(context.nets, context.replay, hyper, context.replay_rng);
        if (update.applied) ++context.stats.ddpg_updates_applied;
      } catch (const DivergenceError& e) {
        context.stats.diverged = true;
        context.stats.divergence_message = e.what();
        context.updates_enabled = false;
      }
    }

    raw_return += outcome.reward;
    shaped_return += stored_reward;
    if (context.apf_state) trajectory.states.push_back(apf::map_state(outcome.next_state));
    state = outcome.next_state;
    ++steps;
    if (is_terminal) {
      terminal = outcome.terminal;
      break;
    }
  }

  if (context.apf_state) {
    trajectory.episodic_reward = cfg.rank_by_shaped_reward ? shaped_return : raw_return;
    context.apf_state->buffer.commit(std::move(trajectory));
    ++context.stats.apf_update_attempts;
    if (context.updates_enabled) {
      try {
        const auto counts =
            apf::sample_and_count(context.apf_state->buffer, cfg.apf.batch_size, context.apf_rng);
        if (!counts.empty()) {
          apf::update_apf(context.apf_state->net, counts, cfg.apf.learning_rate,
                          cfg.apf.batch_size, context.apf_rng);
          ++context.stats.apf_updates_applied;
        }
      } catch (const DivergenceError& e) {
        context.stats.diverged = true;
        context.stats.divergence_message = e.what();
        context.updates_enabled = false;
      }
    }
  }

  return {context.run_id, episode_index, raw_return, steps, terminal};
}

RunResult run_single(const ExperimentConfig& config, int run_id) {
  RunContext context(config, run_id);
  RunResult result;
  result.records.reserve(config.episodes);
  for (int episode = 0; episode < config.episodes; ++episode)
    result.records.push_back(run_episode(context, episode));
  if (config.save_models) {
    namespace fs = std::filesystem;
    const fs::path dir(config.out_dir);
    nn::save_file(context.nets.actor, (dir / ("actor_run" + std::to_string(run_id) + ".model")).string());
    if (context.apf_state)
      nn::save_file(context.apf_state->net,
                    (dir / ("apf_run" + std::to_string(run_id) + ".model")).string());
  }
  result.stats = context.stats;
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + config.out_dir + "': " + ec.message());

  std::vector<RunResult> runs(config.runs);
  int workers = config.threads > 0 ? config.threads
                                   : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, config.runs);

  if (workers == 1) {
    for (int k = 0; k < config.runs; ++k) runs[k] = run_single(config, k);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      while (true) {
        const int k = next.fetch_add(1);
        if (k >= config.runs) return;
        runs[k] = run_single(config, k);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentResult result;
  result.records.reserve(static_cast<std::size_t>(config.runs) * config.episodes);
  for (int k = 0; k < config.runs; ++k) {
    result.records.insert(result.records.end(), runs[k].records.begin(), runs[k].records.end());
    result.run_stats.push_back(runs[k].stats);
  }
  const fs::path csv = fs::path(config.out_dir) /
                       (std::string(agent_kind_name(config.agent_kind)) + "_records.csv");
  result.csv_path = csv.string();
  write_records_csv(result.csv_path, result.records);
  return result;
}

namespace {

// run id -> episode-ordered rewards; validates rectangular shape
std::map<int, std::vector<double>> group_by_run(const std::vector<EpisodeRecord>& records,
                                                const char* label) {
  if (records.empty())
    throw std::invalid_argument(std::string("compare: records ") + label + " are empty");
  std::map<int, std::map<int, double>> by_run;
  for (const auto& r : records) {
    auto [it, inserted] = by_run[r.run_id].emplace(r.episode, r.reward);
    if (!inserted)
      throw std::invalid_argument(std::string("compare: duplicate episode in records ") + label);
  }
  std::map<int, std::vector<double>> out;
  std::size_t episodes = 0;
  for (auto& [run, eps] : by_run) {
    std::vector<double> series;
    series.reserve(eps.size());
    int expected = 0;
    for (const auto& [episode, reward] : eps) {
      if (episode != expected++)
        throw std::invalid_argument(std::string("compare: episode gap in records ") + label);
      series.push_back(reward);
    }
    if (episodes == 0) episodes = series.size();
    if (series.size() != episodes)
      throw std::invalid_argument(std::string("compare: ragged run lengths in records ") + label);
    out.emplace(run, std::move(series));
  }
  return out;
}

std::vector<double> across_run_average(const std::map<int, std::vector<double>>& runs) {
  const std::size_t episodes = runs.begin()->second.size();
  std::vector<double> avg(episodes, 0.0);
  for (const auto& [run, series] : runs)
    for (std::size_t e = 0; e < episodes; ++e) avg[e] += series[e];
  for (double& v : avg) v /= static_cast<double>(runs.size());
  return avg;
}

double final_window_mean(const std::vector<double>& series, std::size_t window) {
  const std::size_t n = std::min(window, series.size());
  double total = 0.0;
  for (std::size_t i = series.size() - n; i < series.size(); ++i) total += series[i];
  return total / static_cast<double>(n);
}

}  // namespace

ComparisonReport compare(const std::vector<EpisodeRecord>& records_a,
                         const std::vector<EpisodeRecord>& records_b, double failure_threshold) {
  const auto runs_a = group_by_run(records_a, "A");
  const auto runs_b = group_by_run(records_b, "B");
  const std::size_t episodes_a = runs_a.begin()->second.size();
  const std::size_t episodes_b = runs_b.begin()->second.size();
  if (episodes_a != episodes_b)
    throw std::invalid_argument("compare: episode counts differ between the two inputs");

  ComparisonReport report;
  report.episodes = static_cast<int>(episodes_a);
  report.runs_a = static_cast<int>(runs_a.size());
  report.runs_b = static_cast<int>(runs_b.size());
  report.failure_threshold = failure_threshold;
  report.curve_a = across_run_average(runs_a);
  report.curve_b = across_run_average(runs_b);

  const auto pooled = stats::students_t_test(report.curve_a, report.curve_b);
  report.t_statistic = pooled.t;
  report.p_two_sided = pooled.p_two_sided;
  // one-sided alternative "curve b above curve a": small t favors b
  report.p_one_sided_b_greater = stats::student_t_cdf(pooled.t, pooled.df);
  if (pooled.t == 0.0 && pooled.p_two_sided == 1.0) report.p_one_sided_b_greater = 1.0;
  const auto welch = stats::welch_t_test(report.curve_a, report.curve_b);
  report.welch_t = welch.t;
  report.welch_p_two_sided = welch.p_two_sided;

  for (const auto& [run, series] : runs_a) {
    const double m = final_window_mean(series, 100);
    report.final100_a.push_back(m);
    if (m < failure_threshold) ++report.failures_a;
  }
  for (const auto& [run, series] : runs_b) {
    const double m = final_window_mean(series, 100);
    report.final100_b.push_back(m);
    if (m < failure_threshold) ++report.failures_b;
  }
  report.mean_final100_a = stats::mean(report.final100_a);
  report.mean_final100_b = stats::mean(report.final100_b);
  return report;
}

std::vector<EpisodeRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open records file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("records file '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "run_id,episode,reward,steps,terminal")
    throw ConfigError("records file '" + path + "' has an unexpected header");

  std::vector<EpisodeRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string, 5> fields;
    std::size_t field = 0, start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (field >= fields.size())
          throw ConfigError("records file '" + path + "': too many fields on line " +
                            std::to_string(line_no));
        fields[field++] = line.substr(start, i - start);
        start = i + 1;
      }
    }
    if (field != fields.size())
      throw ConfigError("records file '" + path + "': expected 5 fields on line " +
                        std::to_string(line_no));
    try {
      EpisodeRecord r;
      r.run_id = std::stoi(fields[0]);
      r.episode = std::stoi(fields[1]);
      r.reward = std::stod(fields[2]);
      r.steps = std::stoi(fields[3]);
      r.terminal = env::terminal_from_name(fields[4]);
      records.push_back(r);
    } catch (const std::exception& e) {
      throw ConfigError("records file '" + path + "': bad row on line " + std::to_string(line_no) +
                        ": " + e.what());
    }
  }
  return records;
}

void write_records_csv(const std::string& path, const std::vector<EpisodeRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << "run_id,episode,reward,steps,terminal\n";
  for (const auto& r : records)
    out << r.run_id << ',' << r.episode << ',' << format17(r.reward) << ',' << r.steps << ','
        << env::terminal_name(r.terminal) << '\n';
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

std::string format_report_text(const ComparisonReport& r) {
  std::ostringstream out;
  out << "episodes per run:        " << r.episodes << "\n"
      << "runs:                    A=" << r.runs_a << "  B=" << r.runs_b << "\n"
      << "mean final-100 reward:   A=" << r.mean_final100_a << "  B=" << r.mean_final100_b << "\n"
      << "Student t (A-B):         t=" << r.t_statistic << "  p(two-sided)=" << r.p_two_sided
      << "  p(one-sided, B>A)=" << r.p_one_sided_b_greater << "\n"
      << "Welch t (A-B):           t=" << r.welch_t << "  p(two-sided)=" << r.welch_p_two_sided
      << "\n"
      << "failure threshold:       final-100 mean < " << r.failure_threshold << "\n"
      << "failures:                A=" << r.failures_a << "/" << r.runs_a << "  B=" << r.failures_b
      << "/" << r.runs_b << "\n";
  auto dump = [&out](const char* label, const std::vector<double>& xs) {
    out << label;
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    for (double v : sorted) out << ' ' << v;
    out << "\n";
  };
  dump("final-100 means A (sorted):", r.final100_a);
  dump("final-100 means B (sorted):", r.final100_b);
  return out.str();
}

void write_report_csv(const std::string& path, const ComparisonReport& r) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << "metric,agent,run_index,value\n";
  auto scalar = [&out](const char* metric, double value) {
    out << metric << ",,," << format17(value) << '\n';
  };
  scalar("episodes", r.episodes);
  scalar("t_statistic", r.t_statistic);
  scalar("p_two_sided", r.p_two_sided);
  scalar("p_one_sided_b_greater", r.p_one_sided_b_greater);
  scalar("welch_t", r.welch_t);
  scalar("welch_p_two_sided", r.welch_p_two_sided);
  scalar("failure_threshold", r.failure_threshold);
  out << "runs,a,," << r.runs_a << "\nruns,b,," << r.runs_b << '\n';
  out << "mean_final100,a,," << format17(r.mean_final100_a) << '\n';
  out << "mean_final100,b,," << format17(r.mean_final100_b) << '\n';
  out << "failures,a,," << r.failures_a << "\nfailures,b,," << r.failures_b << '\n';
  for (std::size_t i = 0; i < r.final100_a.size(); ++i)
    out << "final100,a," << i << ',' << format17(r.final100_a[i]) << '\n';
  for (std::size_t i = 0; i < r.final100_b.size(); ++i)
    out << "final100,b," << i << ',' << format17(r.final100_b[i]) << '\n';
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

void write_curves_csv(const std::string& path, const ComparisonReport& r, int window) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  const auto smooth_a = stats::moving_average(r.curve_a, window);
  const auto smooth_b = stats::moving_average(r.curve_b, window);
  out << "episode,mean_a,mean_b,smoothed_a,smoothed_b\n";
  for (std::size_t e = 0; e < r.curve_a.size(); ++e)
    out << e << ',' << format17(r.curve_a[e]) << ',' << format17(r.curve_b[e]) << ','
        << format17(smooth_a[e]) << ',' << format17(smooth_b[e]) << '\n';
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

}  // namespace apfddpg::harness

#include <pybind11/pybind11.h>
#include <pybind11/eigen.h>
#include <pybind11/stl.h>

#include <sstream>

#include "apfddpg/apf.hpp"
#include "apfddpg/ddpg.hpp"
#include "apfddpg/env.hpp"
#include "apfddpg/errors.hpp"
#include "apfddpg/harness.hpp"
#include "apfddpg/nn.hpp"
#include "apfddpg/rng.hpp"
#include "apfddpg/stats.hpp"
#include "apfddpg/tabular.hpp"

namespace py = pybind11;
using namespace apfddpg;

namespace {

/// Self-seeding DDPG agent: networks, replay buffer and the run's named
/// random streams bundled behind a small object-oriented surface.
class PyAgent {
 public:
  PyAgent(const ddpg::AgentHyper& hyper, std::uint64_t run_seed)
      : hyper_(hyper),
        nets_(ddpg::init_agent_nets(hyper, run_seed)),
        buffer_(hyper.replay_capacity),
        explore_rng_(stream_seed(run_seed, Stream::kExplore)),
        replay_rng_(stream_seed(run_seed, Stream::kReplay)) {}

  env::Action select_action(const env::EnvState& s, double epsilon) {
    return ddpg::select_action(nets_, s, epsilon, explore_rng_);
  }
  env::Action act_greedy(const env::EnvState& s) const { return ddpg::act_greedy(nets_, s); }
  void store(const ddpg::Transition& t) { buffer_.store(t); }
  ddpg::UpdateStats update() { return ddpg::update(nets_, buffer_, hyper_, replay_rng_); }
  double critic_target(double r, const env::EnvState& s_next, bool terminal) const {
    return ddpg::critic_target(r, s_next, terminal, nets_, hyper_.gamma);
  }
  std::size_t buffer_size() const { return buffer_.size(); }
  void save_actor(const std::string& path) const { nn::save_file(nets_.actor, path); }
  const nn::DenseNet& actor() const { return nets_.actor; }
  const nn::DenseNet& critic() const { return nets_.critic; }

 private:
  ddpg::AgentHyper hyper_;
  ddpg::AgentNets nets_;
  ddpg::ReplayBuffer buffer_;
  Rng explore_rng_;
  Rng replay_rng_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "APF-DDPG core: reaching-arm environment, dense nets, adaptive "
            "potential shaping, DDPG and the experiment harness";

  py::register_exception<DivergenceError>(m, "DivergenceError");
  py::register_exception<ConfigError>(m, "ConfigError");

  // --- nn ---
  py::enum_<nn::OutputActivation>(m, "OutputActivation")
      .value("IDENTITY", nn::OutputActivation::kIdentity)
      .value("SCALED_TANH", nn::OutputActivation::kScaledTanh);

  py::class_<nn::GradientSet>(m, "GradientSet")
      .def_readonly("weights", &nn::GradientSet::weights)
      .def_readonly("biases", &nn::GradientSet::biases);

  py::class_<nn::DenseNet>(m, "DenseNet")
      .def(py::init([](const std::vector<int>& sizes, nn::OutputActivation act,
                       std::uint64_t seed, double scale) {
             return nn::init_net(sizes, act, seed, scale);
           }),
           py::arg("layer_sizes"), py::arg("output_activation") = nn::OutputActivation::kIdentity,
           py::arg("seed") = 0, py::arg("output_scale") = 1.0)
      .def_readonly("layer_sizes", &nn::DenseNet::layer_sizes)
      .def_property_readonly("weights", [](const nn::DenseNet& n) { return n.weights; })
      .def_property_readonly("biases", [](const nn::DenseNet& n) { return n.biases; })
      .def("forward", [](const nn::DenseNet& n, const Eigen::VectorXd& x) { return nn::forward(n, x); })
      .def("backward",
           [](const nn::DenseNet& n, const Eigen::VectorXd& x, const Eigen::VectorXd& upstream) {
             auto r = nn::backward(n, x, upstream);
             return py::make_tuple(std::move(r.grads), std::move(r.input_grad));
           })
      .def("sgd_step", [](nn::DenseNet& n, const nn::GradientSet& g, double lr) { nn::sgd_step(n, g, lr); })
      .def("save", [](const nn::DenseNet& n, const std::string& path) { nn::save_file(n, path); })
      .def_static("load", [](const std::string& path) { return nn::load_file(path); })
      .def("to_text",
           [](const nn::DenseNet& n) {
             std::ostringstream out;
             nn::save(n, out);
             return out.str();
           })
      .def_static("from_text", [](const std::string& text) {
        std::istringstream in(text);
        return nn::load(in);
      });

  // --- env ---
  py::class_<env::EnvConfig>(m, "EnvConfig")
      .def(py::init<>())
      .def_readwrite("link1", &env::EnvConfig::link1)
      .def_readwrite("link2", &env::EnvConfig::link2)
      .def_readwrite("goal", &env::EnvConfig::goal)
      .def_readwrite("goal_tolerance", &env::EnvConfig::goal_tolerance)
      .def_readwrite("joint_limits", &env::EnvConfig::joint_limits)
      .def_readwrite("floor_z", &env::EnvConfig::floor_z)
      .def_readwrite("max_steps", &env::EnvConfig::max_steps)
      .def_readwrite("gamma", &env::EnvConfig::gamma)
      .def("validate", &env::EnvConfig::validate);

  py::class_<env::EnvState>(m, "EnvState")
      .def(py::init<>())
      .def(py::init([](double tx, double ty, double tz, double j1, double j2, double j4) {
             return env::EnvState{tx, ty, tz, j1, j2, j4};
           }),
           py::arg("tip_x"), py::arg("tip_y"), py::arg("tip_z"), py::arg("j1"), py::arg("j2"),
           py::arg("j4"))
      .def_readwrite("tip_x", &env::EnvState::tip_x)
      .def_readwrite("tip_y", &env::EnvState::tip_y)
      .def_readwrite("tip_z", &env::EnvState::tip_z)
      .def_readwrite("j1", &env::EnvState::j1)
      .def_readwrite("j2", &env::EnvState::j2)
      .def_readwrite("j4", &env::EnvState::j4)
      .def("as_vector", &env::EnvState::as_vector);

  py::class_<env::Action>(m, "Action")
      .def(py::init<>())
      .def(py::init([](double d1, double d2, double d4) { return env::Action{d1, d2, d4}; }),
           py::arg("d1"), py::arg("d2"), py::arg("d4"))
      .def_readwrite("d1", &env::Action::d1)
      .def_readwrite("d2", &env::Action::d2)
      .def_readwrite("d4", &env::Action::d4);

  py::enum_<env::Terminal>(m, "Terminal")
      .value("NONE", env::Terminal::kNone)
      .value("GOAL", env::Terminal::kGoal)
      .value("COLLISION", env::Terminal::kCollision)
      .value("TIMEOUT", env::Terminal::kTimeout);

  py::class_<env::StepOutcome>(m, "StepOutcome")
      .def_readonly("next_state", &env::StepOutcome::next_state)
      .def_readonly("reward", &env::StepOutcome::reward)
      .def_readonly("terminal", &env::StepOutcome::terminal);

  py::class_<env::ArmEnv>(m, "ArmEnv")
      .def(py::init<env::EnvConfig>(), py::arg("config") = env::EnvConfig{})
      .def("reset", &env::ArmEnv::reset, py::return_value_policy::copy)
      .def("step", &env::ArmEnv::step)
      .def_property_readonly("state", &env::ArmEnv::state)
      .def_property_readonly("steps_taken", &env::ArmEnv::steps_taken)
      .def_property_readonly("done", &env::ArmEnv::done);

  m.attr("ACTION_BOUND") = env::kActionBound;
  m.attr("CELL_SIZE") = apf::kCellSize;
  m.def("forward_kinematics", &env::forward_kinematics, py::arg("j1"), py::arg("j2"),
        py::arg("j4"), py::arg("config") = env::EnvConfig{});
  m.def("env_reward", &env::env_reward, py::arg("distance"), py::arg("collided"),
        py::arg("max_steps") = 100);
  m.def("env_reset", &env::reset, py::arg("config") = env::EnvConfig{});
  m.def("env_step", &env::step, py::arg("state"), py::arg("action"), py::arg("step_index"),
        py::arg("config") = env::EnvConfig{});
  m.def("distance", &env::distance, py::arg("state"), py::arg("goal"));

  // --- apf ---
  py::class_<apf::PotentialState>(m, "PotentialState")
      .def(py::init([](int cx, int cy, int cz) { return apf::PotentialState{cx, cy, cz}; }),
           py::arg("cx"), py::arg("cy"), py::arg("cz"))
      .def_readwrite("cx", &apf::PotentialState::cx)
      .def_readwrite("cy", &apf::PotentialState::cy)
      .def_readwrite("cz", &apf::PotentialState::cz)
      .def("__eq__", [](const apf::PotentialState& a, const apf::PotentialState& b) { return a == b; })
      .def("__repr__", [](const apf::PotentialState& p) {
        std::ostringstream out;
        out << "PotentialState(" << p.cx << ", " << p.cy << ", " << p.cz << ")";
        return out.str();
      });

  py::class_<apf::Trajectory>(m, "Trajectory")
      .def(py::init([](const std::vector<apf::PotentialState>& states, double reward) {
             return apf::Trajectory{states, reward};
           }),
           py::arg("states"), py::arg("episodic_reward"))
      .def_readwrite("states", &apf::Trajectory::states)
      .def_readwrite("episodic_reward", &apf::Trajectory::episodic_reward);

  py::class_<apf::TrajectoryBuffer>(m, "TrajectoryBuffer")
      .def(py::init<std::size_t>(), py::arg("capacity") = 2000)
      .def("commit", &apf::TrajectoryBuffer::commit)
      .def_property_readonly("size", &apf::TrajectoryBuffer::size)
      .def_property_readonly("capacity", &apf::TrajectoryBuffer::capacity)
      .def("rewards", [](const apf::TrajectoryBuffer& b) {
        std::vector<double> out;
        for (const auto& t : b.entries()) out.push_back(t.episodic_reward);
        return out;
      });

  m.def("map_state", &apf::map_state);
  m.def("apf_target", &apf::apf_target, py::arg("n_good"), py::arg("n_bad"));
  m.def(
      "sample_and_count",
      [](const apf::TrajectoryBuffer& buffer, int batch_size, std::uint64_t seed) {
        Rng rng(seed);
        std::map<std::tuple<int, int, int>, std::pair<std::int64_t, std::int64_t>> out;
        for (const auto& [state, c] : apf::sample_and_count(buffer, batch_size, rng))
          out[{state.cx, state.cy, state.cz}] = {c.n_good, c.n_bad};
        return out;
      },
      py::arg("buffer"), py::arg("batch_size") = 64, py::arg("seed") = 0);
  m.def("potential", &apf::potential, py::arg("net"), py::arg("state"));
  m.def("shaping_reward", &apf::shaping_reward, py::arg("net"), py::arg("s"), py::arg("s_next"),
        py::arg("gamma") = 0.99, py::arg("include_gamma") = true);

  // --- tabular oracle ---
  py::class_<tabular::TabularMdp>(m, "TabularMdp")
      .def(py::init([](int n_states, int n_actions, const std::vector<double>& transition,
                       const std::vector<double>& reward) {
             tabular::TabularMdp mdp{n_states, n_actions, transition, reward};
             mdp.validate();
             return mdp;
           }),
           py::arg("n_states"), py::arg("n_actions"), py::arg("transition"), py::arg("reward"))
      .def_readonly("n_states", &tabular::TabularMdp::n_states)
      .def_readonly("n_actions", &tabular::TabularMdp::n_actions);

  py::class_<tabular::ValueIterationResult>(m, "ValueIterationResult")
      .def_readonly("values", &tabular::ValueIterationResult::values)
      .def_readonly("greedy_policy", &tabular::ValueIterationResult::greedy_policy)
      .def_readonly("sweeps", &tabular::ValueIterationResult::sweeps);

  py::class_<tabular::InvarianceReport>(m, "InvarianceReport")
      .def_readonly("greedy_policies_equal", &tabular::InvarianceReport::greedy_policies_equal)
      .def_readonly("policy_raw", &tabular::InvarianceReport::policy_raw)
      .def_readonly("policy_shaped", &tabular::InvarianceReport::policy_shaped);

  m.def("value_iteration", &tabular::value_iteration, py::arg("mdp"), py::arg("gamma"),
        py::arg("tol") = 1e-10, py::arg("max_sweeps") = 1000000);
  m.def("verify_policy_invariance", &tabular::verify_policy_invariance, py::arg("mdp"),
        py::arg("potential"), py::arg("gamma"));

  // --- ddpg ---
  py::class_<ddpg::AgentHyper>(m, "AgentHyper")
      .def(py::init<>())
      .def_readwrite("actor_hidden", &ddpg::AgentHyper::actor_hidden)
      .def_readwrite("critic_hidden", &ddpg::AgentHyper::critic_hidden)
      .def_readwrite("batch_size", &ddpg::AgentHyper::batch_size)
      .def_readwrite("lr_critic", &ddpg::AgentHyper::lr_critic)
      .def_readwrite("lr_actor", &ddpg::AgentHyper::lr_actor)
      .def_readwrite("gamma", &ddpg::AgentHyper::gamma)
      .def_readwrite("tau", &ddpg::AgentHyper::tau)
      .def_readwrite("replay_capacity", &ddpg::AgentHyper::replay_capacity);

  py::class_<ddpg::Transition>(m, "Transition")
      .def(py::init([](const env::EnvState& s, const env::Action& a, double r,
                       const env::EnvState& s_next, bool terminal) {
             return ddpg::Transition{s, a, r, s_next, terminal};
           }),
           py::arg("s"), py::arg("a"), py::arg("r"), py::arg("s_next"), py::arg("terminal"))
      .def_readwrite("r", &ddpg::Transition::r)
      .def_readwrite("terminal", &ddpg::Transition::terminal);

  py::class_<ddpg::UpdateStats>(m, "UpdateStats")
      .def_readonly("applied", &ddpg::UpdateStats::applied)
      .def_readonly("critic_loss", &ddpg::UpdateStats::critic_loss)
      .def_readonly("actor_objective", &ddpg::UpdateStats::actor_objective);

  py::class_<PyAgent>(m, "Agent")
      .def(py::init<const ddpg::AgentHyper&, std::uint64_t>(), py::arg("hyper") = ddpg::AgentHyper{},
           py::arg("seed") = 0)
      .def("select_action", &PyAgent::select_action, py::arg("state"), py::arg("epsilon"))
      .def("act_greedy", &PyAgent::act_greedy)
      .def("store", &PyAgent::store)
      .def("update", &PyAgent::update)
      .def("critic_target", &PyAgent::critic_target, py::arg("r"), py::arg("s_next"),
           py::arg("terminal"))
      .def_property_readonly("buffer_size", &PyAgent::buffer_size)
      .def("save_actor", &PyAgent::save_actor)
      .def_property_readonly("actor", &PyAgent::actor)
      .def_property_readonly("critic", &PyAgent::critic);

  // --- harness ---
  py::enum_<harness::AgentKind>(m, "AgentKind")
      .value("DDPG", harness::AgentKind::kDdpg)
      .value("APF_DDPG", harness::AgentKind::kApfDdpg);

  py::class_<harness::ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_static("from_json", &harness::config_from_json_text, py::arg("text"))
      .def_static("from_file", &harness::load_config, py::arg("path"))
      .def_readwrite("agent_kind", &harness::ExperimentConfig::agent_kind)
      .def_readwrite("episodes", &harness::ExperimentConfig::episodes)
      .def_readwrite("runs", &harness::ExperimentConfig::runs)
      .def_readwrite("base_seed", &harness::ExperimentConfig::base_seed)
      .def_readwrite("gamma", &harness::ExperimentConfig::gamma)
      .def_readwrite("env", &harness::ExperimentConfig::env)
      .def_readwrite("agent", &harness::ExperimentConfig::agent)
      .def_readwrite("epsilon_start", &harness::ExperimentConfig::epsilon_start)
      .def_readwrite("epsilon_end", &harness::ExperimentConfig::epsilon_end)
      .def_readwrite("epsilon_decay_fraction", &harness::ExperimentConfig::epsilon_decay_fraction)
      .def_readwrite("shaping_includes_gamma", &harness::ExperimentConfig::shaping_includes_gamma)
      .def_readwrite("rank_by_shaped_reward", &harness::ExperimentConfig::rank_by_shaped_reward)
      .def_readwrite("failure_threshold", &harness::ExperimentConfig::failure_threshold)
      .def_readwrite("out_dir", &harness::ExperimentConfig::out_dir)
      .def_readwrite("threads", &harness::ExperimentConfig::threads)
      .def_readwrite("save_models", &harness::ExperimentConfig::save_models)
      .def_property(
          "apf_hidden", [](const harness::ExperimentConfig& c) { return c.apf.hidden; },
          [](harness::ExperimentConfig& c, const std::vector<int>& h) { c.apf.hidden = h; })
      .def_property(
          "lr_apf", [](const harness::ExperimentConfig& c) { return c.apf.learning_rate; },
          [](harness::ExperimentConfig& c, double lr) { c.apf.learning_rate = lr; })
      .def_property(
          "trajectory_capacity",
          [](const harness::ExperimentConfig& c) { return c.apf.buffer_capacity; },
          [](harness::ExperimentConfig& c, std::size_t n) { c.apf.buffer_capacity = n; });

  py::class_<harness::EpisodeRecord>(m, "EpisodeRecord")
      .def_readonly("run_id", &harness::EpisodeRecord::run_id)
      .def_readonly("episode", &harness::EpisodeRecord::episode)
      .def_readonly("reward", &harness::EpisodeRecord::reward)
      .def_readonly("steps", &harness::EpisodeRecord::steps)
      .def_readonly("terminal", &harness::EpisodeRecord::terminal);

  py::class_<harness::RunStats>(m, "RunStats")
      .def_readonly("env_steps", &harness::RunStats::env_steps)
      .def_readonly("ddpg_update_attempts", &harness::RunStats::ddpg_update_attempts)
      .def_readonly("ddpg_updates_applied", &harness::RunStats::ddpg_updates_applied)
      .def_readonly("apf_update_attempts", &harness::RunStats::apf_update_attempts)
      .def_readonly("apf_updates_applied", &harness::RunStats::apf_updates_applied)
      .def_readonly("diverged", &harness::RunStats::diverged);

  py::class_<harness::ExperimentResult>(m, "ExperimentResult")
      .def_readonly("records", &harness::ExperimentResult::records)
      .def_readonly("run_stats", &harness::ExperimentResult::run_stats)
      .def_readonly("csv_path", &harness::ExperimentResult::csv_path);

  py::class_<harness::ComparisonReport>(m, "ComparisonReport")
      .def_readonly("episodes", &harness::ComparisonReport::episodes)
      .def_readonly("runs_a", &harness::ComparisonReport::runs_a)
      .def_readonly("runs_b", &harness::ComparisonReport::runs_b)
      .def_readonly("mean_final100_a", &harness::ComparisonReport::mean_final100_a)
      .def_readonly("mean_final100_b", &harness::ComparisonReport::mean_final100_b)
      .def_readonly("t_statistic", &harness::ComparisonReport::t_statistic)
      .def_readonly("p_two_sided", &harness::ComparisonReport::p_two_sided)
      .def_readonly("p_one_sided_b_greater", &harness::ComparisonReport::p_one_sided_b_greater)
      .def_readonly("welch_t", &harness::ComparisonReport::welch_t)
      .def_readonly("welch_p_two_sided", &harness::ComparisonReport::welch_p_two_sided)
      .def_readonly("final100_a", &harness::ComparisonReport::final100_a)
      .def_readonly("final100_b", &harness::ComparisonReport::final100_b)
      .def_readonly("failures_a", &harness::ComparisonReport::failures_a)
      .def_readonly("failures_b", &harness::ComparisonReport::failures_b)
      .def("text", &harness::format_report_text);

  m.def("run_experiment", &harness::run_experiment, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("read_records_csv", &harness::read_records_csv, py::arg("path"));
  m.def(
      "compare",
      [](const std::string& path_a, const std::string& path_b, double threshold) {
        return harness::compare(harness::read_records_csv(path_a),
                                harness::read_records_csv(path_b), threshold);
      },
      py::arg("records_a"), py::arg("records_b"), py::arg("failure_threshold") = -50.0);
  m.def("moving_average", &stats::moving_average, py::arg("series"), py::arg("window") = 100);
  m.def("epsilon_for_episode", &harness::epsilon_for_episode, py::arg("config"),
        py::arg("episode"));
}

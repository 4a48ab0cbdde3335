#pragma once

#include <cstdint>
#include <vector>

#include "apfddpg/env.hpp"
#include "apfddpg/nn.hpp"
#include "apfddpg/rng.hpp"

namespace apfddpg::ddpg {

/// One experience. The stored reward is the shaped reward when an adaptive
/// potential is active, the raw environment reward otherwise.
struct Transition {
  env::EnvState s;
  env::Action a;
  double r = 0.0;
  env::EnvState s_next;
  bool terminal = false;
};

/// Ring buffer of the most recent transitions; eviction is strictly oldest-first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000);

  /// Appends, evicting the oldest transition when full. Throws
  /// std::invalid_argument on non-finite components.
  void store(Transition transition);

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return data_[i]; }

  /// Uniform iid index draw over the stored transitions.
  std::size_t sample_index(Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t write_ = 0;
  std::vector<Transition> data_;
};

struct AgentHyper {
  std::vector<int> actor_hidden{512, 512};
  std::vector<int> critic_hidden{512, 512};
  int batch_size = 64;
  double lr_critic = 0.02;
  double lr_actor = 0.01;
  double gamma = 0.99;
  double tau = 0.01;
  std::size_t replay_capacity = 10000;
};

/// The four networks: critic Q(s,a), actor mu(s) and their targets. The
/// actor output is tanh scaled by the action bound, so actions respect the
/// bound architecturally.
struct AgentNets {
  nn::DenseNet critic;
  nn::DenseNet critic_target;
  nn::DenseNet actor;
  nn::DenseNet actor_target;
};

/// Fresh networks (targets start as copies of the online nets), seeded from
/// the run seed through the per-network streams.
AgentNets init_agent_nets(const AgentHyper& hyper, std::uint64_t run_seed);

/// Epsilon-greedy: with probability epsilon a uniform random action, else
/// the actor output.
env::Action select_action(const AgentNets& nets, const env::EnvState& state, double epsilon,
                          Rng& rng);

/// Deterministic actor output, for evaluation and deployment.
env::Action act_greedy(const AgentNets& nets, const env::EnvState& state);

/// Bootstrap target r + gamma * Qhat(s', muhat(s')); just r on terminal
/// transitions.
double critic_target(double r, const env::EnvState& s_next, bool terminal, const AgentNets& nets,
                     double gamma);

/// Uniformly sampled minibatch in batched matrix form (rows are samples).
struct MiniBatch {
  Eigen::MatrixXd states;       // B x 6
  Eigen::MatrixXd actions;      // B x 3
  Eigen::VectorXd rewards;      // B
  Eigen::MatrixXd next_states;  // B x 6
  Eigen::VectorXd nonterminal;  // B, 1.0 where bootstrapping applies
};

MiniBatch sample_batch(const ReplayBuffer& buffer, int batch_size, Rng& rng);

/// One critic SGD step on the mean squared Bellman error. Returns the loss.
/// Throws DivergenceError on a non-finite loss.
double critic_step(AgentNets& nets, const MiniBatch& batch, double gamma, double learning_rate);

/// One actor gradient-ascent step on mean Q(s, mu(s)). The critic only
/// supplies input gradients; its parameters are untouched. Returns the
/// objective value.
double actor_step(AgentNets& nets, const MiniBatch& batch, double learning_rate);

/// Soft update of both targets: theta_hat <- tau*theta + (1-tau)*theta_hat.
void soft_update_targets(AgentNets& nets, double tau);

struct UpdateStats {
  bool applied = false;
  double critic_loss = 0.0;
  double actor_objective = 0.0;
};

/// Full per-step update: sample, critic step, actor step, target sync.
/// No-op (applied=false) while the buffer holds fewer than batch_size
/// transitions.
UpdateStats update(AgentNets& nets, const ReplayBuffer& buffer, const AgentHyper& hyper,
                   Rng& rng);

}  // namespace apfddpg::ddpg

#include "apfddpg/ddpg.hpp"

#include <cmath>
#include <stdexcept>

#include "apfddpg/errors.hpp"

namespace apfddpg::ddpg {

namespace {

bool finite_state(const env::EnvState& s) {
  return std::isfinite(s.tip_x) && std::isfinite(s.tip_y) && std::isfinite(s.tip_z) &&
         std::isfinite(s.j1) && std::isfinite(s.j2) && std::isfinite(s.j4);
}

std::vector<int> full_sizes(int input, const std::vector<int>& hidden, int output) {
  std::vector<int> sizes;
  sizes.reserve(hidden.size() + 2);
  sizes.push_back(input);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  return sizes;
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("replay buffer capacity must be positive");
  data_.reserve(capacity_);
}

void ReplayBuffer::store(Transition transition) {
  if (!finite_state(transition.s) || !finite_state(transition.s_next) ||
      !std::isfinite(transition.r) || !std::isfinite(transition.a.d1) ||
      !std::isfinite(transition.a.d2) || !std::isfinite(transition.a.d4))
    throw std::invalid_argument("replay store: non-finite transition");
  if (data_.size() < capacity_) {
    data_.push_back(std::move(transition));
  } else {
    data_[write_] = std::move(transition);
  }
  write_ = (write_ + 1) % capacity_;
}

std::size_t ReplayBuffer::sample_index(Rng& rng) const {
  if (data_.empty()) throw std::logic_error("replay sample: buffer is empty");
  return static_cast<std::size_t>(rng.below(data_.size()));
}

AgentNets init_agent_nets(const AgentHyper& hyper, std::uint64_t run_seed) {
  AgentNets nets;
  nets.critic = nn::init_net(full_sizes(9, hyper.critic_hidden, 1),
                             nn::OutputActivation::kIdentity,
                             stream_seed(run_seed, Stream::kCriticInit));
  nets.actor = nn::init_net(full_sizes(6, hyper.actor_hidden, 3),
                            nn::OutputActivation::kScaledTanh,
                            stream_seed(run_seed, Stream::kActorInit), env::kActionBound);
  nets.critic_target = nets.critic;
  nets.actor_target = nets.actor;
  return nets;
}

env::Action select_action(const AgentNets& nets, const env::EnvState& state, double epsilon,
                          Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("select_action: epsilon must lie in [0, 1]");
  const double bound = nets.actor.output_scale;
  if (epsilon > 0.0 && rng.uniform01() < epsilon)
    return {rng.uniform(-bound, bound), rng.uniform(-bound, bound), rng.uniform(-bound, bound)};
  return act_greedy(nets, state);
}

env::Action act_greedy(const AgentNets& nets, const env::EnvState& state) {
  const Eigen::VectorXd out = nn::forward(nets.actor, state.as_vector());
  return {out(0), out(1), out(2)};
}

double critic_target(double r, const env::EnvState& s_next, bool terminal, const AgentNets& nets,
                     double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("critic_target: gamma must lie in [0, 1]");
  if (terminal) return r;
  const Eigen::VectorXd a_next = nn::forward(nets.actor_target, s_next.as_vector());
  Eigen::VectorXd sa(9);
  sa << s_next.as_vector(), a_next;
  return r + gamma * nn::forward(nets.critic_target, sa)(0);
}

MiniBatch sample_batch(const ReplayBuffer& buffer, int batch_size, Rng& rng) {
  if (batch_size < 1) throw std::invalid_argument("sample_batch: batch size must be positive");
  MiniBatch batch;
  batch.states.resize(batch_size, 6);
  batch.actions.resize(batch_size, 3);
  batch.rewards.resize(batch_size);
  batch.next_states.resize(batch_size, 6);
  batch.nonterminal.resize(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    const Transition& t = buffer[buffer.sample_index(rng)];
    batch.states.row(i) = t.s.as_vector().transpose();
    batch.actions.row(i) = t.a.as_vector().transpose();
    batch.rewards(i) = t.r;
    batch.next_states.row(i) = t.s_next.as_vector().transpose();
    batch.nonterminal(i) = t.terminal ? 0.0 : 1.0;
  }
  return batch;
}

double critic_step(AgentNets& nets, const MiniBatch& batch, double gamma, double learning_rate) {
  const Eigen::Index b = batch.states.rows();

  Eigen::MatrixXd next_sa(b, 9);
  next_sa.leftCols(6) = batch.next_states;
  next_sa.rightCols(3) = nn::forward_batch(nets.actor_target, batch.next_states);
  const Eigen::VectorXd q_next = nn::forward_batch(nets.critic_target, next_sa).col(0);
  const Eigen::VectorXd target =
      batch.rewards + gamma * batch.nonterminal.cwiseProduct(q_next);

  Eigen::MatrixXd sa(b, 9);
  sa.leftCols(6) = batch.states;
  sa.rightCols(3) = batch.actions;
  nn::ForwardTrace trace;
  const Eigen::VectorXd pred = nn::forward_batch(nets.critic, sa, &trace).col(0);
  const Eigen::VectorXd residual = pred - target;
  const double loss = residual.squaredNorm() / static_cast<double>(b);
  if (!std::isfinite(loss)) throw DivergenceError("critic update: non-finite loss");

  const Eigen::MatrixXd upstream = (2.0 / static_cast<double>(b)) * residual;
  auto grads = nn::backward_batch(nets.critic, trace, upstream);
  nn::sgd_step(nets.critic, grads.grads, learning_rate);
  return loss;
}

double actor_step(AgentNets& nets, const MiniBatch& batch, double learning_rate) {
  const Eigen::Index b = batch.states.rows();

  nn::ForwardTrace actor_trace;
  const Eigen::MatrixXd actions = nn::forward_batch(nets.actor, batch.states, &actor_trace);
  Eigen::MatrixXd sa(b, 9);
  sa.leftCols(6) = batch.states;
  sa.rightCols(3) = actions;
  nn::ForwardTrace critic_trace;
  const Eigen::VectorXd q = nn::forward_batch(nets.critic, sa, &critic_trace).col(0);
  const double objective = q.mean();
  if (!std::isfinite(objective)) throw DivergenceError("actor update: non-finite objective");

  // Ascent on mean Q == descent on -mean Q. The critic is frozen here: only
  // its input gradient flows back into the actor.
  const Eigen::MatrixXd upstream = Eigen::MatrixXd::Constant(b, 1, -1.0 / static_cast<double>(b));
  auto critic_back = nn::backward_batch(nets.critic, critic_trace, upstream,
                                        {.parameter_grads = false, .input_grads = true});
  const Eigen::MatrixXd d_actions = critic_back.input_grads.rightCols(3);
  auto actor_back = nn::backward_batch(nets.actor, actor_trace, d_actions);
  nn::sgd_step(nets.actor, actor_back.grads, learning_rate);
  return objective;
}

void soft_update_targets(AgentNets& nets, double tau) {
  nn::soft_update(nets.critic_target, nets.critic, tau);
  nn::soft_update(nets.actor_target, nets.actor, tau);
}

UpdateStats update(AgentNets& nets, const ReplayBuffer& buffer, const AgentHyper& hyper,
                   Rng& rng) {
  UpdateStats stats;
  if (buffer.size() < static_cast<std::size_t>(hyper.batch_size)) return stats;
  const MiniBatch batch = sample_batch(buffer, hyper.batch_size, rng);
  stats.applied = true;
  stats.critic_loss = critic_step(nets, batch, hyper.gamma, hyper.lr_critic);
  stats.actor_objective = actor_step(nets, batch, hyper.lr_actor);
  soft_update_targets(nets, hyper.tau);
  return stats;
}

}  // namespace apfddpg::ddpg

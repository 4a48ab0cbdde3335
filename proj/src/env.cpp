#include "apfddpg/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace apfddpg::env {

void EnvConfig::validate() const {
  if (!(link1 > 0.0) || !(link2 > 0.0))
    throw std::invalid_argument("env config: link lengths must be positive");
  if (max_steps < 1) throw std::invalid_argument("env config: max_steps must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("env config: gamma must lie in [0, 1]");
  if (!(goal_tolerance > 0.0))
    throw std::invalid_argument("env config: goal tolerance must be positive");
  for (const auto& lim : joint_limits) {
    if (!(lim[0] < lim[1]))
      throw std::invalid_argument("env config: joint limit interval is empty");
    if (lim[0] > 0.0 || lim[1] < 0.0)
      throw std::invalid_argument("env config: joint limits must contain the initial pose (0)");
  }
  const double goal_norm = std::hypot(goal[0], goal[1], goal[2]);
  if (!(std::abs(link1 - link2) + goal_tolerance < goal_norm && goal_norm < link1 + link2))
    throw std::invalid_argument("env config: goal is not reachable by the arm");
}

const char* terminal_name(Terminal t) {
  switch (t) {
    case Terminal::kNone: return "none";
    case Terminal::kGoal: return "goal";
    case Terminal::kCollision: return "collision";
    case Terminal::kTimeout: return "timeout";
  }
  return "none";
}

Terminal terminal_from_name(const std::string& name) {
  if (name == "none") return Terminal::kNone;
  if (name == "goal") return Terminal::kGoal;
  if (name == "collision") return Terminal::kCollision;
  if (name == "timeout") return Terminal::kTimeout;
  throw std::invalid_argument("unknown terminal tag '" + name + "'");
}

std::array<double, 3> forward_kinematics(double j1, double j2, double j4,
                                         const EnvConfig& config) {
  const double c1 = std::cos(j1), s1 = std::sin(j1);
  const double c2 = std::cos(j2), s2 = std::sin(j2);
  const double c24 = std::cos(j2 + j4), s24 = std::sin(j2 + j4);
  return {config.link1 * c1 * c2 + config.link2 * c1 * c24,
          config.link1 * s1 * c2 + config.link2 * s1 * c24,
          -config.link1 * s2 - config.link2 * s24};
}

double env_reward(double distance, bool collided, int max_steps) {
  if (collided) return -static_cast<double>(max_steps);
  if (distance < 0.1) return 1.0;
  if (distance < 0.5) return -0.5;
  if (distance <= 1.5) return -1.0;
  return -5.0;
}

EnvState reset(const EnvConfig& config) {
  const auto tip = forward_kinematics(0.0, 0.0, 0.0, config);
  return {tip[0], tip[1], tip[2], 0.0, 0.0, 0.0};
}

StepOutcome step(const EnvState& state, const Action& action, int step_index,
                 const EnvConfig& config) {
  if (!std::isfinite(action.d1) || !std::isfinite(action.d2) || !std::isfinite(action.d4))
    throw std::invalid_argument("step: non-finite action");
  if (step_index < 0 || step_index >= config.max_steps)
    throw std::invalid_argument("step: step index " + std::to_string(step_index) +
                                " outside [0, max_steps)");

  const double d1 = std::clamp(action.d1, -kActionBound, kActionBound);
  const double d2 = std::clamp(action.d2, -kActionBound, kActionBound);
  const double d4 = std::clamp(action.d4, -kActionBound, kActionBound);

  EnvState next;
  next.j1 = std::clamp(state.j1 + d1, config.joint_limits[0][0], config.joint_limits[0][1]);
  next.j2 = std::clamp(state.j2 + d2, config.joint_limits[1][0], config.joint_limits[1][1]);
  next.j4 = std::clamp(state.j4 + d4, config.joint_limits[2][0], config.joint_limits[2][1]);
  const auto tip = forward_kinematics(next.j1, next.j2, next.j4, config);
  next.tip_x = tip[0];
  next.tip_y = tip[1];
  next.tip_z = tip[2];

  const bool collided = next.tip_z < config.floor_z;
  const double dist = distance(next, config.goal);

  StepOutcome outcome;
  outcome.next_state = next;
  outcome.reward = env_reward(dist, collided, config.max_steps);
  if (collided)
    outcome.terminal = Terminal::kCollision;
  else if (dist < config.goal_tolerance)
    outcome.terminal = Terminal::kGoal;
  else if (step_index + 1 == config.max_steps)
    outcome.terminal = Terminal::kTimeout;
  return outcome;
}

double distance(const EnvState& state, const std::array<double, 3>& goal) {
  return std::hypot(state.tip_x - goal[0], state.tip_y - goal[1], state.tip_z - goal[2]);
}

ArmEnv::ArmEnv(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  state_ = env::reset(config_);
}

const EnvState& ArmEnv::reset() {
  state_ = env::reset(config_);
  steps_ = 0;
  done_ = false;
  return state_;
}

StepOutcome ArmEnv::step(const Action& action) {
  if (done_) throw std::logic_error("ArmEnv::step called on a finished episode");
  StepOutcome outcome = env::step(state_, action, steps_, config_);
  state_ = outcome.next_state;
  ++steps_;
  done_ = outcome.terminal != Terminal::kNone;
  return outcome;
}

}  // namespace apfddpg::env

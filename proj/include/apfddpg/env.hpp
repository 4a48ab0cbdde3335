#pragma once

#include <Eigen/Dense>
#include <array>
#include <numbers>

namespace apfddpg::env {

/// Largest per-step joint change, radians.
inline constexpr double kActionBound = std::numbers::pi / 16.0;

/// Kinematic yaw-pitch-pitch reaching arm. The chain is two links: joint 1
/// yaws about z, joints 2 and 4 pitch the first and second link. Transitions
/// are deterministic; episodes end on goal, collision with the floor plane,
/// or timeout.
struct EnvConfig {
  double link1 = 0.37;
  double link2 = 0.52;
  std::array<double, 3> goal{0.0, 0.45, 0.45};
  double goal_tolerance = 0.1;
  std::array<std::array<double, 2>, 3> joint_limits{{{-1.5, 1.5}, {-1.5, 1.5}, {-1.5, 1.5}}};
  double floor_z = -0.3;
  int max_steps = 100;
  double gamma = 0.99;

  /// Throws std::invalid_argument when the goal is unreachable, a limit
  /// interval is empty or excludes the initial pose, or counts are invalid.
  void validate() const;
};

struct EnvState {
  double tip_x = 0.0, tip_y = 0.0, tip_z = 0.0;  // meters
  double j1 = 0.0, j2 = 0.0, j4 = 0.0;           // radians

  Eigen::Matrix<double, 6, 1> as_vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << tip_x, tip_y, tip_z, j1, j2, j4;
    return v;
  }
};

struct Action {
  double d1 = 0.0, d2 = 0.0, d4 = 0.0;  // radians, clamped to +-kActionBound

  Eigen::Vector3d as_vector() const { return {d1, d2, d4}; }
};

enum class Terminal { kNone, kGoal, kCollision, kTimeout };

const char* terminal_name(Terminal t);
Terminal terminal_from_name(const std::string& name);

struct StepOutcome {
  EnvState next_state;
  double reward = 0.0;
  Terminal terminal = Terminal::kNone;
};

/// Tip position for the given joint angles.
std::array<double, 3> forward_kinematics(double j1, double j2, double j4, const EnvConfig& config);

/// Banded reaching reward. Collision dominates; the distance bands are
/// d < 0.1 -> 1, 0.1 <= d < 0.5 -> -0.5, 0.5 <= d <= 1.5 -> -1, d > 1.5 -> -5.
double env_reward(double distance, bool collided, int max_steps);

/// Fixed initial pose: all joints at zero.
EnvState reset(const EnvConfig& config);

/// One deterministic transition. Action components are clamped to the action
/// bound, joints to their limit intervals. Reward and termination are
/// evaluated on the post-step state. Throws on non-finite actions or a step
/// index at or past max_steps.
StepOutcome step(const EnvState& state, const Action& action, int step_index,
                 const EnvConfig& config);

/// Euclidean distance between the tip and a goal point.
double distance(const EnvState& state, const std::array<double, 3>& goal);

/// Convenience wrapper owning config, current state and the step counter.
class ArmEnv {
 public:
  explicit ArmEnv(EnvConfig config);

  const EnvState& reset();
  StepOutcome step(const Action& action);

  const EnvState& state() const { return state_; }
  int steps_taken() const { return steps_; }
  bool done() const { return done_; }
  const EnvConfig& config() const { return config_; }

 private:
  EnvConfig config_;
  EnvState state_;
  int steps_ = 0;
  bool done_ = false;
};

}  // namespace apfddpg::env

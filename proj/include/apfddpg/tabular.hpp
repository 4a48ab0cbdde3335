#pragma once

#include <vector>

namespace apfddpg::tabular {

/// Finite MDP with dense transition and reward tensors, both indexed by
/// (state, action, next_state) flattened row-major.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transition;  // probabilities, rows sum to one
  std::vector<double> reward;

  std::size_t index(int s, int a, int s_next) const {
    return (static_cast<std::size_t>(s) * n_actions + a) * n_states + s_next;
  }

  /// Throws std::invalid_argument on shape mismatch, negative or non-summing
  /// probabilities, or non-finite rewards.
  void validate() const;
};

struct ValueIterationResult {
  std::vector<double> values;
  std::vector<int> greedy_policy;  // argmax with lowest-action-index tie break
  int sweeps = 0;
};

/// Exact value iteration to sup-norm tolerance.
ValueIterationResult value_iteration(const TabularMdp& mdp, double gamma, double tol = 1e-10,
                                     int max_sweeps = 1000000);

struct InvarianceReport {
  bool greedy_policies_equal = false;
  std::vector<int> policy_raw;
  std::vector<int> policy_shaped;
};

/// Oracle for potential-based shaping: solves the MDP with raw rewards and
/// with rewards shifted by gamma*potential[s'] - potential[s], then compares
/// the greedy policies.
InvarianceReport verify_policy_invariance(const TabularMdp& mdp,
                                          const std::vector<double>& potential, double gamma);

}  // namespace apfddpg::tabular

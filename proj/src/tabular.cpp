#include "apfddpg/tabular.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace apfddpg::tabular {

void TabularMdp::validate() const {
  if (n_states < 1 || n_actions < 1)
    throw std::invalid_argument("mdp: need at least one state and one action");
  const std::size_t expected =
      static_cast<std::size_t>(n_states) * n_actions * n_states;
  if (transition.size() != expected || reward.size() != expected)
    throw std::invalid_argument("mdp: tensor sizes do not match n_states/n_actions");
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      double total = 0.0;
      for (int t = 0; t < n_states; ++t) {
        const double p = transition[index(s, a, t)];
        if (!(p >= 0.0) || p > 1.0)
          throw std::invalid_argument("mdp: transition probability outside [0, 1]");
        if (!std::isfinite(reward[index(s, a, t)]))
          throw std::invalid_argument("mdp: non-finite reward");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("mdp: transition row (s=" + std::to_string(s) +
                                    ", a=" + std::to_string(a) + ") sums to " +
                                    std::to_string(total));
    }
  }
}

ValueIterationResult value_iteration(const TabularMdp& mdp, double gamma, double tol,
                                     int max_sweeps) {
  mdp.validate();
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("value_iteration: gamma must lie in [0, 1)");
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tolerance must be positive");

  ValueIterationResult result;
  result.values.assign(mdp.n_states, 0.0);
  std::vector<double> next(mdp.n_states, 0.0);
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double delta = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.n_actions; ++a) {
        double q = 0.0;
        for (int t = 0; t < mdp.n_states; ++t) {
          const double p = mdp.transition[mdp.index(s, a, t)];
          if (p != 0.0) q += p * (mdp.reward[mdp.index(s, a, t)] + gamma * result.values[t]);
        }
        if (q > best) best = q;
      }
      next[s] = best;
      delta = std::max(delta, std::abs(best - result.values[s]));
    }
    result.values.swap(next);
    result.sweeps = sweep;
    if (delta < tol) break;
  }

  result.greedy_policy.assign(mdp.n_states, 0);
  for (int s = 0; s < mdp.n_states; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    int best_action = 0;
    for (int a = 0; a < mdp.n_actions; ++a) {
      double q = 0.0;
      for (int t = 0; t < mdp.n_states; ++t) {
        const double p = mdp.transition[mdp.index(s, a, t)];
        if (p != 0.0) q += p * (mdp.reward[mdp.index(s, a, t)] + gamma * result.values[t]);
      }
      if (q > best) {  // strict: ties keep the lowest action index
        best = q;
        best_action = a;
      }
    }
    result.greedy_policy[s] = best_action;
  }
  return result;
}

InvarianceReport verify_policy_invariance(const TabularMdp& mdp,
                                          const std::vector<double>& potential, double gamma) {
  mdp.validate();
  if (static_cast<int>(potential.size()) != mdp.n_states)
    throw std::invalid_argument("verify_policy_invariance: potential table size mismatch");

  TabularMdp shaped = mdp;
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      for (int t = 0; t < mdp.n_states; ++t)
        shaped.reward[shaped.index(s, a, t)] += gamma * potential[t] - potential[s];

  const auto raw = value_iteration(mdp, gamma);
  const auto with_shaping = value_iteration(shaped, gamma);

  InvarianceReport report;
  report.policy_raw = raw.greedy_policy;
  report.policy_shaped = with_shaping.greedy_policy;
  report.greedy_policies_equal = raw.greedy_policy == with_shaping.greedy_policy;
  return report;
}

}  // namespace apfddpg::tabular

#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "apfddpg/rng.hpp"
#include "apfddpg/tabular.hpp"

using namespace apfddpg;
using tabular::TabularMdp;

namespace {

// 5-state chain, 2 actions (left/right) with a 10% slip, step cost and a
// bonus for landing in the last state.
TabularMdp chain_mdp(int n_states = 5) {
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = 2;
  const std::size_t total = static_cast<std::size_t>(n_states) * 2 * n_states;
  mdp.transition.assign(total, 0.0);
  mdp.reward.assign(total, 0.0);
  for (int s = 0; s < n_states; ++s) {
    const int left = s > 0 ? s - 1 : 0;
    const int right = s < n_states - 1 ? s + 1 : n_states - 1;
    mdp.transition[mdp.index(s, 0, left)] += 0.9;
    mdp.transition[mdp.index(s, 0, s)] += 0.1;
    mdp.transition[mdp.index(s, 1, right)] += 0.9;
    mdp.transition[mdp.index(s, 1, s)] += 0.1;
    for (int a = 0; a < 2; ++a)
      for (int t = 0; t < n_states; ++t)
        mdp.reward[mdp.index(s, a, t)] = (t == n_states - 1 ? 1.0 : 0.0) - 0.05;
  }
  return mdp;
}

}  // namespace

TEST_CASE("value iteration solves the chain and prefers moving right") {
  const auto mdp = chain_mdp();
  const auto result = tabular::value_iteration(mdp, 0.99, 1e-10);
  for (int s = 0; s + 1 < mdp.n_states; ++s) CHECK(result.greedy_policy[s] == 1);
  // values increase toward the rewarding end
  for (int s = 0; s + 1 < mdp.n_states; ++s) CHECK(result.values[s] < result.values[s + 1]);
}

TEST_CASE("zero potential leaves the policy trivially unchanged") {
  const auto mdp = chain_mdp();
  const auto report = tabular::verify_policy_invariance(mdp, std::vector<double>(5, 0.0), 0.99);
  CHECK(report.greedy_policies_equal);
  CHECK(report.policy_raw == report.policy_shaped);
}

TEST_CASE("constant potential shifts rewards but not the argmax") {
  const auto mdp = chain_mdp();
  const auto report = tabular::verify_policy_invariance(mdp, std::vector<double>(5, 7.5), 0.99);
  CHECK(report.greedy_policies_equal);
}

TEST_CASE("random potentials preserve the greedy policy") {
  const auto mdp = chain_mdp();
  Rng rng(20240924);
  for (int table = 0; table < 20; ++table) {
    std::vector<double> potential(5);
    for (double& p : potential) p = rng.uniform(-10.0, 10.0);
    const auto report = tabular::verify_policy_invariance(mdp, potential, 0.99);
    CHECK(report.greedy_policies_equal);
  }
}

TEST_CASE("shaped optimal values differ from raw ones by the potential") {
  const auto mdp = chain_mdp();
  Rng rng(5);
  std::vector<double> potential(5);
  for (double& p : potential) p = rng.uniform(-3.0, 3.0);

  TabularMdp shaped = mdp;
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      for (int t = 0; t < mdp.n_states; ++t)
        shaped.reward[shaped.index(s, a, t)] += 0.99 * potential[t] - potential[s];

  const auto raw = tabular::value_iteration(mdp, 0.99, 1e-12);
  const auto sh = tabular::value_iteration(shaped, 0.99, 1e-12);
  for (int s = 0; s < 5; ++s)
    CHECK(sh.values[s] == doctest::Approx(raw.values[s] - potential[s]).epsilon(1e-6));
}

TEST_CASE("malformed MDPs are rejected") {
  auto mdp = chain_mdp();
  mdp.transition[0] = 0.5;  // row no longer sums to one
  CHECK_THROWS_AS(tabular::value_iteration(mdp, 0.99), std::invalid_argument);

  auto short_tensor = chain_mdp();
  short_tensor.transition.pop_back();
  CHECK_THROWS_AS(short_tensor.validate(), std::invalid_argument);

  const auto ok = chain_mdp();
  CHECK_THROWS_AS(tabular::verify_policy_invariance(ok, std::vector<double>(3, 0.0), 0.99),
                  std::invalid_argument);
}

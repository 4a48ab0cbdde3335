#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "apfddpg/env.hpp"
#include "apfddpg/nn.hpp"
#include "apfddpg/rng.hpp"

namespace apfddpg::apf {

/// Side length of the discretization cells, meters.
inline constexpr double kCellSize = 0.1;

/// Discretized tip position: floor(coordinate / 0.1) per axis.
struct PotentialState {
  int cx = 0, cy = 0, cz = 0;
  friend auto operator<=>(const PotentialState&, const PotentialState&) = default;
};

/// Project a continuous state onto its potential state. Joint angles do not
/// participate; only the tip position does. Floor semantics (toward -inf),
/// so a coordinate sitting exactly on a cell boundary maps to the upper cell.
PotentialState map_state(const env::EnvState& state);

/// The potential states visited in one episode, in visit order and including
/// the initial state, plus the episodic reward used to rank the trajectory.
struct Trajectory {
  std::vector<PotentialState> states;
  double episodic_reward = 0.0;
};

/// Bounded priority buffer of the best trajectories seen so far, ordered by
/// episodic reward descending. On overflow the minimum-reward trajectory is
/// evicted; among equal rewards the older one goes first.
class TrajectoryBuffer {
 public:
  explicit TrajectoryBuffer(std::size_t capacity = 2000);

  /// Sorted insert. Throws std::invalid_argument on an empty trajectory.
  void commit(Trajectory trajectory);

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::span<const Trajectory> entries() const { return entries_; }

 private:
  std::size_t capacity_;
  std::vector<Trajectory> entries_;  // episodic reward descending, newer first among ties
};

/// First floor(n/2) trajectories are good, the remainder bad.
/// Throws std::invalid_argument when fewer than two trajectories are stored.
std::pair<std::span<const Trajectory>, std::span<const Trajectory>> split_good_bad(
    const TrajectoryBuffer& buffer);

struct StateCounts {
  std::int64_t n_good = 0;
  std::int64_t n_bad = 0;
};

/// Keyed by potential state; ordered container so iteration order is defined.
using OccurrenceCounts = std::map<PotentialState, StateCounts>;

/// Sample batch_size/2 good and batch_size/2 bad trajectories uniformly
/// without replacement and count every occurrence of every potential state.
/// Returns empty counts while either half is still too small (warm-up).
OccurrenceCounts sample_and_count(const TrajectoryBuffer& buffer, int batch_size, Rng& rng);

/// Regression target (n_good - n_bad) / (n_good + n_bad), in [-1, 1].
/// Throws std::invalid_argument when both counts are zero.
double apf_target(std::int64_t n_good, std::int64_t n_bad);

struct ApfHyper {
  std::vector<int> hidden{512, 256};
  double learning_rate = 0.02;
  int batch_size = 64;
  std::size_t buffer_capacity = 2000;
};

/// Fresh potential network: 3 inputs (cell indices as reals), rectifier
/// hidden layers, one identity output.
nn::DenseNet init_apf_net(const ApfHyper& hyper, std::uint64_t rng_seed);

/// Potential value of one cell.
double potential(const nn::DenseNet& net, const PotentialState& state);

/// One epoch of minibatch SGD on mean squared error between the network and
/// the occurrence-ratio targets over the distinct states in counts. Returns
/// the mean minibatch loss, or nothing when counts are empty.
std::optional<double> update_apf(nn::DenseNet& net, const OccurrenceCounts& counts,
                                 double learning_rate, int batch_size, Rng& rng);

/// Shaping reward gamma * phi(Z(s_next)) - phi(Z(s)). With include_gamma
/// false the discount is dropped from the first term.
double shaping_reward(const nn::DenseNet& net, const env::EnvState& s,
                      const env::EnvState& s_next, double gamma, bool include_gamma = true);

}  // namespace apfddpg::apf

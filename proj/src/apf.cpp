#include "apfddpg/apf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "apfddpg/errors.hpp"

namespace apfddpg::apf {

PotentialState map_state(const env::EnvState& state) {
  auto cell = [](double coordinate) {
    return static_cast<int>(std::floor(coordinate / kCellSize));
  };
  return {cell(state.tip_x), cell(state.tip_y), cell(state.tip_z)};
}

TrajectoryBuffer::TrajectoryBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("trajectory buffer capacity must be positive");
}

void TrajectoryBuffer::commit(Trajectory trajectory) {
  if (trajectory.states.empty())
    throw std::invalid_argument("commit_trajectory: empty trajectory");
  // lower_bound on descending reward lands before existing equal rewards, so
  // newer trajectories sit above older ones and back() is always the oldest
  // of the minimum.
  auto pos = std::lower_bound(entries_.begin(), entries_.end(), trajectory,
                              [](const Trajectory& a, const Trajectory& b) {
                                return a.episodic_reward > b.episodic_reward;
                              });
  entries_.insert(pos, std::move(trajectory));
  if (entries_.size() > capacity_) entries_.pop_back();
}

std::pair<std::span<const Trajectory>, std::span<const Trajectory>> split_good_bad(
    const TrajectoryBuffer& buffer) {
  const auto entries = buffer.entries();
  if (entries.size() < 2)
    throw std::invalid_argument("split_good_bad: need at least two trajectories");
  const std::size_t good = entries.size() / 2;
  return {entries.first(good), entries.subspan(good)};
}

OccurrenceCounts sample_and_count(const TrajectoryBuffer& buffer, int batch_size, Rng& rng) {
  OccurrenceCounts counts;
  if (batch_size < 2) throw std::invalid_argument("sample_and_count: batch size must be >= 2");
  const std::size_t half = static_cast<std::size_t>(batch_size) / 2;
  if (buffer.size() < 2) return counts;
  auto [good, bad] = split_good_bad(buffer);
  if (good.size() < half || bad.size() < half) return counts;  // warm-up: skip this episode

  auto draw_half = [&](std::span<const Trajectory> side, bool is_good) {
    std::vector<std::uint32_t> index(side.size());
    std::iota(index.begin(), index.end(), 0u);
    for (std::size_t i = 0; i < half; ++i) {
      const std::size_t j = i + rng.below(index.size() - i);
      std::swap(index[i], index[j]);
      for (const PotentialState& s : side[index[i]].states) {
        StateCounts& c = counts[s];
        (is_good ? c.n_good : c.n_bad) += 1;
      }
    }
  };
  draw_half(good, true);
  draw_half(bad, false);
  return counts;
}

double apf_target(std::int64_t n_good, std::int64_t n_bad) {
  if (n_good < 0 || n_bad < 0) throw std::invalid_argument("apf_target: negative count");
  const std::int64_t total = n_good + n_bad;
  if (total < 1) throw std::invalid_argument("apf_target: state was never counted");
  return static_cast<double>(n_good - n_bad) / static_cast<double>(total);
}

nn::DenseNet init_apf_net(const ApfHyper& hyper, std::uint64_t rng_seed) {
  std::vector<int> sizes;
  sizes.reserve(hyper.hidden.size() + 2);
  sizes.push_back(3);
  sizes.insert(sizes.end(), hyper.hidden.begin(), hyper.hidden.end());
  sizes.push_back(1);
  return nn::init_net(sizes, nn::OutputActivation::kIdentity, rng_seed);
}

double potential(const nn::DenseNet& net, const PotentialState& state) {
  Eigen::Vector3d input(static_cast<double>(state.cx), static_cast<double>(state.cy),
                        static_cast<double>(state.cz));
  return nn::forward(net, input)(0);
}

std::optional<double> update_apf(nn::DenseNet& net, const OccurrenceCounts& counts,
                                 double learning_rate, int batch_size, Rng& rng) {
  if (counts.empty()) return std::nullopt;
  if (batch_size < 1) throw std::invalid_argument("update_apf: batch size must be positive");

  const std::size_t n = counts.size();
  Eigen::MatrixXd inputs(n, 3);
  Eigen::VectorXd targets(n);
  std::size_t row = 0;
  for (const auto& [state, c] : counts) {
    inputs(row, 0) = state.cx;
    inputs(row, 1) = state.cy;
    inputs(row, 2) = state.cz;
    targets(row) = apf_target(c.n_good, c.n_bad);
    ++row;
  }

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(order[i], order[j]);
  }

  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t m = std::min(static_cast<std::size_t>(batch_size), n - begin);
    Eigen::MatrixXd x(m, 3);
    Eigen::VectorXd y(m);
    for (std::size_t i = 0; i < m; ++i) {
      x.row(i) = inputs.row(order[begin + i]);
      y(i) = targets(order[begin + i]);
    }
    nn::ForwardTrace trace;
    Eigen::VectorXd pred = nn::forward_batch(net, x, &trace).col(0);
    Eigen::VectorXd residual = pred - y;
    const double loss = residual.squaredNorm() / static_cast<double>(m);
    if (!std::isfinite(loss)) throw DivergenceError("apf update: non-finite loss");
    Eigen::MatrixXd upstream = (2.0 / static_cast<double>(m)) * residual;
    auto grads = nn::backward_batch(net, trace, upstream);
    nn::sgd_step(net, grads.grads, learning_rate);
    loss_sum += loss;
    ++batches;
  }
  return loss_sum / static_cast<double>(batches);
}

double shaping_reward(const nn::DenseNet& net, const env::EnvState& s,
                      const env::EnvState& s_next, double gamma, bool include_gamma) {
  const double phi_next = potential(net, map_state(s_next));
  const double phi_here = potential(net, map_state(s));
  return (include_gamma ? gamma : 1.0) * phi_next - phi_here;
}

}  // namespace apfddpg::apf

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace apfddpg::nn {

enum class OutputActivation { kIdentity, kScaledTanh };

/// Dense feed-forward network with rectifier hidden layers. Plain value
/// object: copy/move freely, no internal sharing. All math is 64-bit.
struct DenseNet {
  std::vector<int> layer_sizes;
  std::vector<Eigen::MatrixXd> weights;  // weights[l] has shape (sizes[l+1] x sizes[l])
  std::vector<Eigen::VectorXd> biases;   // biases[l] has length sizes[l+1]
  OutputActivation output_activation = OutputActivation::kIdentity;
  double output_scale = 1.0;  // codomain of kScaledTanh is (-scale, scale)

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;
};

/// Per-parameter gradients, shape-congruent with their source network.
struct GradientSet {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

GradientSet zero_gradients(const DenseNet& net);

/// Glorot-style uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
/// Deterministic for a given seed. Throws std::invalid_argument on fewer
/// than two layer sizes or a non-positive size.
DenseNet init_net(const std::vector<int>& layer_sizes, OutputActivation output_activation,
                  std::uint64_t rng_seed, double output_scale = 1.0);

/// Activations recorded during a forward pass, consumed by backward_batch.
/// post[0] is the input batch; post[l+1] is the output of layer l.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> post;
};

/// Batched forward pass; rows are samples. Optionally records a trace.
Eigen::MatrixXd forward_batch(const DenseNet& net, const Eigen::MatrixXd& inputs,
                              ForwardTrace* trace = nullptr);

struct BackwardOptions {
  bool parameter_grads = true;
  bool input_grads = false;
};

struct BatchBackwardResult {
  GradientSet grads;           // gradients summed over the batch
  Eigen::MatrixXd input_grads; // per-sample input gradients (when requested)
};

/// Exact reverse-mode gradients of sum_b <upstream_b, f(x_b)> with respect to
/// every parameter and, optionally, the inputs.
BatchBackwardResult backward_batch(const DenseNet& net, const ForwardTrace& trace,
                                   const Eigen::MatrixXd& upstream,
                                   const BackwardOptions& opts = {});

/// Single-sample forward pass.
Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& input);

struct SampleBackwardResult {
  GradientSet grads;
  Eigen::VectorXd input_grad;
};

/// Gradients of <upstream_grad, forward(net, input)> w.r.t. parameters and input.
SampleBackwardResult backward(const DenseNet& net, const Eigen::VectorXd& input,
                              const Eigen::VectorXd& upstream_grad);

/// param <- param - learning_rate * grad. Rejects non-finite gradients with
/// DivergenceError before touching the network.
void sgd_step(DenseNet& net, const GradientSet& grads, double learning_rate);

/// target <- tau * online + (1 - tau) * target, element-wise.
void soft_update(DenseNet& target, const DenseNet& online, double tau);

bool all_finite(const DenseNet& net);

/// Text serialization: layer sizes, activation names and row-major parameter
/// arrays printed with 17 significant digits, which round-trips doubles
/// exactly.
void save(const DenseNet& net, std::ostream& out);
DenseNet load(std::istream& in);
void save_file(const DenseNet& net, const std::string& path);
DenseNet load_file(const std::string& path);

}  // namespace apfddpg::nn

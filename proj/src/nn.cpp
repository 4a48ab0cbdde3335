#include "apfddpg/nn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "apfddpg/errors.hpp"
#include "apfddpg/rng.hpp"

namespace apfddpg::nn {

namespace {

const char* activation_name(OutputActivation a) {
  return a == OutputActivation::kIdentity ? "identity" : "scaled_tanh";
}

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require_congruent(const DenseNet& net, const GradientSet& grads) {
  if (grads.weights.size() != net.weights.size() || grads.biases.size() != net.biases.size())
    throw std::invalid_argument("gradient set does not match network layer count");
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    if (grads.weights[l].rows() != net.weights[l].rows() ||
        grads.weights[l].cols() != net.weights[l].cols() ||
        grads.biases[l].size() != net.biases[l].size())
      throw std::invalid_argument("gradient set shape mismatch at layer " + std::to_string(l));
  }
}

}  // namespace

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size()) + static_cast<std::size_t>(biases[l].size());
  return n;
}

GradientSet zero_gradients(const DenseNet& net) {
  GradientSet g;
  g.weights.reserve(net.weights.size());
  g.biases.reserve(net.biases.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return g;
}

DenseNet init_net(const std::vector<int>& layer_sizes, OutputActivation output_activation,
                  std::uint64_t rng_seed, double output_scale) {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("init_net: need at least an input and an output layer size");
  for (int n : layer_sizes)
    if (n <= 0) throw std::invalid_argument("init_net: layer sizes must be positive");
  if (output_activation == OutputActivation::kScaledTanh && !(output_scale > 0.0))
    throw std::invalid_argument("init_net: scaled tanh output needs a positive scale");

  DenseNet net;
  net.layer_sizes = layer_sizes;
  net.output_activation = output_activation;
  net.output_scale = output_scale;

  Rng rng(rng_seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-limit, limit);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

Eigen::MatrixXd forward_batch(const DenseNet& net, const Eigen::MatrixXd& inputs,
                              ForwardTrace* trace) {
  if (inputs.cols() != net.input_size())
    throw std::invalid_argument("forward: input has " + std::to_string(inputs.cols()) +
                                " columns, expected " + std::to_string(net.input_size()));
  const std::size_t layers = net.layer_count();
  if (trace) {
    trace->post.clear();
    trace->post.reserve(layers + 1);
    trace->post.push_back(inputs);
  }
  const Eigen::MatrixXd* source = &inputs;
  Eigen::MatrixXd scratch;
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd out(source->rows(), net.weights[l].rows());
    out.noalias() = (*source) * net.weights[l].transpose();
    out.rowwise() += net.biases[l].transpose();
    if (l + 1 < layers) {
      out = out.cwiseMax(0.0);  // coefficient-wise, in place
    } else if (net.output_activation == OutputActivation::kScaledTanh) {
      out = (out.array().tanh() * net.output_scale).matrix();
    }
    if (trace) {
      trace->post.push_back(std::move(out));  // reserved above: back() stays valid
      source = &trace->post.back();
    } else {
      scratch = std::move(out);
      source = &scratch;
    }
  }
  if (trace) return trace->post.back();  // only the (narrow) output layer is copied
  return scratch;
}

BatchBackwardResult backward_batch(const DenseNet& net, const ForwardTrace& trace,
                                   const Eigen::MatrixXd& upstream, const BackwardOptions& opts) {
  const std::size_t layers = net.layer_count();
  if (trace.post.size() != layers + 1)
    throw std::invalid_argument("backward: trace does not belong to this network");
  if (upstream.rows() != trace.post[0].rows() || upstream.cols() != net.output_size())
    throw std::invalid_argument("backward: upstream gradient shape mismatch");

  BatchBackwardResult result;
  if (opts.parameter_grads) {
    result.grads.weights.resize(layers);
    result.grads.biases.resize(layers);
  }

  // delta enters each layer as dL/d(post[l+1]) and is masked in place into
  // dL/d(pre-activation); all element-wise ops stay fused (no temporaries)
  Eigen::MatrixXd delta = upstream;
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd& a_out = trace.post[l + 1];
    const Eigen::MatrixXd& a_in = trace.post[l];
    if (l + 1 == layers) {
      if (net.output_activation == OutputActivation::kScaledTanh) {
        // d/dz scale*tanh(z) = scale - a^2/scale with a = scale*tanh(z)
        delta.array() *= net.output_scale - a_out.array().square() / net.output_scale;
      }
    } else {
      delta.array() *= (a_out.array() > 0.0).cast<double>();
    }
    if (opts.parameter_grads) {
      auto& dw = result.grads.weights[l];
      dw.resize(net.weights[l].rows(), net.weights[l].cols());
      dw.noalias() = delta.transpose() * a_in;
      result.grads.biases[l] = delta.colwise().sum().transpose();
    }
    if (l > 0 || opts.input_grads) {
      Eigen::MatrixXd next(delta.rows(), net.weights[l].cols());
      next.noalias() = delta * net.weights[l];
      delta = std::move(next);
    }
  }
  if (opts.input_grads) result.input_grads = std::move(delta);
  return result;
}

Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& input) {
  Eigen::MatrixXd row = input.transpose();
  return forward_batch(net, row).row(0).transpose();
}

SampleBackwardResult backward(const DenseNet& net, const Eigen::VectorXd& input,
                              const Eigen::VectorXd& upstream_grad) {
  if (upstream_grad.size() != net.output_size())
    throw std::invalid_argument("backward: upstream gradient length mismatch");
  ForwardTrace trace;
  Eigen::MatrixXd row = input.transpose();
  forward_batch(net, row, &trace);
  BatchBackwardResult batch =
      backward_batch(net, trace, upstream_grad.transpose(), {.parameter_grads = true, .input_grads = true});
  return {std::move(batch.grads), batch.input_grads.row(0).transpose()};
}

void sgd_step(DenseNet& net, const GradientSet& grads, double learning_rate) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("sgd_step: learning rate must be positive");
  require_congruent(net, grads);
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    if (!grads.weights[l].allFinite() || !grads.biases[l].allFinite())
      throw DivergenceError("sgd_step: non-finite gradient at layer " + std::to_string(l));
  }
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    net.weights[l].noalias() -= learning_rate * grads.weights[l];
    net.biases[l].noalias() -= learning_rate * grads.biases[l];
  }
}

void soft_update(DenseNet& target, const DenseNet& online, double tau) {
  if (target.layer_sizes != online.layer_sizes)
    throw std::invalid_argument("soft_update: mismatched architectures");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau must be in [0, 1]");
  for (std::size_t l = 0; l < target.weights.size(); ++l) {
    target.weights[l] = tau * online.weights[l] + (1.0 - tau) * target.weights[l];
    target.biases[l] = tau * online.biases[l] + (1.0 - tau) * target.biases[l];
  }
}

bool all_finite(const DenseNet& net) {
  for (std::size_t l = 0; l < net.weights.size(); ++l)
    if (!net.weights[l].allFinite() || !net.biases[l].allFinite()) return false;
  return true;
}

void save(const DenseNet& net, std::ostream& out) {
  out << "apfddpg-net 1\n";
  out << "layers " << net.layer_sizes.size();
  for (int n : net.layer_sizes) out << ' ' << n;
  out << "\nhidden relu\noutput " << activation_name(net.output_activation);
  if (net.output_activation == OutputActivation::kScaledTanh)
    out << ' ' << format17(net.output_scale);
  out << '\n';
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    out << "weights " << l << '\n';
    const Eigen::MatrixXd& w = net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        if (c) out << ' ';
        out << format17(w(r, c));
      }
      out << '\n';
    }
    out << "biases " << l << '\n';
    const Eigen::VectorXd& b = net.biases[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      if (i) out << ' ';
      out << format17(b(i));
    }
    out << '\n';
  }
  out << "end\n";
}

DenseNet load(std::istream& in) {
  auto fail = [](const std::string& what) -> DenseNet {
    throw ConfigError("model parse error: " + what);
  };
  std::string tok;
  int version = 0;
  if (!(in >> tok >> version) || tok != "apfddpg-net" || version != 1)
    return fail("bad header");
  std::size_t count = 0;
  if (!(in >> tok >> count) || tok != "layers" || count < 2) return fail("bad layer count");
  DenseNet net;
  net.layer_sizes.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    if (!(in >> net.layer_sizes[i]) || net.layer_sizes[i] <= 0) return fail("bad layer size");
  std::string hidden;
  if (!(in >> tok >> hidden) || tok != "hidden" || hidden != "relu") return fail("bad hidden activation");
  std::string output;
  if (!(in >> tok >> output) || tok != "output") return fail("bad output activation");
  if (output == "identity") {
    net.output_activation = OutputActivation::kIdentity;
  } else if (output == "scaled_tanh") {
    net.output_activation = OutputActivation::kScaledTanh;
    if (!(in >> net.output_scale) || !(net.output_scale > 0.0)) return fail("bad output scale");
  } else {
    return fail("unknown output activation '" + output + "'");
  }
  for (std::size_t l = 0; l + 1 < count; ++l) {
    std::size_t index = 0;
    if (!(in >> tok >> index) || tok != "weights" || index != l) return fail("bad weights marker");
    Eigen::MatrixXd w(net.layer_sizes[l + 1], net.layer_sizes[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        if (!(in >> w(r, c))) return fail("truncated weights");
    if (!(in >> tok >> index) || tok != "biases" || index != l) return fail("bad biases marker");
    Eigen::VectorXd b(net.layer_sizes[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i)
      if (!(in >> b(i))) return fail("truncated biases");
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  if (!(in >> tok) || tok != "end") return fail("missing end marker");
  return net;
}

void save_file(const DenseNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  save(net, out);
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

DenseNet load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  return load(in);
}

}  // namespace apfddpg::nn

#include "sparta/dense_network.hpp"

#include <cmath>
#include <string>

#include "sparta/errors.hpp"

namespace sparta {

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw FormatError("unknown activation '" + std::string(s) + "'");
}

DenseNetwork::DenseNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw DimensionError("a dense network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.rows() != layer.biases.size() || layer.weights.cols() == 0 ||
        layer.weights.rows() == 0) {
      throw DimensionError("layer " + std::to_string(l) + " weights and biases disagree");
    }
    if (l > 0 && layers_[l - 1].weights.rows() != layer.weights.cols()) {
      throw DimensionError("layer " + std::to_string(l) + " does not chain with its predecessor");
    }
    if (!layer.weights.allFinite() || !layer.biases.allFinite()) {
      throw InvalidArgument("layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
}

DenseNetwork DenseNetwork::create(std::span<const int> dims, Activation hidden, Activation output,
                                  double init_scale, std::mt19937_64& rng) {
  if (dims.size() < 2) throw DimensionError("network needs input and output dimensions");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    if (in < 1 || out < 1) throw DimensionError("layer dimensions must be positive");
    const double bound = init_scale / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DenseLayer layer;
    layer.weights.resize(out, in);
    // Fill row by row so the draw order does not depend on Eigen's storage order.
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weights(r, c) = bound * u(rng);
    }
    layer.biases = Eigen::VectorXd::Zero(out);
    layer.activation = (l + 2 == dims.size()) ? output : hidden;
    layers.push_back(std::move(layer));
  }
  return DenseNetwork(std::move(layers));
}

int DenseNetwork::input_dim() const { return static_cast<int>(layers_.front().weights.cols()); }
int DenseNetwork::output_dim() const { return static_cast<int>(layers_.back().weights.rows()); }

std::size_t DenseNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
  return n;
}

Eigen::MatrixXd DenseNetwork::forward(const Eigen::MatrixXd& x) const {
  if (x.rows() != input_dim()) throw DimensionError("network input has the wrong dimension");
  Eigen::MatrixXd a = x;
  for (const auto& layer : layers_) {
    Eigen::MatrixXd z = layer.weights * a;
    z.colwise() += layer.biases;
    if (layer.activation == Activation::relu) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

DenseTrace DenseNetwork::forward_trace(const Eigen::MatrixXd& x) const {
  if (x.rows() != input_dim()) throw DimensionError("network input has the wrong dimension");
  DenseTrace trace;
  trace.inputs.reserve(layers_.size());
  trace.pre.reserve(layers_.size());
  Eigen::MatrixXd a = x;
  for (const auto& layer : layers_) {
    Eigen::MatrixXd z = layer.weights * a;
    z.colwise() += layer.biases;
    trace.inputs.push_back(std::move(a));
    a = layer.activation == Activation::relu ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
    trace.pre.push_back(std::move(z));
  }
  trace.output = std::move(a);
  return trace;
}

Eigen::MatrixXd DenseNetwork::backward(const DenseTrace& trace, const Eigen::MatrixXd& d_output,
                                       DenseGradient& grad) const {
  Eigen::MatrixXd delta = d_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    if (layer.activation == Activation::relu) {
      delta = (trace.pre[l].array() > 0.0).select(delta, 0.0);
    }
    grad.weights[l].noalias() += delta * trace.inputs[l].transpose();
    grad.biases[l].noalias() += delta.rowwise().sum();
    delta = layer.weights.transpose() * delta;
  }
  return delta;
}

DenseGradient DenseNetwork::zero_gradient() const {
  DenseGradient g;
  for (const auto& layer : layers_) {
    g.weights.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(layer.biases.size()));
  }
  return g;
}

}  // namespace sparta

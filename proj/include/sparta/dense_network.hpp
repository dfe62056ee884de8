#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace sparta {

enum class Activation { relu, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd biases;   // out
  Activation activation = Activation::identity;

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.activation == b.activation && a.weights.rows() == b.weights.rows() &&
           a.weights.cols() == b.weights.cols() && a.biases.size() == b.biases.size() &&
           a.weights == b.weights && a.biases == b.biases;
  }
};

struct DenseGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Activations kept from a batched forward pass for the backward pass.
struct DenseTrace {
  std::vector<Eigen::MatrixXd> inputs;  // input of each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  Eigen::MatrixXd output;
};

// Fully connected stack. Batches are column-major: one column per sample.
class DenseNetwork {
 public:
  DenseNetwork() = default;
  explicit DenseNetwork(std::vector<DenseLayer> layers);

  // dims = {in, hidden..., out}. Weights are uniform in [-s, s] with
  // s = init_scale / sqrt(fan_in); biases start at zero.
  static DenseNetwork create(std::span<const int> dims, Activation hidden, Activation output,
                             double init_scale, std::mt19937_64& rng);

  int input_dim() const;
  int output_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  std::size_t parameter_count() const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  DenseTrace forward_trace(const Eigen::MatrixXd& x) const;
  // Accumulates parameter gradients into `grad` and returns d loss / d input.
  Eigen::MatrixXd backward(const DenseTrace& trace, const Eigen::MatrixXd& d_output,
                           DenseGradient& grad) const;

  DenseGradient zero_gradient() const;

  friend bool operator==(const DenseNetwork&, const DenseNetwork&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

}  // namespace sparta

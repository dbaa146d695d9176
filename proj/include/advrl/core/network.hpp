#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "advrl/rng.hpp"

namespace advrl {

/// Row-major dense matrix of 64-bit reals. Weight matrices are (out x in);
/// batches are (batch x features).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Activation { relu, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

struct DenseLayer {
  Matrix weights;  // out x in
  Vector biases;   // out
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }
};

/// One factorized noise draw for a noisy layer; `weights` is rank one.
struct NoiseSample {
  Matrix weights;
  Vector biases;
};

/// Dense layer whose effective parameters are mu + sigma * noise (element-wise).
/// Sigma carries no sign constraint.
struct NoisyDenseLayer {
  Matrix mu_weights;
  Matrix sigma_weights;
  Vector mu_biases;
  Vector sigma_biases;
  std::optional<NoiseSample> noise;  // never persisted
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return static_cast<std::size_t>(mu_weights.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(mu_weights.rows()); }
};

using Layer = std::variant<DenseLayer, NoisyDenseLayer>;

/// Layered Q-function approximator. Value type: copies are deep and independent.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<Layer> layers);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t layer_count() const { return layers_.size(); }
  bool has_noisy_layers() const;
  std::size_t parameter_count() const;

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

 private:
  std::vector<Layer> layers_;
};

/// Architecture builder. Hidden layers use ReLU, the output layer is linear.
/// Weights (and noisy-layer mu) are uniform in +-1/sqrt(fan_in); noisy sigma
/// entries start at sigma_scale/sqrt(fan_in).
struct NetworkShape {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 0;
  bool noisy = false;
  double sigma_scale = 0.5;
};

Network make_network(const NetworkShape& shape, RngStream& rng);

/// Effective (weights, biases) of a noisy layer. Throws ProtocolError when no
/// noise sample is present.
std::pair<Matrix, Vector> effective_parameters(const NoisyDenseLayer& layer);

/// Gradient of a scalar loss with respect to every learnable parameter.
/// Noisy layers additionally carry sigma gradients; for dense layers the
/// sigma fields are empty.
struct LayerGradient {
  Matrix weights;
  Vector biases;
  Matrix sigma_weights;
  Vector sigma_biases;
};

struct GradientSet {
  std::vector<LayerGradient> layers;

  static GradientSet zeros_like(const Network& net);
  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double s);
  bool all_finite() const;
  double squared_norm() const;
  bool matches(const Network& net) const;
};

/// Q-values for one input.
Vector forward(const Network& net, const Vector& x);

/// Q-values for a batch of inputs (one row each).
Matrix forward_batch(const Network& net, const Matrix& xs);

/// Gradient of (target - Q(x, action))^2 with respect to all parameters.
GradientSet param_gradients(const Network& net, const Vector& x, std::size_t action, double target);

/// A scalar function of the network output: returns the value and writes d(value)/d(q).
using OutputLoss = std::function<double(const Vector& q, Vector& dq)>;

/// OutputLoss that picks Q(x, action).
OutputLoss select_output(std::size_t action);

/// Gradient of loss(forward(net, x)) with respect to x.
Vector input_gradient(const Network& net, const Vector& x, const OutputLoss& loss);

/// Batch forward pass that keeps what backward() needs.
Matrix forward_cached(const Network& net, const Matrix& xs, std::vector<Matrix>& layer_inputs,
                      std::vector<Matrix>& pre_activations);
/// Backpropagation over a batch. `upstream` holds d(loss)/d(output) per row.
/// Parameter gradients are summed over rows. When `input_grads` is non-null it
/// receives d(loss)/d(input) per row.
GradientSet backward(const Network& net, const std::vector<Matrix>& layer_inputs,
                     const std::vector<Matrix>& pre_activations, const Matrix& upstream,
                     Matrix* input_grads = nullptr);

/// Network with every noisy layer replaced by a dense layer holding its mu.
Network mean_network(const Network& net);

}  // namespace advrl

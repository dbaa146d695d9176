#include "advrl/core/optimizer.hpp"

#include <cmath>
#include <string>

#include "advrl/errors.hpp"

namespace advrl {

void apply_update(Network& net, const GradientSet& grads, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidInput("learning rate must be a finite non-negative number");
  if (!grads.matches(net)) throw InvalidInput("gradient shapes do not match the network");
  if (lr == 0.0) return;
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const LayerGradient& g = grads.layers[i];
    Layer& layer = net.layers()[i];
    if (auto* d = std::get_if<DenseLayer>(&layer)) {
      d->weights -= lr * g.weights;
      d->biases -= lr * g.biases;
    } else {
      auto& n = std::get<NoisyDenseLayer>(layer);
      n.mu_weights -= lr * g.weights;
      n.mu_biases -= lr * g.biases;
      n.sigma_weights -= lr * g.sigma_weights;
      n.sigma_biases -= lr * g.sigma_biases;
    }
  }
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw InvalidInput("unknown optimizer: " + std::string(s));
}

void Optimizer::step(Network& net, GradientSet grads) {
  if (cfg_.clip_norm > 0.0) {
    const double norm = std::sqrt(grads.squared_norm());
    if (norm > cfg_.clip_norm) grads *= cfg_.clip_norm / norm;
  }
  if (cfg_.kind == OptimizerKind::sgd) {
    apply_update(net, grads, cfg_.learning_rate);
    return;
  }

  if (!grads.matches(net)) throw InvalidInput("gradient shapes do not match the network");
  if (m_.layers.empty()) {
    m_ = GradientSet::zeros_like(net);
    v_ = GradientSet::zeros_like(net);
  }
  ++t_;
  const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto adam = [&](auto& m, auto& v, auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    g = ((m / c1).array() / ((v / c2).array().sqrt() + cfg_.adam_eps)).matrix();
  };
  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    auto& g = grads.layers[i];
    adam(m_.layers[i].weights, v_.layers[i].weights, g.weights);
    adam(m_.layers[i].biases, v_.layers[i].biases, g.biases);
    if (g.sigma_weights.size() > 0) {
      adam(m_.layers[i].sigma_weights, v_.layers[i].sigma_weights, g.sigma_weights);
      adam(m_.layers[i].sigma_biases, v_.layers[i].sigma_biases, g.sigma_biases);
    }
  }
  apply_update(net, grads, cfg_.learning_rate);
}

}  // namespace advrl

#pragma once

#include <string_view>

#include "advrl/core/network.hpp"

namespace advrl {

/// Plain SGD step: every parameter p becomes p - lr * grad(p). For noisy layers
/// both mu and sigma move along their own gradients.
void apply_update(Network& net, const GradientSet& grads, double lr);

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(std::string_view s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
};

/// Stateful optimizer bound to one network architecture.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  const OptimizerConfig& config() const { return cfg_; }
  void step(Network& net, GradientSet grads);

 private:
  OptimizerConfig cfg_;
  GradientSet m_, v_;
  long long t_ = 0;
};

}  // namespace advrl

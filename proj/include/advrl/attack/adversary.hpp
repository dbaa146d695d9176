#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "advrl/agent/dqn.hpp"
#include "advrl/core/network.hpp"
#include "advrl/rng.hpp"

namespace advrl {

/// Man-in-the-middle attack settings. The perturbation budget is an infinity-norm bound.
struct AttackConfig {
  double probability = 0.0;  // P(attack) per observation
  double epsilon = 0.004;
  std::uint64_t onset_step = 0;  // no decisions before this global step

  void validate() const;
};

/// Cross-entropy between softmax(q) and the one-hot greedy action (ties to the
/// lowest index). Writes d(loss)/dq to `dq` when non-null.
double adversarial_loss(const Vector& q, Vector* dq = nullptr);

/// adversarial_loss as an OutputLoss for input_gradient().
OutputLoss greedy_cross_entropy();

struct Perturbation {
  Vector delta;  // effective, after clipping to [0, 1]

  double inf_norm() const { return delta.size() == 0 ? 0.0 : delta.lpNorm<Eigen::Infinity>(); }
};

struct FgsmResult {
  Observation observation;
  Perturbation perturbation;
  bool skipped = false;  // gradient was not finite; observation returned unchanged
};

/// Non-targeted FGSM: clip(s + epsilon * sign(grad_s L(s)), 0, 1) with sign(0) = 0.
FgsmResult fgsm_perturb(const Network& net, const Observation& obs, double epsilon);

struct AttackRecord {
  std::uint64_t step = 0;
  bool attacked = false;
  std::size_t pre_action = 0;   // online greedy action on the clean observation
  std::size_t post_action = 0;  // ... and on what the agent actually sees
  double delta_inf_norm = 0.0;
};

struct AttackLog {
  std::vector<AttackRecord> records;
  std::size_t skipped = 0;

  std::size_t attacked_count() const;
  std::size_t flipped_count() const;  // attacked steps whose greedy action changed
  double max_delta() const;
};

/// Probabilistic MITM filter. Each decision after onset consumes exactly one
/// uniform draw; attacked observations are crafted against the host's live
/// network at that moment.
class MitmFilter final : public ObservationFilter {
 public:
  MitmFilter(AttackConfig cfg, RngStream rng, bool keep_log = true);

  FilteredObservation apply(const Observation& obs, std::uint64_t global_step, const Network& live_net) override;

  const AttackConfig& config() const { return cfg_; }
  const AttackLog& log() const { return log_; }
  std::size_t decisions() const { return decisions_; }
  std::size_t attacks() const { return attacks_; }

 private:
  AttackConfig cfg_;
  RngStream rng_;
  bool keep_log_;
  AttackLog log_;
  std::size_t decisions_ = 0;
  std::size_t attacks_ = 0;
};

}  // namespace advrl

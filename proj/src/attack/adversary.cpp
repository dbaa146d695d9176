#include "advrl/attack/adversary.hpp"

#include <algorithm>
#include <cmath>

#include "advrl/errors.hpp"
#include "advrl/explore/exploration.hpp"

namespace advrl {

void AttackConfig::validate() const {
  if (!(probability >= 0.0 && probability <= 1.0)) throw InvalidInput("attack probability must lie in [0, 1]");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidInput("attack epsilon must be positive");
}

double adversarial_loss(const Vector& q, Vector* dq) {
  if (q.size() == 0) throw InvalidInput("adversarial loss of an empty Q-vector");
  const auto k = static_cast<Eigen::Index>(argmax(q));
  const double top = q.maxCoeff();
  const Vector e = (q.array() - top).exp().matrix();
  const double z = e.sum();
  if (dq != nullptr) {
    *dq = e / z;
    (*dq)(k) -= 1.0;
  }
  // -log softmax_k, computed from the shifted logits.
  return std::log(z) - (q(k) - top);
}

OutputLoss greedy_cross_entropy() {
  return [](const Vector& q, Vector& dq) { return adversarial_loss(q, &dq); };
}

FgsmResult fgsm_perturb(const Network& net, const Observation& obs, double epsilon) {
  if (static_cast<std::size_t>(obs.size()) != net.input_dim())
    throw InvalidInput("observation length does not match the network");
  FgsmResult out;
  Vector grad;
  try {
    grad = input_gradient(net, obs, greedy_cross_entropy());
  } catch (const NumericError&) {
    out.observation = obs;
    out.perturbation.delta = Vector::Zero(obs.size());
    out.skipped = true;
    return out;
  }
  Vector step = grad.unaryExpr([](double g) { return g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0); });
  out.observation = (obs + epsilon * step).cwiseMax(0.0).cwiseMin(1.0);
  for (Eigen::Index i = 0; i < obs.size(); ++i) {
    // Rounding in s + eps can overshoot the budget by an ulp; pull back toward s.
    double& x = out.observation(i);
    while (std::abs(x - obs(i)) > epsilon) x = std::nextafter(x, obs(i));
  }
  out.perturbation.delta = out.observation - obs;
  return out;
}

std::size_t AttackLog::attacked_count() const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const AttackRecord& r) { return r.attacked; }));
}

std::size_t AttackLog::flipped_count() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const AttackRecord& r) {
    return r.attacked && r.pre_action != r.post_action;
  }));
}

double AttackLog::max_delta() const {
  double m = 0.0;
  for (const auto& r : records) m = std::max(m, r.delta_inf_norm);
  return m;
}

MitmFilter::MitmFilter(AttackConfig cfg, RngStream rng, bool keep_log)
    : cfg_(cfg), rng_(std::move(rng)), keep_log_(keep_log) {
  cfg_.validate();
}

FilteredObservation MitmFilter::apply(const Observation& obs, std::uint64_t global_step, const Network& live_net) {
  if (global_step < cfg_.onset_step) return {obs, false};

  ++decisions_;
  const bool attack = rng_.uniform() < cfg_.probability;
  AttackRecord rec;
  rec.step = global_step;

  FilteredObservation out{obs, false};
  if (attack) {
    FgsmResult r = fgsm_perturb(live_net, obs, cfg_.epsilon);
    if (r.skipped) {
      ++log_.skipped;
    } else {
      out.observation = std::move(r.observation);
      out.attacked = true;
      rec.delta_inf_norm = r.perturbation.inf_norm();
      ++attacks_;
    }
  }
  rec.attacked = out.attacked;
  if (keep_log_) {
    // The network is const here; a noisy net is read with whatever sample it currently holds.
    rec.pre_action = argmax(forward(live_net, obs));
    rec.post_action = out.attacked ? argmax(forward(live_net, out.observation)) : rec.pre_action;
    log_.records.push_back(rec);
  }
  return out;
}

}  // namespace advrl

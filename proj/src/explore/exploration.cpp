#include "advrl/explore/exploration.hpp"

#include <algorithm>
#include <cmath>

#include "advrl/errors.hpp"

namespace advrl {

double signed_sqrt(double x) {
  if (x > 0.0) return std::sqrt(x);
  if (x < 0.0) return -std::sqrt(-x);
  return 0.0;
}

NoiseSample sample_factorized_noise(std::size_t in_dim, std::size_t out_dim, RngStream& rng) {
  if (in_dim == 0 || out_dim == 0) throw InvalidInput("noise dims must be positive");
  Vector eps_in(static_cast<Eigen::Index>(in_dim));
  Vector eps_out(static_cast<Eigen::Index>(out_dim));
  for (Eigen::Index j = 0; j < eps_in.size(); ++j) eps_in(j) = signed_sqrt(rng.normal());
  for (Eigen::Index i = 0; i < eps_out.size(); ++i) eps_out(i) = signed_sqrt(rng.normal());
  NoiseSample s;
  s.weights = eps_out * eps_in.transpose();
  s.biases = eps_out;
  return s;
}

bool resample_noise(Network& net, RngStream& rng) {
  bool any = false;
  for (auto& layer : net.layers()) {
    if (auto* n = std::get_if<NoisyDenseLayer>(&layer)) {
      n->noise = sample_factorized_noise(n->in_dim(), n->out_dim(), rng);
      any = true;
    }
  }
  return any;
}

void EpsilonSchedule::validate() const {
  if (!(start >= 0.0 && start <= 1.0 && end >= 0.0 && end <= 1.0))
    throw InvalidInput("epsilon schedule endpoints must lie in [0, 1]");
  if (start < end) throw InvalidInput("epsilon schedule must not increase");
  if (anneal_steps < 1) throw InvalidInput("epsilon schedule needs anneal_steps >= 1");
}

double EpsilonSchedule::value(std::uint64_t step) const {
  if (step >= anneal_steps) return end;
  const double frac = static_cast<double>(step) / static_cast<double>(anneal_steps);
  return std::clamp(start + (end - start) * frac, end, start);
}

std::size_t argmax(const Vector& q) {
  if (q.size() == 0) throw InvalidInput("argmax of an empty vector");
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i)
    if (q(i) > q(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  return best;
}

std::size_t epsilon_greedy_action(const Vector& q, double epsilon, RngStream& rng) {
  if (q.size() == 0) throw InvalidInput("epsilon-greedy over an empty action set");
  if (rng.uniform() < epsilon) return rng.index(static_cast<std::size_t>(q.size()));
  return argmax(q);
}

std::size_t epsilon_greedy_action(const Vector& q, std::uint64_t step, const EpsilonSchedule& sched,
                                  RngStream& rng) {
  return epsilon_greedy_action(q, sched.value(step), rng);
}

}  // namespace advrl

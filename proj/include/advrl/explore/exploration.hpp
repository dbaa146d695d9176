#pragma once

#include <cstddef>
#include <cstdint>

#include "advrl/core/network.hpp"
#include "advrl/rng.hpp"

namespace advrl {

/// sign(x) * sqrt(|x|), the shaping function of factorized Gaussian noise.
double signed_sqrt(double x);

/// Draws eps_in (in_dim) and eps_out (out_dim) unit Gaussians; the weight noise
/// is the outer product f(eps_out) f(eps_in)^T and the bias noise is f(eps_out).
NoiseSample sample_factorized_noise(std::size_t in_dim, std::size_t out_dim, RngStream& rng);

/// Gives every noisy layer a fresh noise sample, front to back. Returns false
/// (and leaves the network untouched) when there is nothing to resample.
bool resample_noise(Network& net, RngStream& rng);

/// Linear annealing from `start` to `end` over `anneal_steps`, then flat.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.02;
  std::uint64_t anneal_steps = 5000;

  void validate() const;
  double value(std::uint64_t step) const;
};

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(const Vector& q);

/// One uniform draw decides exploration; a second picks the random action.
std::size_t epsilon_greedy_action(const Vector& q, double epsilon, RngStream& rng);
std::size_t epsilon_greedy_action(const Vector& q, std::uint64_t step, const EpsilonSchedule& sched,
                                  RngStream& rng);

}  // namespace advrl

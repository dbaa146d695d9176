#pragma once

#include <cmath>
#include <vector>

#include "advrl/core/network.hpp"
#include "advrl/rng.hpp"

namespace advrl::testing {

inline Vector random_vector(std::size_t n, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Random architecture with at most `max_layers` layers of at most `max_units` units.
inline Network random_network(RngStream& rng, bool noisy, std::size_t max_layers = 3, std::size_t max_units = 32) {
  NetworkShape shape;
  shape.input_dim = 1 + rng.index(max_units);
  const std::size_t layers = 1 + rng.index(max_layers);
  for (std::size_t i = 0; i + 1 < layers; ++i) shape.hidden.push_back(1 + rng.index(max_units));
  shape.output_dim = 1 + rng.index(max_units);
  shape.noisy = noisy;
  Network net = make_network(shape, rng);
  // Move biases off zero so ReLU kinks are rarely hit exactly.
  for (auto& l : net.layers()) {
    if (auto* d = std::get_if<DenseLayer>(&l))
      for (auto& b : d->biases) b += rng.uniform(-0.3, 0.3);
  }
  return net;
}

inline bool close(double analytic, double numeric, double rel = 1e-4, double abs_floor = 1e-7) {
  const double diff = std::abs(analytic - numeric);
  return diff <= abs_floor || diff <= rel * std::max(std::abs(analytic), std::abs(numeric));
}

// Central difference of f around a mutable scalar.
template <typename F>
double central_difference(double& param, F&& f, double h = 1e-6) {
  const double saved = param;
  param = saved + h;
  const double up = f();
  param = saved - h;
  const double down = f();
  param = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace advrl::testing

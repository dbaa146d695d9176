#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace advrl {

// Independent consumers of randomness within one run. Each gets its own stream
// so that, e.g., changing the exploration mechanism never shifts environment spawns.
enum class StreamKind : std::uint64_t {
  environment = 1,
  agent_init = 2,
  exploration = 3,
  attack = 4,
  replay = 5,
  evaluation = 6,
};

/// Seeded, single-owner random stream. Copying a stream forks it: both copies
/// produce the same sequence from the point of the copy.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  /// Stream for `kind` derived from a run seed; `salt` separates sibling streams
  /// of the same kind (e.g. per evaluation episode batch).
  static RngStream derive(std::uint64_t seed, StreamKind kind, std::uint64_t salt = 0);

  std::uint64_t seed() const { return seed_; }

  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  std::size_t index(std::size_t n);  // uniform over [0, n)
  double normal();                   // N(0, 1)

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

}  // namespace advrl

#include "advrl/rng.hpp"

#include "advrl/errors.hpp"

namespace advrl {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

RngStream RngStream::derive(std::uint64_t seed, StreamKind kind, std::uint64_t salt) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(kind));
  h = splitmix64(h ^ salt);
  return RngStream(h);
}

double RngStream::uniform() { return unit_(engine_); }

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }

std::size_t RngStream::index(std::size_t n) {
  if (n == 0) throw InvalidInput("RngStream::index: empty range");
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

double RngStream::normal() { return gauss_(engine_); }

}  // namespace advrl

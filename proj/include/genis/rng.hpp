// Deterministic random-number streams.
//
// A single master seed is split into independent named streams by folding
// integer tags through splitmix64: every chain, pilot run, annealing walk, or
// pairwise-divergence draw owns a stream derived from (master, tag ...), so
// any one of them can be regenerated in isolation without replaying the rest.
//
// Stream tag conventions used throughout the library and CLI:
//   stream(master, STAGE1,  grid_index)          stage-1 chain for a proposal
//   stream(master, STAGE2,  grid_index)          stage-2 chain for a proposal
//   stream(master, PILOT1,  grid_index)          pilot stage-1 chain
//   stream(master, PILOT2,  grid_index)          pilot stage-2 chain
//   stream(master, PAIRWISE, i, j, which)        per-pair divergence chains
//   stream(master, ANNEAL)                       annealing proposal walk
//   stream(master, REPLICATE, r, ...)            test replication overlays
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace genis {

enum StreamTag : std::uint64_t {
  STAGE1 = 1,
  STAGE2 = 2,
  PILOT1 = 3,
  PILOT2 = 4,
  PAIRWISE = 5,
  ANNEAL = 6,
  REPLICATE = 7,
};

// splitmix64 finalizer: a bijective 64-bit mixer with good avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Fold tags into the master seed; order-sensitive, so (a,b) != (b,a).
inline std::uint64_t stream(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(master);
  for (std::uint64_t t : tags) s = mix64(s ^ mix64(t));
  return s;
}

template <typename... Tags>
std::uint64_t stream(std::uint64_t master, Tags... tags) {
  return stream(master, {static_cast<std::uint64_t>(tags)...});
}

// Counter-based generator: the state advances by incrementing a counter and
// remixing, which keeps draw n independent of how draws are grouped and makes
// sequences bit-reproducible across platforms (no distribution objects).
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), counter_(0) {}

  std::uint64_t next_bits() { return mix64(seed_ ^ mix64(++counter_)); }

  // uniform on (0,1]; never returns 0 so log(u) is always finite
  double uniform() {
    return (static_cast<double>(next_bits() >> 11) + 1.0) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() <= p; }

  // uniform integer in [0, n)
  std::uint64_t uniform_index(std::uint64_t n) {
    // rejection-free modulo is biased for huge n; n here is grid-sized
    return next_bits() % n;
  }

  // standard normal via Box-Muller (two uniforms per call; no cached spare,
  // so the draw count per call is fixed and reproducible)
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace genis

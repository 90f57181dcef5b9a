#pragma once

#include <cstdint>
#include <random>

namespace bayesbench {

// SplitMix64 step. Fast, full-period seed scrambler.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives an independent engine seed for a named stream of a master seed.
// Used to give initialization, each replacement call, each chain, etc. its
// own reproducible stream regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master ^ (0x6a09e667f3bcc909ull + stream);
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1) ^ (b >> 63);
}

inline std::mt19937_64 make_engine(std::uint64_t master, std::uint64_t stream) {
  return std::mt19937_64(derive_seed(master, stream));
}

// Uniform draw in the open interval (0, 1).
template <class Rng>
double uniform_open01(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  double u = dist(rng);
  while (u <= 0.0 || u >= 1.0) u = dist(rng);
  return u;
}

}  // namespace bayesbench

#pragma once

#include <cstdint>
#include <random>

namespace kinplan {

/// SplitMix64 finalizer; used to derive independent child seeds from one root.
constexpr std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  return mix_seed(mix_seed(root) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace kinplan

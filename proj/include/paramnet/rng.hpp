#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace paramnet {

using Rng = std::mt19937_64;

// Named substreams. Every stochastic draw of a trial uses its own stream so
// that changing one source (e.g. noise level) leaves the others untouched.
enum class Stream : std::uint64_t {
  Symbols = 1,
  PhaseNoise = 2,
  AdditiveNoise = 3,
  PowerProbe = 4,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a parent seed and a path of indices.
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(parent);
  for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  return Rng(derive_seed(seed, {static_cast<std::uint64_t>(stream)}));
}

}  // namespace paramnet

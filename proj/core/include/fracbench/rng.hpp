#pragma once

#include <cstdint>

namespace fracbench {

// Seed of an independent random substream, derived from a user seed and a
// stream index with the SplitMix64 finalizer. Every stochastic stage seeds a
// std::mt19937_64 per (seed, stream) so parallel and serial runs agree.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace fracbench

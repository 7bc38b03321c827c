#pragma once

#include <cstdint>
#include <random>

namespace bridge {

// The one generator used everywhere. Results are reproducible for a given seed
// within this implementation and standard library.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

// Independent stream for a named purpose, so that adding draws in one place does
// not shift the sequence seen by another.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng{seq};
}

}  // namespace bridge

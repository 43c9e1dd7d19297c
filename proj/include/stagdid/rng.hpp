#pragma once

#include <cstdint>
#include <random>

namespace stagdid {

// splitmix64 finalizer; good avalanche, cheap.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from (seed, tag...) so that each bootstrap
// draw / replication gets its own engine. Results are then independent of how
// work is scheduled across threads.
inline std::uint64_t derive_seed(std::uint64_t seed) { return mix64(seed); }
template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, Tags... rest) {
  return derive_seed(mix64(seed ^ mix64(tag)), rest...);
}

inline std::mt19937_64 make_engine(std::uint64_t stream_seed) {
  return std::mt19937_64(stream_seed);
}

}  // namespace stagdid

#pragma once

#include <cstdint>
#include <random>

namespace reactkd {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based stream derivation: the generator for (seed, stream, index)
// depends only on those three values, so per-case draws do not depend on the
// order in which cases are visited.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(seed, stream, index));
}

// Stream tags.
enum RngStream : std::uint64_t {
  kStreamSynthesis = 1,
  kStreamDropout = 2,
  kStreamDegrade = 3,
  kStreamInit = 4,
  kStreamShuffle = 5,
  kStreamEncoder = 6,
};

}  // namespace reactkd

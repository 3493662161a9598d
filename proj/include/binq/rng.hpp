#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace binq {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stable fan-out of one master seed into labeled sub-streams: the same
// (master, label, index) always yields the same stream, distinct labels or
// indices yield decorrelated ones.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t index = 0) {
  std::uint64_t s = splitmix64(master ^ fnv1a64(label));
  return splitmix64(s ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
}

inline Rng make_stream(std::uint64_t master, std::string_view label,
                       std::uint64_t index = 0) {
  return Rng(derive_seed(master, label, index));
}

}  // namespace binq

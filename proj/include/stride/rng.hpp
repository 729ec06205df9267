#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace stride {

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed and a tag path.
// Searches hand one of these to every trial, genome and worker so that
// results do not depend on scheduling order and resumed runs replay the
// exact same streams.
inline std::uint64_t subseed(std::uint64_t master, std::string_view tag,
                             std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = mix64(master ^ 0x5bf03635f0935ad1ULL);
  for (char c : tag) {
    h = mix64(h ^ static_cast<unsigned char>(c));
  }
  h = mix64(h ^ a);
  return mix64(h ^ b);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

}  // namespace stride

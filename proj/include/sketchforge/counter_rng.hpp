#pragma once

#include <cstdint>

namespace sketchforge {

// Stateless hash-based uniforms, so per-ray jitter does not depend on the
// order in which workers visit rays.
constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr double hashed_uniform(uint64_t seed, uint64_t a, uint64_t b) {
  const uint64_t h = splitmix64(seed ^ splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace sketchforge

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace mdpt {

// FNV-1a, stable across platforms; used for config hashes and artifact ids.
inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(uint64_t v);

// Derives an independent stream seed from a base seed and a stream index
// (splitmix64 finalizer). Keeps per-step / per-sample RNG streams decoupled.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
  uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace mdpt

#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace xmod {

using Rng = std::mt19937_64;

// Stable label -> stream derivation so each consumer (net init, sampler,
// phantom slice, ...) gets an independent generator from one experiment seed.
inline uint64_t derive_seed(uint64_t seed, std::string_view label) {
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  h ^= seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  // splitmix64 finalizer
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

inline Rng make_rng(uint64_t seed, std::string_view label) { return Rng(derive_seed(seed, label)); }

inline std::string serialize_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline Rng deserialize_rng(const std::string& text) {
  Rng rng;
  std::istringstream is(text);
  is >> rng;
  return rng;
}

}  // namespace xmod

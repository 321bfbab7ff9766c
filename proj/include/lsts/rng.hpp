#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lsts {

// Named, seed-derived RNG streams. Every consumer (teacher, student, env, ...)
// draws from its own stream so adding one consumer never perturbs another.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t hash_name(std::string_view name) {
  uint64_t h = 1469598103934665603ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline std::mt19937_64 derive_stream(uint64_t master_seed, std::string_view name) {
  return std::mt19937_64(mix64(master_seed ^ hash_name(name)));
}

// std::uniform_*_distribution algorithms vary between standard libraries;
// these fixed mappings keep seeded runs identical everywhere.
inline double rand_u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);  // [0, 1)
}

inline int rand_below(std::mt19937_64& rng, int n) {
  return static_cast<int>(rng() % static_cast<uint64_t>(n));
}

}  // namespace lsts

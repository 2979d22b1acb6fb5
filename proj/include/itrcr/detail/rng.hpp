#pragma once

#include <cstdint>
#include <random>

namespace itrcr::detail {

// splitmix64 finalizer; used to derive decorrelated engine seeds from a
// master seed plus stream tags (tree index, arm, replication, ...).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a) {
  return splitmix64(base ^ splitmix64(a + 0x51ED270B0A1CE5ULL));
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a,
                              std::uint64_t b) {
  return mix_seed(mix_seed(base, a), b);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64{seed};
}

}  // namespace itrcr::detail

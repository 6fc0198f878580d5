#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

// Seeded randomness helpers. std::mt19937_64 is fully specified by the
// standard; the mappings below are spelled out explicitly instead of going
// through std distributions, whose algorithms are implementation-defined.
namespace emgnet::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Decouples per-stage streams drawn from one master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
  return splitmix64(master ^ splitmix64(tag));
}

// [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

// Box-Muller; consumes two draws per value.
inline double gaussian(std::mt19937_64& g) {
  double u1 = uniform01(g);
  double u2 = uniform01(g);
  // 1 - u1 lies in (0, 1], keeping the log argument nonzero.
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(6.283185307179586477 * u2);
}

// Unbiased-enough bounded draw via 128-bit multiply (n is tiny vs 2^64).
inline std::uint64_t bounded(std::mt19937_64& g, std::uint64_t n) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(g()) * n) >> 64);
}

// Fisher-Yates; std::shuffle is avoided because its draw pattern is
// implementation-defined.
template <class T>
void shuffle(std::vector<T>& v, std::mt19937_64& g) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(bounded(g, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace emgnet::rng

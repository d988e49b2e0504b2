#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

// Distribution helpers with a fixed algorithm: std:: distributions are
// implementation-defined, which would break byte-identical outputs across
// standard libraries.
namespace relkit::rng {

using Engine = std::mt19937_64;

inline double uniform01(Engine& e) { return static_cast<double>(e() >> 11) * 0x1.0p-53; }

inline double uniform(Engine& e, double lo, double hi) { return lo + (hi - lo) * uniform01(e); }

// Uniform integer in [0, n).
inline std::uint64_t below(Engine& e, std::uint64_t n) { return e() % n; }

inline double normal(Engine& e) {
  double u1 = uniform01(e);
  while (u1 <= 0.0) u1 = uniform01(e);
  const double u2 = uniform01(e);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename T>
void shuffle(std::vector<T>& v, Engine& e) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[below(e, i)]);
  }
}

}  // namespace relkit::rng

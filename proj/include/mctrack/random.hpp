#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mctrack {
namespace detail {

// std::uniform_*_distribution and std::shuffle are implementation-defined
// sequences; these helpers pin the exact draws so seeded runs reproduce
// byte-identical artifacts.

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

/// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  return rng() % n;
}

/// Standard normal via Box-Muller (one value per two draws).
inline double normal_sample(std::mt19937_64& rng) {
  double u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  if (u1 <= 0.0) u1 = 5e-324;  // log(0) guard
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Fisher-Yates with pinned draw order.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(uniform_below(rng, static_cast<std::uint64_t>(i)));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace detail
}  // namespace mctrack

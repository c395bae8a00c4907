#pragma once

#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>

#include "creditlab/common.hpp"

// Counter-based random numbers. Every draw is a pure function of
// (seed, purpose tag, entity ids, period), so results do not depend on
// evaluation order or thread count and per-customer streams are independent.
namespace creditlab::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer; full-period bijective mixer.
inline constexpr std::uint64_t mix(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix(h ^ (v + kGolden + (h << 6) + (h >> 2)));
}

template <class... Keys>
constexpr std::uint64_t key(std::uint64_t seed, Keys... keys) {
  std::uint64_t h = mix(seed);
  ((h = combine(h, static_cast<std::uint64_t>(keys))), ...);
  return h;
}

// Uniform in [0, 1), 53-bit mantissa.
inline double u01(std::uint64_t k) { return static_cast<double>(mix(k) >> 11) * 0x1.0p-53; }

// Standard normal via Box-Muller on two derived uniforms.
inline double normal(std::uint64_t k) {
  const double u1 = u01(combine(k, 1));
  const double u2 = u01(combine(k, 2));
  const double r = std::sqrt(-2.0 * std::log(u1 > 0.0 ? u1 : 0x1.0p-53));
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

// Index into a discrete distribution; probs need not be normalized.
inline int categorical(std::uint64_t k, std::span<const double> probs) {
  double total = 0.0;
  for (double p : probs) total += p;
  double u = u01(k) * total;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    u -= probs[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace creditlab::rng

// Deterministic random number generation. Streams are derived from a base
// seed plus a consumer tag so that adding a consumer never shifts the draws
// of another, and output is identical across platforms and standard
// libraries (std:: distributions are implementation-defined, so uniform and
// normal variates are generated explicitly here).
#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "dmicp/core.hpp"

namespace dmicp {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Derives an independent stream seed for a named consumer.
inline std::uint64_t derive_stream(std::uint64_t base_seed, std::string_view tag) {
  std::uint64_t s = base_seed ^ detail::fnv1a(tag);
  detail::splitmix64(s);
  return detail::splitmix64(s);
}

/// Counter-based generator; every draw is reproducible bit-for-bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection-free modulo bias is negligible for n << 2^64; kept simple and
    // deterministic.
    return next_u64() % n;
  }

  /// Standard normal via Box-Muller; no cached spare so the draw count per
  /// call is fixed.
  double normal() {
    // u1 in (0, 1] so log() is finite.
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double sigma) { return sigma * normal(); }

  Vec3 normal_vec3(double sigma) {
    Vec3 v;
    v.x() = normal(sigma);
    v.y() = normal(sigma);
    v.z() = normal(sigma);
    return v;
  }

 private:
  std::uint64_t state_;
};

}  // namespace dmicp

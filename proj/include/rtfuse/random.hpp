#ifndef RTFUSE_RANDOM_HPP
#define RTFUSE_RANDOM_HPP

#include <cmath>
#include <cstdint>

namespace rtfuse {

// Counter-based noise generation: every sample is a pure function of
// (seed, index). Serial and pixel-parallel evaluation therefore produce
// bitwise identical rasters.

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives an independent sub-seed, e.g. one stream per raster.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t tag) noexcept {
  return splitmix64(seed ^ splitmix64(tag + 0x632BE59BD9B4E019ull));
}

/// Maps a hash to the half-open unit interval (0, 1]; never returns 0.
inline double hash_to_unit(std::uint64_t h) noexcept {
  return static_cast<double>((h >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal deviate for a given (seed, counter) pair (Box-Muller).
inline double gaussian_at(std::uint64_t seed, std::uint64_t index) noexcept {
  const std::uint64_t h1 = splitmix64(seed ^ splitmix64(2 * index));
  const std::uint64_t h2 = splitmix64(seed ^ splitmix64(2 * index + 1));
  const double radius = std::sqrt(-2.0 * std::log(hash_to_unit(h1)));
  constexpr double two_pi = 6.283185307179586476925286766559;
  return radius * std::cos(two_pi * hash_to_unit(h2));
}

}  // namespace rtfuse

#endif  // RTFUSE_RANDOM_HPP

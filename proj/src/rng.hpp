#pragma once

// Counter-based per-pixel random numbers. Every draw is a pure function of
// (seed, stream, counter), so renders are reproducible bit for bit for any
// pixel evaluation order and thread count.

#include <cmath>
#include <cstdint>

namespace fringeforge::detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t stream,
                                  std::uint64_t counter) {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter);
}

/// Standard normal deviate via Box-Muller on two hashed uniforms.
inline double gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    const std::uint64_t h1 = counter_hash(seed, stream, 2 * counter);
    const std::uint64_t h2 = counter_hash(seed, stream, 2 * counter + 1);
    const double u1 = (static_cast<double>(h1 >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;          // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Uniform double in [0, 1).
inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return static_cast<double>(counter_hash(seed, stream, counter) >> 11) * 0x1.0p-53;
}

}  // namespace fringeforge::detail

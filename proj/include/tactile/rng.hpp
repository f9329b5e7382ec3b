#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tactile {

/// splitmix64 finaliser; used to derive independent per-sample streams.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t stream, uint64_t index = 0) {
    return mix64(mix64(master ^ mix64(stream)) + index);
}

// The helpers below only use raw engine output, so sequences do not depend on
// the standard library's distribution implementations.

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Box-Muller, one draw per call.
inline double standard_normal(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Unbiased integer in [0, n).
inline uint64_t uniform_index(std::mt19937_64& rng, uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t r = rng();
    while (r >= limit) r = rng();
    return r % n;
}

template <typename It>
void shuffle_in_place(It first, It last, std::mt19937_64& rng) {
    const auto n = static_cast<uint64_t>(last - first);
    for (uint64_t i = n; i > 1; --i) {
        const uint64_t j = uniform_index(rng, i);
        std::swap(first[i - 1], first[j]);
    }
}

} // namespace tactile

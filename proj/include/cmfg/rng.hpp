#pragma once

#include <cmath>
#include <cstdint>

namespace cmfg {

// Counter-based stream: every draw is a pure function of (seed, counters),
// so results do not depend on evaluation order or threading.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t hash_counters(uint64_t seed, uint64_t c1, uint64_t c2 = 0, uint64_t c3 = 0) {
    uint64_t h = splitmix64(seed ^ 0x5851f42d4c957f2dULL);
    h = splitmix64(h ^ c1);
    h = splitmix64(h ^ c2);
    h = splitmix64(h ^ c3);
    return h;
}

/// Uniform in (0,1); never returns 0.
inline double u01(uint64_t h) { return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53; }

/// Standard normal via Box-Muller on two counter draws.
inline double normal(uint64_t seed, uint64_t c1, uint64_t c2 = 0, uint64_t c3 = 0) {
    double a = u01(hash_counters(seed, c1, c2, 2 * c3));
    double b = u01(hash_counters(seed, c1, c2, 2 * c3 + 1));
    return std::sqrt(-2.0 * std::log(a)) * std::cos(6.283185307179586476925287 * b);
}

inline double uniform(uint64_t seed, uint64_t c1, uint64_t c2 = 0, uint64_t c3 = 0) {
    return u01(hash_counters(seed, c1, c2, c3));
}

}  // namespace cmfg

#pragma once

#include <cstdint>
#include <random>

namespace asmatch {

using Rng = std::mt19937_64;

// SplitMix64 step; used for seed derivation and order-independent hashing.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable per-item seed so work split across threads stays reproducible.
inline uint64_t derive_seed(uint64_t base, uint64_t index) {
    return splitmix64(base ^ splitmix64(index + 1));
}

inline Rng make_rng(uint64_t seed) {
    return Rng(splitmix64(seed));
}

// Uniform integer in [0, n), n >= 1.
inline int uniform_index(Rng& rng, int n) {
    return static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(rng));
}

}  // namespace asmatch

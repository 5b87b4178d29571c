#pragma once

#include <cstdint>
#include <random>

namespace qpath {

using Rng = std::mt19937_64;

// SplitMix64 step (Steele/Lea/Flood). Used only for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-hash seeding: trajectory i always gets the same seed for a given
// master seed, independent of worker count and scheduling.
inline std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index) noexcept {
    std::uint64_t s = master_seed;
    std::uint64_t a = splitmix64(s);
    s = a ^ (index + 0x9e3779b97f4a7c15ULL);
    std::uint64_t b = splitmix64(s);
    return b ? b : 0x6a09e667f3bcc909ULL;
}

inline Rng make_rng(std::uint64_t seed) {
    return Rng(seed);
}

} // namespace qpath

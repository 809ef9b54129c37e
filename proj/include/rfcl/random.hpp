#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rfcl {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seed for a named stage: FNV-1a of the label mixed with the master seed.
/// Each stage's stream depends only on (master, label).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return splitmix64(splitmix64(master) ^ h);
}

}  // namespace rfcl

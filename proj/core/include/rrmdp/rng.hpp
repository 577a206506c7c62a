#pragma once

#include <cstdint>

namespace rrmdp {

// Counter-based pseudo-random numbers. Draw k of stream `seed` is the k-th
// output of splitmix64, obtained by jumping the state directly to
// seed + (k+1)*increment. Consumers address draws by index, so results never
// depend on batch size, call order or thread count.
inline std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t z = seed + (counter + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Uniform double in [0, 1), built from the top 53 bits of splitmix64_at.
inline double uniform01_at(std::uint64_t seed, std::uint64_t counter) {
    return static_cast<double>(splitmix64_at(seed, counter) >> 11) * 0x1.0p-53;
}

/// Derive an independent stream seed, e.g. one per worker or per purpose.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64_at(seed ^ 0xA5A5A5A5A5A5A5A5ULL, stream);
}

}  // namespace rrmdp

#pragma once

#include <cstdint>
#include <random>

namespace pricer {

/// splitmix64 finalizer.  Bijective on 64-bit words, good avalanche, the
/// standard seed-scrambling choice.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/**
 * Derives an independent stream seed from a master seed and a coordinate
 * triple.  Chaining the scrambler keeps distinct triples on distinct
 * trajectories even when coordinates collide numerically with the master.
 */
inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t a,
                                        std::uint64_t b, std::uint64_t c) {
    std::uint64_t s = splitmix64(master);
    s = splitmix64(s ^ a);
    s = splitmix64(s ^ b);
    s = splitmix64(s ^ c);
    return s;
}

inline std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t a,
                                   std::uint64_t b, std::uint64_t c) {
    return std::mt19937_64(derive_stream_seed(master, a, b, c));
}

}  // namespace pricer

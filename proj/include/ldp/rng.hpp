#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ldp {

// All randomness in a run flows from one master seed through named
// sub-streams, so individual components (weight init, data order, RandomK
// draws, stochastic rounding) can be ablated without perturbing the others.

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, std::string_view stream_name) {
    uint64_t h = master;
    for (char c : stream_name) h = splitmix64(h ^ static_cast<uint64_t>(static_cast<unsigned char>(c)));
    return splitmix64(h);
}

inline std::mt19937_64 substream(uint64_t master, std::string_view stream_name) {
    return std::mt19937_64(derive_seed(master, stream_name));
}

// Counter-based draw: pure function of (seed, counter), used where random
// access into a stream is needed (scheduler replays, per-draw determinism).
inline uint64_t hash_draw(uint64_t seed, uint64_t counter) { return splitmix64(splitmix64(seed) ^ counter); }

}  // namespace ldp

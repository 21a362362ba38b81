#pragma once

#include <cstdint>
#include <random>

namespace qsync {

// splitmix64, used to derive decorrelated engine seeds from (seed, role)
// pairs so that every operation owns an explicit, reproducible substream.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t role) { return mix64(seed ^ mix64(role)); }

inline uint64_t derive_seed(uint64_t seed, uint64_t role, uint64_t index) {
    return mix64(derive_seed(seed, role) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline std::mt19937_64 make_engine(uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace qsync

#pragma once

#include <cstdint>
#include <initializer_list>

namespace matad {

// splitmix64 step; used to derive independent substreams from (seed, index...)
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t derive_stream(uint64_t seed, std::initializer_list<uint64_t> parts) {
    uint64_t s = splitmix64(seed);
    for (uint64_t p : parts) s = splitmix64(s ^ (p + 0x9e3779b97f4a7c15ull));
    return s;
}

}  // namespace matad

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedtilt {

// Stream labels for deriving independent generators from one run seed.
// Keeping them in one place guarantees the simulator and the baseline
// implementations consume identical randomness for the shared steps
// (model init, client selection, batch order), which the reduction
// equivalence checks rely on.
enum class RngStream : std::uint64_t {
    ModelInit = 1,
    ClientSelection = 2,
    BatchShuffle = 3,
    OutlierInjection = 4,
    DataGeneration = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Order-sensitive fold of the parts into one 64-bit seed.
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x51a5c747cca12f3bULL;
    for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
    return h;
}

inline std::mt19937_64 make_rng(std::initializer_list<std::uint64_t> parts) {
    return std::mt19937_64(mix_seed(parts));
}

}  // namespace fedtilt

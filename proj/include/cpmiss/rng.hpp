#pragma once

#include <cstdint>
#include <random>

namespace cpmiss {

using Rng = std::mt19937_64;

/// What a random stream is used for. Each (repetition, purpose) pair gets its
/// own stream so results do not depend on scheduling.
enum class StreamPurpose : std::uint64_t {
    Train = 1,
    Calibration = 2,
    TestMarginal = 3,
    TestGroup = 4,
    AmputationPilot = 5,
    Split = 6,
    Misc = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream for (master seed, repetition, purpose, optional sub-index).
inline Rng make_stream(std::uint64_t master_seed, std::uint64_t repetition, StreamPurpose purpose,
                       std::uint64_t sub = 0) {
    std::uint64_t h = splitmix64(master_seed);
    h = splitmix64(h ^ (repetition + 0x1000));
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    h = splitmix64(h ^ sub);
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return Rng(seq);
}

} // namespace cpmiss

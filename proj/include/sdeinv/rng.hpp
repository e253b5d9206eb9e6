#pragma once

#include <cmath>
#include <cstdint>

namespace sdeinv {

// Philox 4x32-10 counter-based generator. Every draw is a pure function of
// (seed, counter), so parallel and serial execution produce identical
// streams no matter how work is scheduled.
namespace philox {

constexpr std::uint32_t kW32A = 0x9E3779B9u;
constexpr std::uint32_t kW32B = 0xBB67AE85u;
constexpr std::uint32_t kM4x32A = 0xD2511F53u;
constexpr std::uint32_t kM4x32B = 0xCD9E8D57u;

struct Block {
    std::uint32_t v[4];
};

inline void round_once(std::uint32_t ctr[4], const std::uint32_t key[2]) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM4x32A) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM4x32B) * ctr[2];
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t r0 = hi1 ^ ctr[1] ^ key[0];
    const std::uint32_t r1 = lo1;
    const std::uint32_t r2 = hi0 ^ ctr[3] ^ key[1];
    const std::uint32_t r3 = lo0;
    ctr[0] = r0;
    ctr[1] = r1;
    ctr[2] = r2;
    ctr[3] = r3;
}

inline Block generate(std::uint64_t seed, std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                      std::uint32_t c3) {
    std::uint32_t ctr[4] = {c0, c1, c2, c3};
    std::uint32_t key[2] = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    for (int r = 0; r < 10; ++r) {
        round_once(ctr, key);
        key[0] += kW32A;
        key[1] += kW32B;
    }
    return Block{{ctr[0], ctr[1], ctr[2], ctr[3]}};
}

}  // namespace philox

// Stream tags keep independent uses of the same seed apart.
enum class RngStream : std::uint32_t {
    PathSim = 1,
    DoubleIntegral = 2,
    GeometryProbe = 3,
    TestSuite = 4,
    PmpSearch = 5,
};

inline double u64_to_unit(std::uint64_t v) {
    // 53-bit mantissa, strictly inside (0, 1)
    return (static_cast<double>(v >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

struct UniformPair {
    double u1;
    double u2;
};

inline UniformPair counter_uniforms(std::uint64_t seed, RngStream tag, std::uint64_t index,
                                    std::uint32_t step, std::uint32_t mode) {
    const philox::Block b =
        philox::generate(seed, static_cast<std::uint32_t>(index),
                         static_cast<std::uint32_t>(index >> 32) ^ (static_cast<std::uint32_t>(tag) << 24),
                         step, mode);
    const std::uint64_t x = (static_cast<std::uint64_t>(b.v[0]) << 32) | b.v[1];
    const std::uint64_t y = (static_cast<std::uint64_t>(b.v[2]) << 32) | b.v[3];
    return UniformPair{u64_to_unit(x), u64_to_unit(y)};
}

/// Standard normal keyed by (seed, stream, index, step, mode); Box-Muller.
inline double counter_normal(std::uint64_t seed, RngStream tag, std::uint64_t index,
                             std::uint32_t step, std::uint32_t mode) {
    const UniformPair u = counter_uniforms(seed, tag, index, step, mode);
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u.u1)) * std::cos(two_pi * u.u2);
}

/// Uniform in [lo, hi) keyed the same way.
inline double counter_uniform(std::uint64_t seed, RngStream tag, std::uint64_t index,
                              std::uint32_t step, std::uint32_t mode, double lo = 0.0,
                              double hi = 1.0) {
    return lo + (hi - lo) * counter_uniforms(seed, tag, index, step, mode).u1;
}

}  // namespace sdeinv

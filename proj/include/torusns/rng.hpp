// Counter-based Gaussian streams for reproducible parallel Monte Carlo.
// Each (mode, sample) pair owns an independent substream derived from the
// master seed; draws are pure functions of (key, counter), so results do
// not depend on scheduling or evaluation order.
#pragma once

#include "torusns/basis.hpp"

#include <cmath>
#include <cstdint>

namespace torusns {

// SplitMix64 output function.  Applied to a Weyl sequence of counters this
// is exactly the SplitMix64 generator.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t pack_mode(const ModeIndex& m) {
    const std::uint64_t kk = std::uint64_t(std::uint32_t(m.k));
    const std::uint64_t ll = std::uint64_t(std::uint32_t(m.l));
    return (std::uint64_t(m.variant) << 62) ^ (kk << 31) ^ ll;
}

// Stream key for the gaussians driving one mode of one Monte Carlo sample.
// Keyed by mode identity (not mode-set position), so restricting to a
// coarser mode set reuses bit-identical streams.
inline std::uint64_t derive_stream_key(std::uint64_t seed, const ModeIndex& mode,
                                       std::uint64_t sample) {
    std::uint64_t key = mix64(seed ^ 0x7475726275C0FFEEULL);
    key = mix64(key ^ pack_mode(mode));
    key = mix64(key ^ mix64(sample ^ 0x6F75737472656D73ULL));
    return key;
}

// Uniform in (0, 1]: 53 high bits, shifted away from zero so log() is safe.
inline double uniform_from_bits(std::uint64_t bits) {
    return double((bits >> 11) + 1) * 0x1.0p-53;
}

// Standard normal draws addressed by counter.  One draw consumes two fixed
// uniforms (Box-Muller, cosine branch), so draw i is independent of any
// other draws having been made.
struct NormalStream {
    std::uint64_t key = 0;

    double operator()(std::uint64_t i) const {
        const std::uint64_t gamma = 0x9E3779B97F4A7C15ULL;
        const double u1 = uniform_from_bits(mix64(key + (2 * i + 1) * gamma));
        const double u2 = uniform_from_bits(mix64(key + (2 * i + 2) * gamma));
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }
};

} // namespace torusns

#pragma once

#include <cmath>
#include <cstdint>

namespace dwiboot {

/// SplitMix64 avalanche step. Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic counter-based random stream (SplitMix64 sequence).
/// Streams derived from distinct keys are statistically independent,
/// and a stream's output depends only on its key, never on which
/// thread or in which order it is consumed.
class RngStream {
public:
    explicit RngStream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Unbiased draw from {0, ..., n-1}; n must be nonzero.
    std::uint32_t uniform_below(std::uint32_t n) {
        const std::uint64_t threshold = (0 - std::uint64_t(n)) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return std::uint32_t(r % n);
        }
    }

    /// Uniform double in (0, 1], 53-bit resolution.
    double uniform01() {
        return (double(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::uint64_t state_;
};

/// Key for the per-voxel stream of one bootstrap output.
/// Mixing each field through the avalanche keeps sibling streams
/// (neighbouring voxels, scale slots, replicates) uncorrelated.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t scale_index,
                                std::uint64_t replicate, std::uint64_t voxel_index,
                                std::uint64_t substream) {
    std::uint64_t k = mix64(seed);
    k = mix64(k ^ scale_index);
    k = mix64(k ^ replicate);
    k = mix64(k ^ voxel_index);
    k = mix64(k ^ substream);
    return k;
}

/// Substream ids: diffusion-weighted draws and b0 draws at one voxel
/// never share a stream, so changing the b0 layout cannot perturb DW draws.
inline constexpr std::uint64_t kSubstreamDW = 0;
inline constexpr std::uint64_t kSubstreamB0 = 1;

} // namespace dwiboot

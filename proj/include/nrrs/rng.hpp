#pragma once

#include <cstdint>

namespace nrrs {

/// SplitMix64 finalizer; full avalanche, used to derive stream keys.
inline uint64_t mix_bits(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix_bits(uint64_t a, uint64_t b) {
    return mix_bits(a ^ mix_bits(b));
}

/// Sample purposes. Keying draws by purpose keeps the sequence consumed by one
/// stage independent of what other stages draw, so wavefront scheduling order
/// never changes any sample.
enum class Draw : uint64_t {
    CameraJitter = 0x11,
    Bsdf = 0x22,
    LightPick = 0x33,
    LightPoint = 0x44,
    RrsRound = 0x55,
    Generic = 0x66,
};

/// PCG32 (Melissa O'Neill). One stream per (seed, sequence) key; streams with
/// distinct sequences are statistically independent.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}

    RngStream(uint64_t seed, uint64_t sequence) {
        m_inc = (sequence << 1u) | 1u;
        m_state = 0u;
        next_u32();
        m_state += mix_bits(seed);
        next_u32();
    }

    uint32_t next_u32() {
        const uint64_t old = m_state;
        m_state = old * 6364136223846793005ull + m_inc;
        const uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        const uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    /// Uniform in [0,1).
    float next_float() {
        return static_cast<float>(next_u32() >> 8) * 0x1p-24f;
    }

    uint32_t next_below(uint32_t n) {
        return static_cast<uint32_t>((static_cast<uint64_t>(next_u32()) * n) >> 32);
    }

private:
    uint64_t m_state;
    uint64_t m_inc;
};

/// Per-path stream derivation. Every path carries a 64-bit key; children chain
/// a new key from (parent key, child index), and each (depth, purpose) pair on
/// a path owns its own counter-based stream.
inline uint64_t child_path_key(uint64_t parent_key, uint32_t child_index) {
    return mix_bits(parent_key, 0xc2b2ae3d27d4eb4full + child_index);
}

inline uint64_t root_path_key(uint32_t pixel, uint32_t frame) {
    return mix_bits((static_cast<uint64_t>(frame) << 32) | pixel);
}

inline RngStream path_stream(uint64_t seed, uint64_t path_key, uint32_t depth, Draw purpose) {
    const uint64_t seq =
        mix_bits(path_key, (static_cast<uint64_t>(depth) << 8) ^ static_cast<uint64_t>(purpose));
    return RngStream(seed, seq);
}

} // namespace nrrs

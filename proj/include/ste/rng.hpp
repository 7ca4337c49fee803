#pragma once

#include <array>
#include <cstdint>

namespace ste {

// Deterministic generator: xoshiro256** 1.0 (Blackman & Vigna), with the
// four state words derived from (seed, stream) through SplitMix64. Pure
// integer arithmetic, so identical seeds give bit-identical sequences on
// every platform. Streams let each consumer (one per layer/branch, plus
// shuffle and split) own an independent sequence: adding or reordering a
// consumer never perturbs another consumer's draws.
class Rng {
public:
    Rng() : Rng(0, 0) {}

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        // Decorrelate (seed, stream) pairs before expanding into state.
        std::uint64_t z = mix64(seed ^ (0xa0761d6478bd642fULL * (stream + 1)));
        for (auto& w : s_) {
            z += 0x9e3779b97f4a7c15ULL;
            w = mix64(z);
        }
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0,1), 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Uniform integer in [0, bound) via 128-bit multiply-shift. Bias is
    // bounded by bound/2^64, immaterial at the scales used here.
    std::uint64_t next_below(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    std::array<std::uint64_t, 4> state() const {
        return {s_[0], s_[1], s_[2], s_[3]};
    }

    void set_state(const std::array<std::uint64_t, 4>& st) {
        for (int i = 0; i < 4; ++i) s_[i] = st[i];
    }

    bool operator==(const Rng& o) const {
        return s_[0] == o.s_[0] && s_[1] == o.s_[1] && s_[2] == o.s_[2] &&
               s_[3] == o.s_[3];
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    // SplitMix64 output function.
    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t s_[4];
};

// Stream-id namespace: one purpose tag plus layer/branch coordinates,
// packed so every (purpose, layer, branch) triple is a distinct stream.
enum class StreamPurpose : std::uint64_t {
    General = 0,
    Init = 1,      // weight initialization, per (layer, branch)
    Mask = 2,      // internal noise masks, per (layer, branch)
    OutMask = 3,   // output-dropout masks, per layer
    Shuffle = 4,   // epoch-level example shuffling
    Split = 5,     // train/validation holdout
};

inline std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t layer = 0,
                               std::uint64_t branch = 0) {
    return (static_cast<std::uint64_t>(purpose) << 48) |
           ((layer & 0xffffffULL) << 24) | (branch & 0xffffffULL);
}

} // namespace ste

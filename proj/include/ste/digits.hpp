#pragma once

#include <cstdint>

#include "ste/trainer.hpp"

namespace ste {

// Synthetic 8x8 digit images (64 features, 10 classes) on the 0..255 grid:
// hand-drawn glyphs distorted by shifts, intensity jitter, dense pixel
// noise and salt-and-pepper corruption, plus a slice of mislabeled
// examples. The corruption levels are chosen to make the task noisy enough
// that an unregularized network overfits a few thousand examples.
struct DigitGenConfig {
    std::size_t train = 5000;
    std::size_t test = 1000;
    std::uint64_t seed = 7;
    int max_shift = 1;            // uniform pixel shift in both axes
    double intensity_lo = 0.6;    // glyph brightness factor range
    double intensity_hi = 1.0;
    double noise_amp = 0.35;      // additive uniform noise, fraction of 255
    double salt_pepper = 0.10;    // per-pixel chance of a random value
    double label_noise = 0.08;    // chance of a uniformly random label
};

DataBundle make_digits(const DigitGenConfig& cfg);

} // namespace ste

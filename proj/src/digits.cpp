#include "ste/digits.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace ste {

namespace {

constexpr int kSide = 8;

// clang-format off
const std::array<const char*, 10> kGlyphs = {
    "..####.."
    ".#....#."
    "#......#"
    "#......#"
    "#......#"
    "#......#"
    ".#....#."
    "..####..",

    "...##..."
    "..###..."
    ".#.##..."
    "...##..."
    "...##..."
    "...##..."
    "...##..."
    ".######.",

    "..####.."
    ".#....#."
    "......#."
    ".....#.."
    "....#..."
    "...#...."
    "..#....."
    ".######.",

    "..####.."
    ".#....#."
    "......#."
    "...###.."
    "......#."
    "......#."
    ".#....#."
    "..####..",

    "....##.."
    "...#.#.."
    "..#..#.."
    ".#...#.."
    "#....#.."
    "########"
    ".....#.."
    ".....#..",

    ".######."
    ".#......"
    ".#......"
    ".#####.."
    "......#."
    "......#."
    ".#....#."
    "..####..",

    "..####.."
    ".#......"
    "#......."
    "#.####.."
    "##....#."
    "#......#"
    ".#....#."
    "..####..",

    "#######."
    "......#."
    ".....#.."
    "....#..."
    "...#...."
    "..#....."
    "..#....."
    "..#.....",

    "..####.."
    ".#....#."
    ".#....#."
    "..####.."
    ".#....#."
    "#......#"
    ".#....#."
    "..####..",

    "..####.."
    ".#....#."
    "#......#"
    ".#.....#"
    "..#####."
    ".......#"
    "......#."
    "..####..",
};
// clang-format on

void render_example(std::uint32_t digit, Rng& rng, double* out,
                    const DigitGenConfig& cfg) {
    const char* glyph = kGlyphs[digit];
    const int dx = static_cast<int>(rng.next_below(2 * cfg.max_shift + 1)) -
                   cfg.max_shift;
    const int dy = static_cast<int>(rng.next_below(2 * cfg.max_shift + 1)) -
                   cfg.max_shift;
    const double intensity =
        rng.uniform(cfg.intensity_lo, cfg.intensity_hi) * 255.0;

    for (int r = 0; r < kSide; ++r) {
        for (int c = 0; c < kSide; ++c) {
            const int sr = r - dy;
            const int sc = c - dx;
            double v = 0.0;
            if (sr >= 0 && sr < kSide && sc >= 0 && sc < kSide &&
                glyph[sr * kSide + sc] == '#')
                v = intensity;
            v += rng.uniform(-cfg.noise_amp, cfg.noise_amp) * 255.0;
            if (rng.next_double() < cfg.salt_pepper)
                v = rng.next_double() * 255.0;
            v = std::clamp(v, 0.0, 255.0);
            // Quantize to the u8 grid so IDX and CSV exports are identical.
            out[r * kSide + c] = std::round(v);
        }
    }
}

Dataset make_split(std::size_t n, Rng& rng, const DigitGenConfig& cfg) {
    Dataset ds;
    ds.features = Matrix(n, kSide * kSide);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t digit =
            static_cast<std::uint32_t>(rng.next_below(10));
        render_example(digit, rng, ds.features.row(i), cfg);
        std::uint32_t label = digit;
        if (cfg.label_noise > 0.0 && rng.next_double() < cfg.label_noise)
            label = static_cast<std::uint32_t>(rng.next_below(10));
        ds.labels[i] = label;
    }
    return ds;
}

} // namespace

DataBundle make_digits(const DigitGenConfig& cfg) {
    DataBundle bundle;
    Rng train_rng(cfg.seed, stream_id(StreamPurpose::General, 0, 0));
    Rng test_rng(cfg.seed, stream_id(StreamPurpose::General, 0, 1));
    bundle.train = make_split(cfg.train, train_rng, cfg);
    // Test labels are kept clean; noise on them would only shift every
    // configuration's loss by the same floor.
    DigitGenConfig test_cfg = cfg;
    test_cfg.label_noise = 0.0;
    bundle.test = make_split(cfg.test, test_rng, test_cfg);
    return bundle;
}

} // namespace ste

#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "ste/dataset.hpp"
#include "ste/model.hpp"
#include "ste/optimizer.hpp"
#include "ste/rng.hpp"

namespace ste {

inline constexpr std::uint16_t kCheckpointVersion = 1;

// On-disk layout (all integers and reals little-endian, reals 64-bit
// IEEE-754; round-trips are bit-exact):
//
//   magic "STEC" | u16 version | u16 section flags
//   u64 layer count, then per layer:
//     u8 kind (0 dense, 1 ste) | u8 act | u8 noise | u8 output_dropout
//     u64 in_dim | u64 out_dim | u64 branches | f64 p | f64 p_out
//     per branch: W row-major (out*in f64), b (out f64)
//   [flag 0] optimizer state: u64 iteration | u64 array count | arrays
//   [flag 1] rng streams: u64 count | 4 x u64 per stream
//   [flag 2] normalization stats: u64 M | means | stds
//   training metadata: u64 epoch | f64 val_loss | u64 best_epoch |
//                      f64 best_val_loss
struct Checkpoint {
    Model model;
    std::optional<OptState> opt;
    std::vector<Rng> rng_streams;
    std::optional<NormStats> norm;
    std::uint64_t epoch = 0;
    double val_loss = std::numeric_limits<double>::infinity();
    std::uint64_t best_epoch = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace ste

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ste/matrix.hpp"
#include "ste/rng.hpp"

namespace ste {

struct NormStats {
    Vector mean;
    Vector std;
};

struct Dataset {
    Matrix features; // examples x M
    std::vector<std::uint32_t> labels;
    std::optional<NormStats> stats; // set once normalized

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
    std::uint32_t max_label() const;
    Vector example(std::size_t i) const;
};

// Rectangular numeric CSV. The label column may be given as a 0-based
// index, or (with header=true) as a column name.
Dataset load_csv(const std::filesystem::path& path,
                 const std::string& label_column, bool header);

// Standard IDX pair: magic 0x00000803 for u8 3-D images, 0x00000801 for
// labels, big-endian dimension sizes; pixels flattened row-major.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

void save_idx(const Dataset& ds, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path);
void save_csv(const Dataset& ds, const std::filesystem::path& path,
              bool header);

// Per-feature (x - mean)/std with the statistics computed on `train` only
// (population std, floored at 1e-8 for constant features) and applied to
// every dataset passed in `others`.
NormStats normalize(Dataset& train, std::vector<Dataset*> others = {});
void apply_normalization(Dataset& ds, const NormStats& stats);

// Seeded uniform permutation; floor(n * val_fraction) examples go to the
// validation split.
std::pair<Dataset, Dataset> split(const Dataset& ds, double val_fraction,
                                  std::uint64_t seed);

} // namespace ste

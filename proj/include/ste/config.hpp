#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ste/model.hpp"
#include "ste/optimizer.hpp"
#include "ste/trainer.hpp"

namespace ste {

enum class DataFormat { Csv, Idx };

// Parsed run configuration: flat `key = value` file, `#` comments, unknown
// keys rejected. See README for the key reference.
struct RunSetup {
    // data
    DataFormat format = DataFormat::Csv;
    std::string train_data, test_data;               // csv
    std::string train_images, train_labels;          // idx
    std::string test_images, test_labels;
    std::string label_column = "0";
    bool csv_header = false;
    bool normalize_features = true;

    // model
    std::size_t input_dim = 0;
    std::size_t classes = 0;
    std::vector<std::size_t> hidden;
    LayerKind hidden_kind = LayerKind::Dense;
    Activation hidden_act = Activation::ReLU;
    std::size_t ste_ensemble = 8;
    double ste_p = 0.5;
    NoiseMode ste_noise = NoiseMode::Dropout;
    bool output_dropout = false;
    double output_dropout_p = 0.5;

    // training
    TrainConfig train;

    std::optional<std::string> out_dir;

    ModelSpec model_spec() const;
    ExperimentBase experiment_base() const;
};

RunSetup load_config(const std::filesystem::path& path);

// Loads (and, when configured, normalizes) the datasets named by a setup.
// Data problems surface as DataError carrying the offending config key.
DataBundle load_bundle(const RunSetup& setup);

} // namespace ste

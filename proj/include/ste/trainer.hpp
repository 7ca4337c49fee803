#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ste/checkpoint.hpp"
#include "ste/dataset.hpp"
#include "ste/model.hpp"
#include "ste/optimizer.hpp"

namespace ste {

struct DataBundle {
    Dataset train;
    Dataset test;
};

struct RunResult {
    // One entry per completed epoch; epochs are reported 1-based.
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> lr; // schedule position after the epoch's updates
    std::size_t best_epoch = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    double test_loss = 0.0;
    double test_accuracy = 0.0;
    double wall_seconds = 0.0; // excluded from determinism comparisons
};

struct TrainOutput {
    Model model; // restored to the best epoch
    RunResult result;
    Checkpoint best; // snapshot at the best-validation epoch
    Checkpoint last; // full state after the final epoch, for resuming
};

struct ResumeState {
    Checkpoint last;
    std::optional<Checkpoint> best;
};

// Minibatch SGD with Nesterov momentum, per-iteration lr decay, a seeded
// validation holdout, and best-epoch restore. Masks are sampled fresh per
// example; per-epoch validation runs on the collapsed (eval-mode) network.
// Per-example work inside a minibatch may run on multiple threads, but the
// gradient sum is always taken in example order, so results are bitwise
// reproducible for any thread count.
TrainOutput train(const ModelSpec& spec, const TrainConfig& cfg,
                  const DataBundle& data, const ResumeState* resume = nullptr);

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0; // percent
};

// Eval-mode forward on every example; mean cross-entropy and top-1 percent.
EvalResult evaluate(const Model& model, const Dataset& data);

struct ExperimentRow {
    std::string name;
    double loss_mean = 0.0;
    double loss_std = 0.0;
    double acc_mean = 0.0;
    double acc_std = 0.0;
    std::size_t seeds = 0;
};

using NamedSpecs = std::vector<std::pair<std::string, ModelSpec>>;

// Trains every named configuration once per seed and reports mean and
// sample standard deviation (n-1 denominator) of test loss and accuracy.
std::vector<ExperimentRow> run_experiment(const NamedSpecs& specs,
                                          const TrainConfig& cfg,
                                          const DataBundle& data,
                                          std::span<const std::uint64_t> seeds);

std::string format_experiment_csv(std::span<const ExperimentRow> rows);
std::string format_experiment_table(std::span<const ExperimentRow> rows);

// The four standard comparison configurations.
struct ExperimentBase {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t classes = 0;
    std::size_t ensemble = 8;
    double p = 0.5;
    double p_out = 0.5;
};

NamedSpecs standard_experiment_specs(const ExperimentBase& base);

struct ActivationAnalysis {
    // branch_outputs[input][branch] = W_i x + b_i (pre-noise, pre-average)
    std::vector<std::vector<Vector>> branch_outputs;
    Matrix correlation; // A x A, averaged over inputs
    double mean_offdiag = 0.0;
    double max_offdiag = 0.0;
};

// Pre-average branch transforms of the STE layer at `layer_index`, with
// inputs propagated through the preceding layers in eval mode, plus the
// pairwise Pearson correlation across the layer's output coordinates.
ActivationAnalysis analyze_activations(const Model& model,
                                       const Matrix& inputs,
                                       std::size_t layer_index);

} // namespace ste

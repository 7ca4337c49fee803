#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ste/matrix.hpp"

namespace ste {

struct TrainConfig {
    double learning_rate = 1e-2; // eta_0
    double decay = 0.0;          // per-minibatch decay rate
    double momentum = 0.9;
    std::size_t batch_size = 128;
    std::size_t epochs = 0;
    double val_fraction = 0.10;
    std::uint64_t seed = 0;

    void validate() const;
};

// eta_0 / (1 + decay * n); n counts completed minibatch updates, so the
// first update runs at eta_0.
double lr_at(const TrainConfig& cfg, std::uint64_t n);

using ParamRefs = std::vector<std::span<double>>;
using GradRefs = std::vector<std::span<const double>>;

// One velocity buffer per parameter array, zero-initialized; iteration
// counter starts at 0 and is bumped by the trainer after each update.
struct OptState {
    std::vector<Vector> velocity;
    std::uint64_t iteration = 0;

    static OptState zeros_like(const ParamRefs& params);
};

// Nesterov update in lookahead form, pinned as:
//   v <- mu * v - lr * g(theta + mu * v)
//   theta <- theta + v
// The caller supplies gradients evaluated at the lookahead point; `params`
// must hold the pre-lookahead theta when this is called.
void nesterov_step(ParamRefs& params, const GradRefs& grads_at_lookahead,
                   OptState& state, double lr, double mu);

// theta <- theta + mu * v, saving the original theta into `saved`.
void apply_lookahead(ParamRefs& params, const OptState& state, double mu,
                     std::vector<Vector>& saved);

// theta <- saved (undo apply_lookahead before stepping).
void restore_params(ParamRefs& params, const std::vector<Vector>& saved);

} // namespace ste

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ste/activation.hpp"
#include "ste/matrix.hpp"
#include "ste/rng.hpp"

namespace ste {

enum class NoiseMode { Dropout, Dropconnect };

std::string to_string(NoiseMode m);
NoiseMode parse_noise_mode(const std::string& s);

// Plain dense layer: y = f(W x + b). When output_dropout is set, training
// multiplies the post-activation output by a Bernoulli(p_out) mask and
// evaluation scales it by p_out. A collapsed ensemble layer carries its
// output-dropout factor here as well.
struct DenseLayer {
    Matrix W;
    Vector b;
    Activation act = Activation::Identity;
    bool output_dropout = false;
    double p_out = 1.0;

    std::size_t in_dim() const { return W.cols; }
    std::size_t out_dim() const { return W.rows; }
    void validate() const;
};

// Stochastically trained ensemble layer: `branches` weight matrices and
// bias vectors whose noisy outputs are averaged before the activation.
//   dropout mode:      y = f( (1/A) sum_i m_i .* (W_i x + b_i) )
//   dropconnect mode:  y = f( (1/A) sum_i (M_i .* W_i) x + b_i )
// The mask multiplies the bias in dropout mode and leaves it untouched in
// dropconnect mode. p is the keep probability of the internal noise.
struct STELayer {
    std::vector<Matrix> Ws;
    std::vector<Vector> bs;
    double p = 0.5;
    NoiseMode noise = NoiseMode::Dropout;
    bool output_dropout = false;
    double p_out = 0.5;
    Activation act = Activation::Identity;

    std::size_t branches() const { return Ws.size(); }
    std::size_t in_dim() const { return Ws.empty() ? 0 : Ws[0].cols; }
    std::size_t out_dim() const { return Ws.empty() ? 0 : Ws[0].rows; }
    void validate() const;
};

// Per-branch masks for one forward call, plus the optional output mask.
struct MaskSet {
    std::vector<Vector> unit_masks;   // dropout mode, length-N per branch
    std::vector<Matrix> weight_masks; // dropconnect mode, NxM per branch
    std::optional<Vector> output_mask;
};

// Masks are sampled fresh per forward call per example. Each branch draws
// from its own stream; the output mask has a stream of its own.
MaskSet sample_masks(const STELayer& layer, std::span<Rng> branch_rngs,
                     Rng* output_rng);

// Everything the backward pass (and the branch-activation analysis) needs.
struct LayerCache {
    Vector x;
    std::vector<Vector> branch_pre; // W_i x + b_i, before noise and averaging
    Vector pre_act;                 // averaged pre-activation
    Vector post_act;                // f(pre_act), before output dropout
    MaskSet masks;
};

struct DenseCache {
    Vector x;
    Vector pre_act;
    Vector post_act;
    std::optional<Vector> output_mask;
};

struct STEGrads {
    std::vector<Matrix> dWs;
    std::vector<Vector> dbs;

    static STEGrads zeros_like(const STELayer& layer);
    void zero();
};

struct DenseGrads {
    Matrix dW;
    Vector db;

    static DenseGrads zeros_like(const DenseLayer& layer);
    void zero();
};

// Train-mode forward. Fills `cache` (masks are moved in) and returns y.
Vector ste_forward_train(const STELayer& layer, const Vector& x,
                         MaskSet masks, LayerCache& cache);

// Eval-mode forward: the noise is replaced by its expectation, branch by
// branch, then averaged. Deliberately a different summation route than
// collapse_ste, so the two can cross-check each other.
Vector ste_forward_eval(const STELayer& layer, const Vector& x);

// Exact gradients of the cached forward map w.r.t. every W_i, b_i and x,
// masks held fixed. Accumulates into `grads` (callers zero it first when
// they want a fresh gradient).
void ste_backward(const STELayer& layer, const LayerCache& cache,
                  const Vector& dy, STEGrads& grads, Vector& dx);

Vector dense_forward_train(const DenseLayer& layer, const Vector& x,
                           std::optional<Vector> output_mask,
                           DenseCache& cache);

Vector dense_forward_eval(const DenseLayer& layer, const Vector& x);

// For act == Softmax the caller passes the gradient w.r.t. the
// pre-activation (the fused softmax/cross-entropy path).
void dense_backward(const DenseLayer& layer, const DenseCache& cache,
                    const Vector& dy, DenseGrads& grads, Vector& dx);

} // namespace ste

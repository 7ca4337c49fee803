#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ste/layers.hpp"
#include "ste/optimizer.hpp"

namespace ste {

enum class LayerKind { Dense, Ste };

// One layer in a network description. Adjacent out_dim/in_dim chain; the
// final layer must be dense (an ensemble output layer is not supported).
struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    std::size_t out_dim = 0;
    Activation act = Activation::Identity;
    // STE-only knobs
    std::size_t ensemble = 1; // averaging factor A
    double p = 0.5;
    NoiseMode noise = NoiseMode::Dropout;
    // dropout on the layer output (valid for both kinds)
    bool output_dropout = false;
    double p_out = 0.5;
};

struct ModelSpec {
    std::size_t input_dim = 0;
    std::vector<LayerSpec> layers;

    std::size_t output_dim() const {
        return layers.empty() ? 0 : layers.back().out_dim;
    }
    void validate() const;
};

using Layer = std::variant<DenseLayer, STELayer>;

struct Model {
    std::size_t input_dim = 0;
    std::vector<Layer> layers;

    std::size_t output_dim() const;
};

// Glorot-uniform weights (each branch from its own stream), zero biases.
Model build_model(const ModelSpec& spec, std::uint64_t seed);

// Recover the topology of a built model.
ModelSpec spec_of(const Model& model);

// Eval-mode forward through the whole network. When the final activation
// is softmax the returned vector holds the logits: softmax is fused with
// the loss, and argmax is unaffected.
Vector model_eval_forward(const Model& model, const Vector& x);

// Every STE layer replaced by its single-dense-layer equivalent.
Model collapse_model(const Model& model);

// Views over all parameter arrays in a fixed order (per layer, per branch,
// W before b). The optimizer and the checkpoint both rely on this order.
ParamRefs param_refs(Model& model);
GradRefs grad_refs_of(const Model& model,
                      const std::vector<struct LayerGrads>& grads);

// Gradient buffers mirroring a model's parameters.
struct LayerGrads {
    STEGrads ste;
    DenseGrads dense;
};

std::vector<LayerGrads> grads_like(const Model& model);
void zero_grads(std::vector<LayerGrads>& grads);
// total += g
void accumulate_grads(std::vector<LayerGrads>& total,
                      const std::vector<LayerGrads>& g);
void scale_grads(std::vector<LayerGrads>& grads, double s);

} // namespace ste

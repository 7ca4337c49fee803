#pragma once

#include <span>

#include "ste/matrix.hpp"

namespace ste {

struct Prediction {
    Vector logits;
    std::size_t label = 0;
};

struct XentResult {
    double loss = 0.0;
    Vector dlogits;
};

// loss = -log softmax(logits)[label], probabilities clamped to >= 1e-12
// before the log; dlogits = softmax(logits) - onehot(label).
XentResult softmax_xent(const Vector& logits, std::size_t label);

// Loss only, no gradient allocation.
double softmax_xent_loss(const Vector& logits, std::size_t label);

// Argmax with ties broken toward the lowest index.
std::size_t argmax_lowest(const Vector& v);

// Percent of examples whose argmax(logits) equals the label.
double top1_accuracy(std::span<const Prediction> preds);

} // namespace ste

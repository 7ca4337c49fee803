#include "ste/objective.hpp"

#include <algorithm>
#include <cmath>

namespace ste {

namespace {

constexpr double kProbClamp = 1e-12;

void check_label(const Vector& logits, std::size_t label) {
    if (label >= logits.size())
        throw ShapeError("label " + std::to_string(label) +
                         " out of range for " + std::to_string(logits.size()) +
                         " classes");
}

} // namespace

XentResult softmax_xent(const Vector& logits, std::size_t label) {
    check_label(logits, label);
    XentResult r;
    r.dlogits = logits;
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& v : r.dlogits) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : r.dlogits) v /= sum;
    r.loss = -std::log(std::max(r.dlogits[label], kProbClamp));
    r.dlogits[label] -= 1.0;
    return r;
}

double softmax_xent_loss(const Vector& logits, std::size_t label) {
    check_label(logits, label);
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - m);
    const double p = std::exp(logits[label] - m) / sum;
    return -std::log(std::max(p, kProbClamp));
}

std::size_t argmax_lowest(const Vector& v) {
    require_shape(!v.empty(), "argmax of empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

double top1_accuracy(std::span<const Prediction> preds) {
    if (preds.empty()) throw DataError("top1_accuracy: empty prediction list");
    std::size_t correct = 0;
    for (const auto& p : preds)
        if (argmax_lowest(p.logits) == p.label) ++correct;
    return 100.0 * static_cast<double>(correct) /
           static_cast<double>(preds.size());
}

} // namespace ste

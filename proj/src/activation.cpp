#include "ste/activation.hpp"

#include <algorithm>
#include <cmath>

namespace ste {

void apply_activation(Activation act, Vector& v) {
    switch (act) {
    case Activation::Identity:
        return;
    case Activation::ReLU:
        for (double& x : v) x = x > 0.0 ? x : 0.0;
        return;
    case Activation::Softmax: {
        if (v.empty()) return;
        const double m = *std::max_element(v.begin(), v.end());
        double sum = 0.0;
        for (double& x : v) {
            x = std::exp(x - m);
            sum += x;
        }
        for (double& x : v) x /= sum;
        return;
    }
    }
}

void activation_backward(Activation act, const Vector& pre, Vector& d) {
    switch (act) {
    case Activation::Identity:
        return;
    case Activation::ReLU:
        require_shape(pre.size() == d.size(), "activation_backward: length " +
                                                  shape_str(pre) + " vs " +
                                                  shape_str(d));
        for (std::size_t i = 0; i < d.size(); ++i)
            if (pre[i] <= 0.0) d[i] = 0.0;
        return;
    case Activation::Softmax:
        throw ShapeError("softmax backward is fused with the loss; "
                         "activation_backward(Softmax) is not a valid path");
    }
}

std::string to_string(Activation act) {
    switch (act) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::Softmax: return "softmax";
    }
    return "?";
}

Activation parse_activation(const std::string& s) {
    if (s == "identity") return Activation::Identity;
    if (s == "relu") return Activation::ReLU;
    if (s == "softmax") return Activation::Softmax;
    throw ConfigError("unknown activation '" + s + "'");
}

} // namespace ste

#pragma once

#include <string>

#include "ste/matrix.hpp"

namespace ste {

enum class Activation { Identity, ReLU, Softmax };

// In-place f(v). Softmax subtracts the max before exponentiating.
void apply_activation(Activation act, Vector& v);

// d *= f'(pre), where pre is the cached pre-activation. Softmax is fused
// with the cross-entropy loss and never goes through this path.
void activation_backward(Activation act, const Vector& pre, Vector& d);

std::string to_string(Activation act);
Activation parse_activation(const std::string& s);

} // namespace ste

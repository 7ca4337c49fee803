#pragma once

#include "ste/matrix.hpp"
#include "ste/rng.hpp"

namespace ste {

// fan_out x fan_in matrix, entries i.i.d. uniform on +-sqrt(6/(fan_in+fan_out)).
Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

double glorot_bound(std::size_t fan_in, std::size_t fan_out);

// 0/1 masks; p is the KEEP probability (entry is 1 with probability p).
// Requires 0 < p <= 1.
Vector bernoulli_mask_vector(std::size_t len, double p, Rng& rng);
Matrix bernoulli_mask_matrix(std::size_t rows, std::size_t cols, double p,
                             Rng& rng);

} // namespace ste

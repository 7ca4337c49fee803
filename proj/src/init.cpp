#include "ste/init.hpp"

#include <cmath>
#include <string>

namespace ste {

namespace {

void check_keep_prob(double p) {
    if (!(p > 0.0 && p <= 1.0))
        throw ShapeError("keep probability must be in (0,1], got " +
                         std::to_string(p));
}

} // namespace

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    if (fan_in == 0 || fan_out == 0)
        throw ShapeError("glorot_uniform: fan_in and fan_out must be >= 1");
    const double limit = glorot_bound(fan_in, fan_out);
    Matrix w(fan_out, fan_in);
    for (double& v : w.data) v = rng.uniform(-limit, limit);
    return w;
}

Vector bernoulli_mask_vector(std::size_t len, double p, Rng& rng) {
    check_keep_prob(p);
    Vector m(len);
    for (double& v : m) v = rng.next_double() < p ? 1.0 : 0.0;
    return m;
}

Matrix bernoulli_mask_matrix(std::size_t rows, std::size_t cols, double p,
                             Rng& rng) {
    check_keep_prob(p);
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.next_double() < p ? 1.0 : 0.0;
    return m;
}

} // namespace ste

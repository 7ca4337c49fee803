#include "ste/optimizer.hpp"

#include <string>

namespace ste {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0))
        throw ConfigError("learning_rate must be > 0");
    if (!(decay >= 0.0)) throw ConfigError("decay must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw ConfigError("momentum must be in [0,1)");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ConfigError("val_fraction must be in (0,1)");
}

double lr_at(const TrainConfig& cfg, std::uint64_t n) {
    return cfg.learning_rate / (1.0 + cfg.decay * static_cast<double>(n));
}

OptState OptState::zeros_like(const ParamRefs& params) {
    OptState st;
    st.velocity.reserve(params.size());
    for (const auto& p : params) st.velocity.emplace_back(p.size(), 0.0);
    return st;
}

namespace {

void check_aligned(const ParamRefs& params, const OptState& state) {
    require_shape(params.size() == state.velocity.size(),
                  "optimizer state has " +
                      std::to_string(state.velocity.size()) +
                      " buffers for " + std::to_string(params.size()) +
                      " parameter arrays");
    for (std::size_t k = 0; k < params.size(); ++k)
        require_shape(params[k].size() == state.velocity[k].size(),
                      "velocity buffer " + std::to_string(k) + " has length " +
                          std::to_string(state.velocity[k].size()) +
                          ", parameters have " +
                          std::to_string(params[k].size()));
}

} // namespace

void nesterov_step(ParamRefs& params, const GradRefs& grads_at_lookahead,
                   OptState& state, double lr, double mu) {
    check_aligned(params, state);
    require_shape(grads_at_lookahead.size() == params.size(),
                  "gradient list has " +
                      std::to_string(grads_at_lookahead.size()) +
                      " arrays for " + std::to_string(params.size()) +
                      " parameter arrays");
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        const auto& g = grads_at_lookahead[k];
        auto& v = state.velocity[k];
        require_shape(g.size() == p.size(),
                      "gradient array " + std::to_string(k) + " has length " +
                          std::to_string(g.size()) + ", parameters have " +
                          std::to_string(p.size()));
        for (std::size_t i = 0; i < p.size(); ++i) {
            v[i] = mu * v[i] - lr * g[i];
            p[i] = p[i] + v[i];
        }
    }
}

void apply_lookahead(ParamRefs& params, const OptState& state, double mu,
                     std::vector<Vector>& saved) {
    check_aligned(params, state);
    saved.resize(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
        saved[k].assign(params[k].begin(), params[k].end());
        const auto& v = state.velocity[k];
        for (std::size_t i = 0; i < params[k].size(); ++i)
            params[k][i] += mu * v[i];
    }
}

void restore_params(ParamRefs& params, const std::vector<Vector>& saved) {
    require_shape(params.size() == saved.size(),
                  "restore_params: buffer count mismatch");
    for (std::size_t k = 0; k < params.size(); ++k) {
        require_shape(params[k].size() == saved[k].size(),
                      "restore_params: buffer length mismatch");
        std::copy(saved[k].begin(), saved[k].end(), params[k].begin());
    }
}

} // namespace ste

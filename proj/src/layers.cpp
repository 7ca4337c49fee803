#include "ste/layers.hpp"

#include <string>

#include "ste/init.hpp"
#include "ste/kernels.hpp"

namespace ste {

std::string to_string(NoiseMode m) {
    return m == NoiseMode::Dropout ? "dropout" : "dropconnect";
}

NoiseMode parse_noise_mode(const std::string& s) {
    if (s == "dropout") return NoiseMode::Dropout;
    if (s == "dropconnect") return NoiseMode::Dropconnect;
    throw ConfigError("unknown noise mode '" + s + "'");
}

void DenseLayer::validate() const {
    require_shape(W.rows == b.size(), "dense layer: W is " + shape_str(W) +
                                          " but b has length " +
                                          shape_str(b));
    if (output_dropout && !(p_out > 0.0 && p_out <= 1.0))
        throw ShapeError("dense layer: p_out must be in (0,1]");
}

void STELayer::validate() const {
    if (Ws.empty()) throw ShapeError("STE layer: needs at least one branch");
    require_shape(Ws.size() == bs.size(),
                  "STE layer: " + std::to_string(Ws.size()) + " weights vs " +
                      std::to_string(bs.size()) + " biases");
    for (std::size_t i = 0; i < Ws.size(); ++i) {
        require_shape(Ws[i].same_shape(Ws[0]),
                      "STE layer: branch " + std::to_string(i) + " is " +
                          shape_str(Ws[i]) + ", branch 0 is " +
                          shape_str(Ws[0]));
        require_shape(bs[i].size() == Ws[0].rows,
                      "STE layer: bias " + std::to_string(i) + " has length " +
                          shape_str(bs[i]) + ", expected " +
                          std::to_string(Ws[0].rows));
    }
    if (!(p > 0.0 && p <= 1.0))
        throw ShapeError("STE layer: keep probability p must be in (0,1]");
    if (output_dropout && !(p_out > 0.0 && p_out <= 1.0))
        throw ShapeError("STE layer: p_out must be in (0,1]");
}

MaskSet sample_masks(const STELayer& layer, std::span<Rng> branch_rngs,
                     Rng* output_rng) {
    require_shape(branch_rngs.size() == layer.branches(),
                  "sample_masks: " + std::to_string(branch_rngs.size()) +
                      " streams for " + std::to_string(layer.branches()) +
                      " branches");
    MaskSet ms;
    const std::size_t n = layer.out_dim();
    const std::size_t m = layer.in_dim();
    if (layer.noise == NoiseMode::Dropout) {
        ms.unit_masks.reserve(layer.branches());
        for (std::size_t i = 0; i < layer.branches(); ++i)
            ms.unit_masks.push_back(
                bernoulli_mask_vector(n, layer.p, branch_rngs[i]));
    } else {
        ms.weight_masks.reserve(layer.branches());
        for (std::size_t i = 0; i < layer.branches(); ++i)
            ms.weight_masks.push_back(
                bernoulli_mask_matrix(n, m, layer.p, branch_rngs[i]));
    }
    if (layer.output_dropout) {
        if (output_rng == nullptr)
            throw ShapeError("sample_masks: layer has output dropout but no "
                             "output stream was provided");
        ms.output_mask = bernoulli_mask_vector(n, layer.p_out, *output_rng);
    }
    return ms;
}

namespace {

void check_masks(const STELayer& layer, const MaskSet& masks) {
    const std::size_t a = layer.branches();
    if (layer.noise == NoiseMode::Dropout) {
        require_shape(masks.unit_masks.size() == a && masks.weight_masks.empty(),
                      "mask set does not match dropout mode (got " +
                          std::to_string(masks.unit_masks.size()) +
                          " unit masks, " +
                          std::to_string(masks.weight_masks.size()) +
                          " weight masks, need " + std::to_string(a) +
                          " unit masks)");
        for (const auto& m : masks.unit_masks)
            require_shape(m.size() == layer.out_dim(),
                          "unit mask length " + shape_str(m) + ", expected " +
                              std::to_string(layer.out_dim()));
    } else {
        require_shape(masks.weight_masks.size() == a && masks.unit_masks.empty(),
                      "mask set does not match dropconnect mode (got " +
                          std::to_string(masks.weight_masks.size()) +
                          " weight masks, " +
                          std::to_string(masks.unit_masks.size()) +
                          " unit masks, need " + std::to_string(a) +
                          " weight masks)");
        for (const auto& m : masks.weight_masks)
            require_shape(m.rows == layer.out_dim() && m.cols == layer.in_dim(),
                          "weight mask is " + shape_str(m) + ", expected " +
                              std::to_string(layer.out_dim()) + "x" +
                              std::to_string(layer.in_dim()));
    }
    if (layer.output_dropout) {
        require_shape(masks.output_mask.has_value() &&
                          masks.output_mask->size() == layer.out_dim(),
                      "output mask missing or wrong length");
    }
}

} // namespace

Vector ste_forward_train(const STELayer& layer, const Vector& x,
                         MaskSet masks, LayerCache& cache) {
    layer.validate();
    require_shape(x.size() == layer.in_dim(),
                  "STE forward: input length " + shape_str(x) +
                      ", layer expects " + std::to_string(layer.in_dim()));
    check_masks(layer, masks);

    const std::size_t a = layer.branches();
    const std::size_t n = layer.out_dim();
    const double inv_a = 1.0 / static_cast<double>(a);

    cache.x = x;
    cache.branch_pre.resize(a);
    cache.pre_act.assign(n, 0.0);

    if (layer.noise == NoiseMode::Dropout) {
        for (std::size_t i = 0; i < a; ++i) {
            affine_into(cache.branch_pre[i], layer.Ws[i], x, layer.bs[i]);
            const Vector& m = masks.unit_masks[i];
            for (std::size_t j = 0; j < n; ++j)
                cache.pre_act[j] += m[j] * cache.branch_pre[i][j];
        }
    } else {
        for (std::size_t i = 0; i < a; ++i) {
            // branch_pre keeps the noise-free transform for analysis; the
            // averaged path uses the masked weights.
            affine_into(cache.branch_pre[i], layer.Ws[i], x, layer.bs[i]);
            Vector masked;
            masked_affine_into(masked, layer.Ws[i], masks.weight_masks[i], x,
                               layer.bs[i]);
            for (std::size_t j = 0; j < n; ++j)
                cache.pre_act[j] += masked[j];
        }
    }
    for (std::size_t j = 0; j < n; ++j) cache.pre_act[j] *= inv_a;

    cache.post_act = cache.pre_act;
    apply_activation(layer.act, cache.post_act);

    Vector y = cache.post_act;
    if (layer.output_dropout) {
        const Vector& om = *masks.output_mask;
        for (std::size_t j = 0; j < n; ++j) y[j] *= om[j];
    }
    cache.masks = std::move(masks);
    return y;
}

Vector ste_forward_eval(const STELayer& layer, const Vector& x) {
    layer.validate();
    require_shape(x.size() == layer.in_dim(),
                  "STE eval: input length " + shape_str(x) +
                      ", layer expects " + std::to_string(layer.in_dim()));
    const std::size_t a = layer.branches();
    const std::size_t n = layer.out_dim();
    const double inv_a = 1.0 / static_cast<double>(a);

    // Replace each mask entry by its expectation p: in dropout mode that
    // scales the whole branch transform, in dropconnect mode only W x.
    Vector acc(n, 0.0);
    Vector z;
    if (layer.noise == NoiseMode::Dropout) {
        for (std::size_t i = 0; i < a; ++i) {
            affine_into(z, layer.Ws[i], x, layer.bs[i]);
            for (std::size_t j = 0; j < n; ++j) acc[j] += layer.p * z[j];
        }
    } else {
        const Vector zero(n, 0.0);
        for (std::size_t i = 0; i < a; ++i) {
            affine_into(z, layer.Ws[i], x, zero);
            const Vector& b = layer.bs[i];
            for (std::size_t j = 0; j < n; ++j)
                acc[j] += layer.p * z[j] + b[j];
        }
    }
    for (std::size_t j = 0; j < n; ++j) acc[j] *= inv_a;
    apply_activation(layer.act, acc);
    if (layer.output_dropout)
        for (std::size_t j = 0; j < n; ++j) acc[j] *= layer.p_out;
    return acc;
}

void ste_backward(const STELayer& layer, const LayerCache& cache,
                  const Vector& dy, STEGrads& grads, Vector& dx) {
    layer.validate();
    const std::size_t a = layer.branches();
    const std::size_t n = layer.out_dim();
    require_shape(dy.size() == n, "STE backward: dy has length " +
                                      shape_str(dy) + ", layer outputs " +
                                      std::to_string(n));
    require_shape(cache.x.size() == layer.in_dim() &&
                      cache.branch_pre.size() == a &&
                      cache.pre_act.size() == n,
                  "STE backward: cache does not match layer");
    check_masks(layer, cache.masks);
    require_shape(grads.dWs.size() == a && grads.dbs.size() == a,
                  "STE backward: gradient buffers do not match layer");

    // d(post-activation)
    Vector d = dy;
    if (layer.output_dropout) {
        const Vector& om = *cache.masks.output_mask;
        for (std::size_t j = 0; j < n; ++j) d[j] *= om[j];
    }
    // d(pre-activation average)
    activation_backward(layer.act, cache.pre_act, d);

    const double inv_a = 1.0 / static_cast<double>(a);
    dx.assign(layer.in_dim(), 0.0);
    Vector dz(n);
    Vector dx_branch;

    for (std::size_t i = 0; i < a; ++i) {
        if (layer.noise == NoiseMode::Dropout) {
            const Vector& m = cache.masks.unit_masks[i];
            for (std::size_t j = 0; j < n; ++j) dz[j] = inv_a * m[j] * d[j];
            outer_acc(grads.dWs[i], dz, cache.x);
            for (std::size_t j = 0; j < n; ++j) grads.dbs[i][j] += dz[j];
            matvec_t_into(dx_branch, layer.Ws[i], dz);
        } else {
            for (std::size_t j = 0; j < n; ++j) dz[j] = inv_a * d[j];
            masked_outer_acc(grads.dWs[i], cache.masks.weight_masks[i], dz,
                             cache.x);
            for (std::size_t j = 0; j < n; ++j) grads.dbs[i][j] += dz[j];
            masked_matvec_t_into(dx_branch, layer.Ws[i],
                                 cache.masks.weight_masks[i], dz);
        }
        for (std::size_t j = 0; j < dx.size(); ++j) dx[j] += dx_branch[j];
    }
}

STEGrads STEGrads::zeros_like(const STELayer& layer) {
    STEGrads g;
    g.dWs.reserve(layer.branches());
    g.dbs.reserve(layer.branches());
    for (std::size_t i = 0; i < layer.branches(); ++i) {
        g.dWs.emplace_back(layer.out_dim(), layer.in_dim());
        g.dbs.emplace_back(layer.out_dim(), 0.0);
    }
    return g;
}

void STEGrads::zero() {
    for (auto& w : dWs) std::fill(w.data.begin(), w.data.end(), 0.0);
    for (auto& b : dbs) std::fill(b.begin(), b.end(), 0.0);
}

DenseGrads DenseGrads::zeros_like(const DenseLayer& layer) {
    DenseGrads g;
    g.dW = Matrix(layer.out_dim(), layer.in_dim());
    g.db.assign(layer.out_dim(), 0.0);
    return g;
}

void DenseGrads::zero() {
    std::fill(dW.data.begin(), dW.data.end(), 0.0);
    std::fill(db.begin(), db.end(), 0.0);
}

Vector dense_forward_train(const DenseLayer& layer, const Vector& x,
                           std::optional<Vector> output_mask,
                           DenseCache& cache) {
    layer.validate();
    cache.x = x;
    affine_into(cache.pre_act, layer.W, x, layer.b);
    cache.post_act = cache.pre_act;
    apply_activation(layer.act, cache.post_act);
    Vector y = cache.post_act;
    if (output_mask) {
        require_shape(output_mask->size() == layer.out_dim(),
                      "dense forward: output mask length " +
                          shape_str(*output_mask) + ", layer outputs " +
                          std::to_string(layer.out_dim()));
        for (std::size_t j = 0; j < y.size(); ++j) y[j] *= (*output_mask)[j];
    }
    cache.output_mask = std::move(output_mask);
    return y;
}

Vector dense_forward_eval(const DenseLayer& layer, const Vector& x) {
    layer.validate();
    Vector y = affine(layer.W, x, layer.b);
    apply_activation(layer.act, y);
    if (layer.output_dropout)
        for (double& v : y) v *= layer.p_out;
    return y;
}

void dense_backward(const DenseLayer& layer, const DenseCache& cache,
                    const Vector& dy, DenseGrads& grads, Vector& dx) {
    layer.validate();
    require_shape(dy.size() == layer.out_dim(),
                  "dense backward: dy has length " + shape_str(dy) +
                      ", layer outputs " + std::to_string(layer.out_dim()));
    require_shape(cache.x.size() == layer.in_dim() &&
                      cache.pre_act.size() == layer.out_dim(),
                  "dense backward: cache does not match layer");
    require_shape(grads.dW.same_shape(layer.W) &&
                      grads.db.size() == layer.b.size(),
                  "dense backward: gradient buffers do not match layer");

    Vector dz = dy;
    if (cache.output_mask)
        for (std::size_t j = 0; j < dz.size(); ++j)
            dz[j] *= (*cache.output_mask)[j];
    if (layer.act != Activation::Softmax)
        activation_backward(layer.act, cache.pre_act, dz);
    // Softmax: dy already is the pre-activation gradient (fused loss).

    outer_acc(grads.dW, dz, cache.x);
    for (std::size_t j = 0; j < dz.size(); ++j) grads.db[j] += dz[j];
    matvec_t_into(dx, layer.W, dz);
}

} // namespace ste

#include "ste/collapse.hpp"

#include <cmath>
#include <cstdio>

#include "ste/kernels.hpp"
#include "ste/model.hpp"

namespace ste {

DenseLayer collapse_ste(const STELayer& layer) {
    layer.validate();
    const std::size_t a = layer.branches();
    const std::size_t n = layer.out_dim();
    const std::size_t m = layer.in_dim();
    const double inv_a = 1.0 / static_cast<double>(a);
    const double w_scale = layer.p * inv_a;
    const double b_scale =
        layer.noise == NoiseMode::Dropout ? layer.p * inv_a : inv_a;

    DenseLayer out;
    out.W = Matrix(n, m);
    out.b.assign(n, 0.0);
    for (std::size_t i = 0; i < a; ++i) {
        for (std::size_t k = 0; k < out.W.data.size(); ++k)
            out.W.data[k] += layer.Ws[i].data[k];
        for (std::size_t j = 0; j < n; ++j) out.b[j] += layer.bs[i][j];
    }
    for (double& v : out.W.data) v *= w_scale;
    for (double& v : out.b) v *= b_scale;

    out.act = layer.act;
    out.output_dropout = layer.output_dropout;
    out.p_out = layer.output_dropout ? layer.p_out : 1.0;
    return out;
}

DenseLayer collapse_affine(const STELayer& layer, const Matrix& C,
                           const Vector& d) {
    layer.validate();
    const std::size_t n = layer.out_dim();
    require_shape(C.rows == n && C.cols == n,
                  "collapse_affine: C is " + shape_str(C) + ", expected " +
                      std::to_string(n) + "x" + std::to_string(n));
    require_shape(d.size() == n, "collapse_affine: d has length " +
                                     shape_str(d) + ", expected " +
                                     std::to_string(n));
    const std::size_t a = layer.branches();
    const double inv_a = 1.0 / static_cast<double>(a);

    DenseLayer out;
    out.W = Matrix(n, layer.in_dim());
    out.b.assign(n, 0.0);
    for (std::size_t i = 0; i < a; ++i) {
        Matrix cw = matmul(C, layer.Ws[i]);
        for (std::size_t k = 0; k < out.W.data.size(); ++k)
            out.W.data[k] += cw.data[k];
        Vector cb = affine(C, layer.bs[i], d); // C b_i + d
        for (std::size_t j = 0; j < n; ++j) out.b[j] += cb[j];
    }
    for (double& v : out.W.data) v *= inv_a;
    for (double& v : out.b) v *= inv_a;

    out.act = layer.act;
    out.output_dropout = layer.output_dropout;
    out.p_out = layer.output_dropout ? layer.p_out : 1.0;
    return out;
}

std::string VerifyReport::summary() const {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s (max abs diff %.3e over %zu trials, tol %.1e)",
                  pass ? "PASS" : "FAIL", max_abs_diff, trials, tol);
    return buf;
}

namespace {

double max_abs_diff(const Vector& a, const Vector& b) {
    require_shape(a.size() == b.size(), "verify: output lengths differ (" +
                                            shape_str(a) + " vs " +
                                            shape_str(b) + ")");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

Vector random_input(std::size_t len, Rng& rng) {
    Vector x(len);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    return x;
}

} // namespace

VerifyReport verify_collapse(const STELayer& layer, const DenseLayer& collapsed,
                             std::size_t trials, double tol, Rng& rng) {
    VerifyReport rep;
    rep.trials = trials;
    rep.tol = tol;
    require_shape(collapsed.in_dim() == layer.in_dim() &&
                      collapsed.out_dim() == layer.out_dim(),
                  "verify_collapse: collapsed layer is " +
                      shape_str(collapsed.W) + ", STE layer is " +
                      std::to_string(layer.out_dim()) + "x" +
                      std::to_string(layer.in_dim()));
    // Zero input first: only the bias path contributes.
    Vector x(layer.in_dim(), 0.0);
    rep.max_abs_diff = max_abs_diff(ste_forward_eval(layer, x),
                                    dense_forward_eval(collapsed, x));
    for (std::size_t t = 0; t < trials; ++t) {
        x = random_input(layer.in_dim(), rng);
        rep.max_abs_diff =
            std::max(rep.max_abs_diff,
                     max_abs_diff(ste_forward_eval(layer, x),
                                  dense_forward_eval(collapsed, x)));
    }
    rep.pass = rep.max_abs_diff < tol;
    return rep;
}

VerifyReport verify_model_collapse(const Model& model, const Model& collapsed,
                                   std::size_t trials, double tol, Rng& rng) {
    VerifyReport rep;
    rep.trials = trials;
    rep.tol = tol;
    Vector x(model.input_dim, 0.0);
    rep.max_abs_diff = max_abs_diff(model_eval_forward(model, x),
                                    model_eval_forward(collapsed, x));
    for (std::size_t t = 0; t < trials; ++t) {
        x = random_input(model.input_dim, rng);
        rep.max_abs_diff =
            std::max(rep.max_abs_diff,
                     max_abs_diff(model_eval_forward(model, x),
                                  model_eval_forward(collapsed, x)));
    }
    rep.pass = rep.max_abs_diff < tol;
    return rep;
}

ParamCountReport count_parameters(const ModelSpec& spec) {
    spec.validate();
    ParamCountReport rep;
    std::size_t in = spec.input_dim;
    for (const LayerSpec& ls : spec.layers) {
        const std::size_t dense_count = ls.out_dim * (in + 1);
        LayerParamCount c;
        c.collapsed = dense_count;
        c.as_trained =
            (ls.kind == LayerKind::Ste ? ls.ensemble : 1) * dense_count;
        rep.per_layer.push_back(c);
        rep.total_as_trained += c.as_trained;
        rep.total_collapsed += c.collapsed;
        in = ls.out_dim;
    }
    return rep;
}

ParamCountReport count_parameters(const Model& model) {
    return count_parameters(spec_of(model));
}

std::string format_millions(std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1fM", static_cast<double>(n) / 1e6);
    return buf;
}

} // namespace ste

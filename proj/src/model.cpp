#include "ste/model.hpp"

#include "ste/collapse.hpp"
#include "ste/init.hpp"

namespace ste {

void ModelSpec::validate() const {
    if (input_dim == 0) throw ConfigError("model: input_dim must be >= 1");
    if (layers.empty()) throw ConfigError("model: needs at least one layer");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerSpec& ls = layers[l];
        const bool last = (l + 1 == layers.size());
        if (ls.out_dim == 0)
            throw ConfigError("model: layer " + std::to_string(l) +
                              " has out_dim 0");
        if (ls.act == Activation::Softmax && !last)
            throw ConfigError("model: softmax is only permitted on the "
                              "output layer (layer " + std::to_string(l) +
                              ")");
        if (last && ls.kind != LayerKind::Dense)
            throw ConfigError("model: the output layer must be dense");
        if (ls.kind == LayerKind::Ste) {
            if (ls.ensemble == 0)
                throw ConfigError("model: layer " + std::to_string(l) +
                                  " has ensemble size 0");
            if (!(ls.p > 0.0 && ls.p <= 1.0))
                throw ConfigError("model: layer " + std::to_string(l) +
                                  " keep probability must be in (0,1]");
        }
        if (ls.output_dropout && !(ls.p_out > 0.0 && ls.p_out <= 1.0))
            throw ConfigError("model: layer " + std::to_string(l) +
                              " p_out must be in (0,1]");
    }
}

std::size_t Model::output_dim() const {
    if (layers.empty()) return 0;
    return std::visit([](const auto& l) { return l.out_dim(); },
                      layers.back());
}

Model build_model(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    Model model;
    model.input_dim = spec.input_dim;
    std::size_t in = spec.input_dim;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const LayerSpec& ls = spec.layers[l];
        if (ls.kind == LayerKind::Dense) {
            DenseLayer d;
            Rng rng(seed, stream_id(StreamPurpose::Init, l, 0));
            d.W = glorot_uniform(in, ls.out_dim, rng);
            d.b.assign(ls.out_dim, 0.0);
            d.act = ls.act;
            d.output_dropout = ls.output_dropout;
            d.p_out = ls.output_dropout ? ls.p_out : 1.0;
            model.layers.emplace_back(std::move(d));
        } else {
            STELayer s;
            s.Ws.reserve(ls.ensemble);
            s.bs.reserve(ls.ensemble);
            for (std::size_t i = 0; i < ls.ensemble; ++i) {
                Rng rng(seed, stream_id(StreamPurpose::Init, l, i));
                s.Ws.push_back(glorot_uniform(in, ls.out_dim, rng));
                s.bs.emplace_back(ls.out_dim, 0.0);
            }
            s.p = ls.p;
            s.noise = ls.noise;
            s.output_dropout = ls.output_dropout;
            s.p_out = ls.p_out;
            s.act = ls.act;
            model.layers.emplace_back(std::move(s));
        }
        in = ls.out_dim;
    }
    return model;
}

ModelSpec spec_of(const Model& model) {
    ModelSpec spec;
    spec.input_dim = model.input_dim;
    for (const Layer& layer : model.layers) {
        LayerSpec ls;
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            ls.kind = LayerKind::Dense;
            ls.out_dim = d->out_dim();
            ls.act = d->act;
            ls.output_dropout = d->output_dropout;
            ls.p_out = d->p_out;
        } else {
            const auto& s = std::get<STELayer>(layer);
            ls.kind = LayerKind::Ste;
            ls.out_dim = s.out_dim();
            ls.act = s.act;
            ls.ensemble = s.branches();
            ls.p = s.p;
            ls.noise = s.noise;
            ls.output_dropout = s.output_dropout;
            ls.p_out = s.p_out;
        }
        spec.layers.push_back(ls);
    }
    return spec;
}

Vector model_eval_forward(const Model& model, const Vector& x) {
    require_shape(x.size() == model.input_dim,
                  "model forward: input length " + shape_str(x) +
                      ", model expects " + std::to_string(model.input_dim));
    Vector cur = x;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const bool last = (l + 1 == model.layers.size());
        if (const auto* d = std::get_if<DenseLayer>(&model.layers[l])) {
            if (last && d->act == Activation::Softmax) {
                // Fused with the loss: stop at the logits.
                Vector logits = affine(d->W, cur, d->b);
                cur = std::move(logits);
            } else {
                cur = dense_forward_eval(*d, cur);
            }
        } else {
            cur = ste_forward_eval(std::get<STELayer>(model.layers[l]), cur);
        }
    }
    return cur;
}

Model collapse_model(const Model& model) {
    Model out;
    out.input_dim = model.input_dim;
    out.layers.reserve(model.layers.size());
    for (const Layer& layer : model.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            out.layers.emplace_back(*d);
        } else {
            out.layers.emplace_back(collapse_ste(std::get<STELayer>(layer)));
        }
    }
    return out;
}

ParamRefs param_refs(Model& model) {
    ParamRefs refs;
    for (Layer& layer : model.layers) {
        if (auto* d = std::get_if<DenseLayer>(&layer)) {
            refs.emplace_back(d->W.data);
            refs.emplace_back(d->b);
        } else {
            auto& s = std::get<STELayer>(layer);
            for (std::size_t i = 0; i < s.branches(); ++i) {
                refs.emplace_back(s.Ws[i].data);
                refs.emplace_back(s.bs[i]);
            }
        }
    }
    return refs;
}

GradRefs grad_refs_of(const Model& model,
                      const std::vector<LayerGrads>& grads) {
    require_shape(grads.size() == model.layers.size(),
                  "grad buffers do not match model layer count");
    GradRefs refs;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        if (std::holds_alternative<DenseLayer>(model.layers[l])) {
            refs.emplace_back(grads[l].dense.dW.data);
            refs.emplace_back(grads[l].dense.db);
        } else {
            const auto& g = grads[l].ste;
            for (std::size_t i = 0; i < g.dWs.size(); ++i) {
                refs.emplace_back(g.dWs[i].data);
                refs.emplace_back(g.dbs[i]);
            }
        }
    }
    return refs;
}

std::vector<LayerGrads> grads_like(const Model& model) {
    std::vector<LayerGrads> grads(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        if (const auto* d = std::get_if<DenseLayer>(&model.layers[l]))
            grads[l].dense = DenseGrads::zeros_like(*d);
        else
            grads[l].ste =
                STEGrads::zeros_like(std::get<STELayer>(model.layers[l]));
    }
    return grads;
}

void zero_grads(std::vector<LayerGrads>& grads) {
    for (auto& g : grads) {
        g.ste.zero();
        g.dense.zero();
    }
}

namespace {

void add_into(Vector& dst, const Vector& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void add_into(Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.data.size(); ++i)
        dst.data[i] += src.data[i];
}

} // namespace

void accumulate_grads(std::vector<LayerGrads>& total,
                      const std::vector<LayerGrads>& g) {
    require_shape(total.size() == g.size(), "accumulate_grads: layer count");
    for (std::size_t l = 0; l < total.size(); ++l) {
        for (std::size_t i = 0; i < total[l].ste.dWs.size(); ++i) {
            add_into(total[l].ste.dWs[i], g[l].ste.dWs[i]);
            add_into(total[l].ste.dbs[i], g[l].ste.dbs[i]);
        }
        if (total[l].dense.dW.size() > 0) {
            add_into(total[l].dense.dW, g[l].dense.dW);
            add_into(total[l].dense.db, g[l].dense.db);
        }
    }
}

void scale_grads(std::vector<LayerGrads>& grads, double s) {
    for (auto& g : grads) {
        for (auto& w : g.ste.dWs)
            for (double& v : w.data) v *= s;
        for (auto& b : g.ste.dbs)
            for (double& v : b) v *= s;
        for (double& v : g.dense.dW.data) v *= s;
        for (double& v : g.dense.db) v *= s;
    }
}

} // namespace ste

#include "ste/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "ste/collapse.hpp"
#include "ste/layers.hpp"
#include "ste/objective.hpp"

namespace ste {

namespace {

// All RNG consumers of one training run, in checkpoint order: shuffle
// first, then per layer the branch mask streams and the output-dropout
// stream. Keyed by (purpose, layer, branch) so adding a layer leaves the
// other layers' draws untouched.
struct TrainerStreams {
    Rng shuffle;
    std::vector<std::vector<Rng>> branch; // [layer][branch], STE layers only
    std::vector<std::optional<Rng>> outmask;

    static TrainerStreams create(const ModelSpec& spec, std::uint64_t seed) {
        TrainerStreams ts;
        ts.shuffle = Rng(seed, stream_id(StreamPurpose::Shuffle));
        ts.branch.resize(spec.layers.size());
        ts.outmask.resize(spec.layers.size());
        for (std::size_t l = 0; l < spec.layers.size(); ++l) {
            const LayerSpec& ls = spec.layers[l];
            if (ls.kind == LayerKind::Ste) {
                ts.branch[l].reserve(ls.ensemble);
                for (std::size_t i = 0; i < ls.ensemble; ++i)
                    ts.branch[l].emplace_back(
                        seed, stream_id(StreamPurpose::Mask, l, i));
            }
            if (ls.output_dropout)
                ts.outmask[l] =
                    Rng(seed, stream_id(StreamPurpose::OutMask, l));
        }
        return ts;
    }

    std::vector<Rng> flatten() const {
        std::vector<Rng> flat;
        flat.push_back(shuffle);
        for (std::size_t l = 0; l < branch.size(); ++l) {
            for (const Rng& r : branch[l]) flat.push_back(r);
            if (outmask[l]) flat.push_back(*outmask[l]);
        }
        return flat;
    }

    void restore(const std::vector<Rng>& flat) {
        std::size_t k = 0;
        auto next = [&]() -> const Rng& {
            if (k >= flat.size())
                throw DataError("checkpoint rng state does not match the "
                                "model topology (too few streams)");
            return flat[k++];
        };
        shuffle = next();
        for (std::size_t l = 0; l < branch.size(); ++l) {
            for (Rng& r : branch[l]) r = next();
            if (outmask[l]) *outmask[l] = next();
        }
        if (k != flat.size())
            throw DataError("checkpoint rng state does not match the model "
                            "topology (too many streams)");
    }
};

// Per-example forward/backward scratch, reused across batches.
struct LayerCaches {
    std::vector<LayerCache> ste;
    std::vector<DenseCache> dense;
};

struct WorkSlot {
    LayerCaches caches;
    std::vector<LayerGrads> grads;
    Vector dx_a, dx_b;
};

// Number of per-example gradient buffers alive at once. Examples are
// processed in groups of this size; the sum stays in example order, so the
// constant affects memory and parallelism only, never results.
constexpr std::size_t kExampleGroup = 16;

double forward_train(const Model& model, const Vector& x,
                     std::vector<MaskSet>& masks, std::size_t label,
                     WorkSlot& slot, Vector& dlogits_out) {
    Vector cur = x;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        if (const auto* d = std::get_if<DenseLayer>(&model.layers[l])) {
            cur = dense_forward_train(*d, cur,
                                      std::move(masks[l].output_mask),
                                      slot.caches.dense[l]);
        } else {
            cur = ste_forward_train(std::get<STELayer>(model.layers[l]), cur,
                                    std::move(masks[l]), slot.caches.ste[l]);
        }
    }
    // Softmax output layers are fused with the loss: use the logits.
    const Vector* logits = &cur;
    if (const auto* out = std::get_if<DenseLayer>(&model.layers.back());
        out && out->act == Activation::Softmax)
        logits = &slot.caches.dense[model.layers.size() - 1].pre_act;

    XentResult xr = softmax_xent(*logits, label);
    dlogits_out = std::move(xr.dlogits);
    return xr.loss;
}

void backward_train(const Model& model, const Vector& dlogits,
                    WorkSlot& slot) {
    Vector* d = &slot.dx_a;
    Vector* dnext = &slot.dx_b;
    *d = dlogits;
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        if (const auto* dl = std::get_if<DenseLayer>(&model.layers[l]))
            dense_backward(*dl, slot.caches.dense[l], *d,
                           slot.grads[l].dense, *dnext);
        else
            ste_backward(std::get<STELayer>(model.layers[l]),
                         slot.caches.ste[l], *d, slot.grads[l].ste, *dnext);
        std::swap(d, dnext);
    }
}

std::vector<MaskSet> sample_example_masks(const Model& model,
                                          TrainerStreams& streams) {
    std::vector<MaskSet> masks(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        if (const auto* d = std::get_if<DenseLayer>(&model.layers[l])) {
            if (d->output_dropout)
                masks[l].output_mask = bernoulli_mask_vector(
                    d->out_dim(), d->p_out, *streams.outmask[l]);
        } else {
            const auto& s = std::get<STELayer>(model.layers[l]);
            masks[l] = sample_masks(
                s, std::span<Rng>(streams.branch[l]),
                streams.outmask[l] ? &*streams.outmask[l] : nullptr);
        }
    }
    return masks;
}

Checkpoint snapshot(const Model& model, const OptState& opt,
                    const TrainerStreams& streams,
                    const std::optional<NormStats>& norm, std::uint64_t epoch,
                    double val_loss, std::uint64_t best_epoch,
                    double best_val_loss) {
    Checkpoint ck;
    ck.model = model;
    ck.opt = opt;
    ck.rng_streams = streams.flatten();
    ck.norm = norm;
    ck.epoch = epoch;
    ck.val_loss = val_loss;
    ck.best_epoch = best_epoch;
    ck.best_val_loss = best_val_loss;
    return ck;
}

void check_spec_matches(const ModelSpec& spec, const Model& model) {
    const ModelSpec got = spec_of(model);
    bool ok = got.input_dim == spec.input_dim &&
              got.layers.size() == spec.layers.size();
    for (std::size_t l = 0; ok && l < spec.layers.size(); ++l) {
        ok = got.layers[l].kind == spec.layers[l].kind &&
             got.layers[l].out_dim == spec.layers[l].out_dim &&
             got.layers[l].ensemble == spec.layers[l].ensemble;
    }
    if (!ok)
        throw DataError("resume checkpoint topology does not match the "
                        "requested model spec");
}

} // namespace

TrainOutput train(const ModelSpec& spec, const TrainConfig& cfg,
                  const DataBundle& data, const ResumeState* resume) {
    const auto t_start = std::chrono::steady_clock::now();
    spec.validate();
    cfg.validate();

    if (data.train.size() == 0) throw DataError("train: empty training set");
    if (data.train.dim() != spec.input_dim)
        throw ShapeError("train: data has " + std::to_string(data.train.dim()) +
                         " features, model expects " +
                         std::to_string(spec.input_dim));
    if (std::size_t(data.train.max_label()) >= spec.output_dim())
        throw DataError("train: label " +
                        std::to_string(data.train.max_label()) +
                        " out of range for " +
                        std::to_string(spec.output_dim()) + " classes");

    // Holdout drawn from the run seed; the stream is separate from both
    // shuffling and masks.
    auto [tr, val] = split(data.train, cfg.val_fraction, cfg.seed);

    Model model;
    OptState opt;
    TrainerStreams streams = TrainerStreams::create(spec, cfg.seed);
    std::uint64_t start_epoch = 0;
    double best_val = std::numeric_limits<double>::infinity();
    std::uint64_t best_epoch = 0;

    if (resume != nullptr) {
        check_spec_matches(spec, resume->last.model);
        model = resume->last.model;
        if (!resume->last.opt)
            throw DataError("resume checkpoint has no optimizer state");
        opt = *resume->last.opt;
        streams.restore(resume->last.rng_streams);
        start_epoch = resume->last.epoch;
        best_val = resume->last.best_val_loss;
        best_epoch = resume->last.best_epoch;
    } else {
        model = build_model(spec, cfg.seed);
        opt = OptState::zeros_like(param_refs(model));
    }

    Model best_model =
        (resume && resume->best) ? resume->best->model : model;

    ParamRefs params = param_refs(model);
    std::vector<Vector> saved_params;
    std::vector<LayerGrads> batch_grads = grads_like(model);

    std::vector<WorkSlot> slots(kExampleGroup);
    for (auto& s : slots) {
        s.caches.ste.resize(model.layers.size());
        s.caches.dense.resize(model.layers.size());
        s.grads = grads_like(model);
    }

    const std::size_t n_train = tr.size();
    std::vector<std::size_t> order(n_train);
    std::vector<std::vector<MaskSet>> batch_masks(cfg.batch_size);
    std::vector<Vector> batch_dlogits(cfg.batch_size);
    std::vector<Vector> batch_inputs(cfg.batch_size);
    std::vector<std::uint32_t> batch_labels(cfg.batch_size);
    std::vector<double> batch_losses(cfg.batch_size);

    RunResult result;
    result.best_val_loss = best_val;
    result.best_epoch = best_epoch;

    for (std::uint64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = n_train; i > 1; --i)
            std::swap(order[i - 1], order[streams.shuffle.next_below(i)]);

        double epoch_loss_sum = 0.0;
        for (std::size_t batch_start = 0; batch_start < n_train;
             batch_start += cfg.batch_size) {
            const std::size_t bs =
                std::min(cfg.batch_size, n_train - batch_start);

            // Masks first, sequentially, in example order.
            for (std::size_t e = 0; e < bs; ++e) {
                const std::size_t idx = order[batch_start + e];
                batch_inputs[e] = tr.example(idx);
                batch_labels[e] = tr.labels[idx];
                batch_masks[e] = sample_example_masks(model, streams);
            }

            // Gradients are evaluated at the lookahead point theta + mu*v.
            apply_lookahead(params, opt, cfg.momentum, saved_params);

            zero_grads(batch_grads);
            for (std::size_t group = 0; group < bs; group += kExampleGroup) {
                const std::size_t g =
                    std::min(kExampleGroup, bs - group);
                const std::ptrdiff_t gn = static_cast<std::ptrdiff_t>(g);
#pragma omp parallel for schedule(static) if (gn > 1)
                for (std::ptrdiff_t k = 0; k < gn; ++k) {
                    const std::size_t e = group + static_cast<std::size_t>(k);
                    WorkSlot& slot = slots[static_cast<std::size_t>(k)];
                    zero_grads(slot.grads);
                    batch_losses[e] = forward_train(
                        model, batch_inputs[e], batch_masks[e],
                        batch_labels[e], slot, batch_dlogits[e]);
                    backward_train(model, batch_dlogits[e], slot);
                }
                // Fixed-order reduction keeps results thread-count-invariant.
                for (std::size_t k = 0; k < g; ++k)
                    accumulate_grads(batch_grads, slots[k].grads);
            }

            restore_params(params, saved_params);

            double batch_loss = 0.0;
            for (std::size_t e = 0; e < bs; ++e) batch_loss += batch_losses[e];
            batch_loss /= static_cast<double>(bs);
            if (!std::isfinite(batch_loss))
                throw NumericError(
                    "non-finite loss at epoch " + std::to_string(epoch + 1) +
                    ", batch " + std::to_string(batch_start / cfg.batch_size));
            epoch_loss_sum += batch_loss * static_cast<double>(bs);

            scale_grads(batch_grads, 1.0 / static_cast<double>(bs));
            GradRefs gr = grad_refs_of(model, batch_grads);
            nesterov_step(params, gr, opt, lr_at(cfg, opt.iteration),
                          cfg.momentum);
            opt.iteration += 1;
        }

        result.train_loss.push_back(epoch_loss_sum /
                                    static_cast<double>(n_train));
        result.lr.push_back(lr_at(cfg, opt.iteration));

        // Validation in eval mode, on the collapsed network.
        const double vloss =
            val.size() > 0 ? evaluate(collapse_model(model), val).loss : 0.0;
        result.val_loss.push_back(vloss);

        if (vloss < best_val) {
            best_val = vloss;
            best_epoch = epoch + 1;
            best_model = model;
        }
    }

    result.best_val_loss = best_val;
    result.best_epoch = best_epoch;

    TrainOutput out;
    out.last = snapshot(model, opt, streams, data.train.stats, cfg.epochs,
                        result.val_loss.empty()
                            ? std::numeric_limits<double>::infinity()
                            : result.val_loss.back(),
                        best_epoch, best_val);
    out.model = std::move(best_model);
    out.best = snapshot(out.model, opt, streams, data.train.stats, best_epoch,
                        best_val, best_epoch, best_val);

    if (data.test.size() > 0) {
        EvalResult te = evaluate(out.model, data.test);
        result.test_loss = te.loss;
        result.test_accuracy = te.accuracy;
    }

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      t_start)
            .count();
    out.result = std::move(result);
    return out;
}

EvalResult evaluate(const Model& model, const Dataset& data) {
    if (data.size() == 0) throw DataError("evaluate: empty dataset");
    require_shape(data.dim() == model.input_dim,
                  "evaluate: data has " + std::to_string(data.dim()) +
                      " features, model expects " +
                      std::to_string(model.input_dim));
    if (std::size_t(data.max_label()) >= model.output_dim())
        throw DataError("evaluate: label " + std::to_string(data.max_label()) +
                        " out of range for " +
                        std::to_string(model.output_dim()) + " classes");
    const std::size_t n = data.size();
    std::vector<double> losses(n);
    std::vector<unsigned char> correct(n);
    const std::ptrdiff_t pn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (pn > 1)
    for (std::ptrdiff_t i = 0; i < pn; ++i) {
        const std::size_t e = static_cast<std::size_t>(i);
        const Vector logits = model_eval_forward(model, data.example(e));
        losses[e] = softmax_xent_loss(logits, data.labels[e]);
        correct[e] = argmax_lowest(logits) == data.labels[e] ? 1 : 0;
    }
    double loss_sum = 0.0;
    std::size_t n_correct = 0;
    for (std::size_t e = 0; e < n; ++e) {
        loss_sum += losses[e];
        n_correct += correct[e];
    }
    return {loss_sum / static_cast<double>(n),
            100.0 * static_cast<double>(n_correct) / static_cast<double>(n)};
}

std::vector<ExperimentRow> run_experiment(
    const NamedSpecs& specs, const TrainConfig& cfg, const DataBundle& data,
    std::span<const std::uint64_t> seeds) {
    if (seeds.empty()) throw ConfigError("run_experiment: needs >= 1 seed");
    std::vector<ExperimentRow> rows;
    rows.reserve(specs.size());
    for (const auto& [name, spec] : specs) {
        std::vector<double> losses, accs;
        for (std::uint64_t seed : seeds) {
            TrainConfig c = cfg;
            c.seed = seed;
            TrainOutput out = train(spec, c, data);
            losses.push_back(out.result.test_loss);
            accs.push_back(out.result.test_accuracy);
        }
        auto mean = [](const std::vector<double>& v) {
            return std::accumulate(v.begin(), v.end(), 0.0) /
                   static_cast<double>(v.size());
        };
        auto sample_std = [&](const std::vector<double>& v, double m) {
            if (v.size() < 2) return 0.0;
            double acc = 0.0;
            for (double x : v) acc += (x - m) * (x - m);
            return std::sqrt(acc / static_cast<double>(v.size() - 1));
        };
        ExperimentRow row;
        row.name = name;
        row.seeds = seeds.size();
        row.loss_mean = mean(losses);
        row.loss_std = sample_std(losses, row.loss_mean);
        row.acc_mean = mean(accs);
        row.acc_std = sample_std(accs, row.acc_mean);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_experiment_csv(std::span<const ExperimentRow> rows) {
    std::string out = "config,loss_mean,loss_std,acc_mean,acc_std,seeds\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6g,%.6g,%.6g,%.6g,%zu\n",
                      r.name.c_str(), r.loss_mean, r.loss_std, r.acc_mean,
                      r.acc_std, r.seeds);
        out += buf;
    }
    return out;
}

std::string format_experiment_table(std::span<const ExperimentRow> rows) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-18s %-22s %-22s\n", "config", "loss",
                  "accuracy");
    os << buf;
    for (const auto& r : rows) {
        char loss[64], acc[64];
        std::snprintf(loss, sizeof(loss), "%.6g \xc2\xb1 %.6g", r.loss_mean,
                      r.loss_std);
        std::snprintf(acc, sizeof(acc), "%.6g \xc2\xb1 %.6g", r.acc_mean,
                      r.acc_std);
        std::snprintf(buf, sizeof(buf), "%-18s %-22s %-22s\n", r.name.c_str(),
                      loss, acc);
        os << buf;
        if (r.seeds < 2)
            os << "  (n=" << r.seeds
               << ": sample std undefined, reported as 0)\n";
    }
    return os.str();
}

NamedSpecs standard_experiment_specs(const ExperimentBase& base) {
    if (base.input_dim == 0 || base.classes == 0 || base.hidden.empty())
        throw ConfigError("experiment base: input_dim, classes and hidden "
                          "sizes are required");
    auto make = [&](LayerKind kind, NoiseMode noise, bool any_dropout) {
        ModelSpec spec;
        spec.input_dim = base.input_dim;
        for (std::size_t h : base.hidden) {
            LayerSpec ls;
            ls.kind = kind;
            ls.out_dim = h;
            ls.act = Activation::ReLU;
            ls.ensemble = kind == LayerKind::Ste ? base.ensemble : 1;
            ls.p = base.p;
            ls.noise = noise;
            ls.output_dropout = any_dropout;
            ls.p_out = base.p_out;
            spec.layers.push_back(ls);
        }
        LayerSpec out;
        out.kind = LayerKind::Dense;
        out.out_dim = base.classes;
        out.act = Activation::Softmax;
        spec.layers.push_back(out);
        return spec;
    };
    NamedSpecs specs;
    specs.emplace_back("none",
                       make(LayerKind::Dense, NoiseMode::Dropout, false));
    specs.emplace_back("dropout",
                       make(LayerKind::Dense, NoiseMode::Dropout, true));
    specs.emplace_back("ste-dropout",
                       make(LayerKind::Ste, NoiseMode::Dropout, true));
    specs.emplace_back("ste-dropconnect",
                       make(LayerKind::Ste, NoiseMode::Dropconnect, true));
    return specs;
}

ActivationAnalysis analyze_activations(const Model& model,
                                       const Matrix& inputs,
                                       std::size_t layer_index) {
    if (layer_index >= model.layers.size())
        throw ShapeError("analyze_activations: layer index " +
                         std::to_string(layer_index) + " out of range");
    const auto* ste = std::get_if<STELayer>(&model.layers[layer_index]);
    if (ste == nullptr)
        throw ShapeError("analyze_activations: layer " +
                         std::to_string(layer_index) + " is not an STE layer");
    if (inputs.rows == 0)
        throw DataError("analyze_activations: no inputs");
    require_shape(inputs.cols == model.input_dim,
                  "analyze_activations: inputs have " +
                      std::to_string(inputs.cols) + " features, model expects " +
                      std::to_string(model.input_dim));

    const std::size_t a = ste->branches();
    const std::size_t n = ste->out_dim();

    ActivationAnalysis out;
    out.branch_outputs.resize(inputs.rows);
    Matrix corr_sum(a, a);

    for (std::size_t e = 0; e < inputs.rows; ++e) {
        // Masks disabled, averaging suspended: eval-mode propagation up to
        // the layer, then the raw per-branch transforms.
        Vector x(inputs.row(e), inputs.row(e) + inputs.cols);
        for (std::size_t l = 0; l < layer_index; ++l) {
            if (const auto* d = std::get_if<DenseLayer>(&model.layers[l]))
                x = dense_forward_eval(*d, x);
            else
                x = ste_forward_eval(std::get<STELayer>(model.layers[l]), x);
        }
        auto& branches = out.branch_outputs[e];
        branches.resize(a);
        for (std::size_t i = 0; i < a; ++i)
            branches[i] = affine(ste->Ws[i], x, ste->bs[i]);

        // Pearson across the N output coordinates, per input.
        Vector mean(a, 0.0), sd(a, 0.0);
        for (std::size_t i = 0; i < a; ++i) {
            for (double v : branches[i]) mean[i] += v;
            mean[i] /= static_cast<double>(n);
            for (double v : branches[i])
                sd[i] += (v - mean[i]) * (v - mean[i]);
            sd[i] = std::sqrt(sd[i] / static_cast<double>(n));
        }
        for (std::size_t i = 0; i < a; ++i) {
            for (std::size_t j = 0; j < a; ++j) {
                double cov = 0.0;
                for (std::size_t c = 0; c < n; ++c)
                    cov += (branches[i][c] - mean[i]) *
                           (branches[j][c] - mean[j]);
                cov /= static_cast<double>(n);
                const double denom = sd[i] * sd[j];
                corr_sum.at(i, j) += denom > 0.0 ? cov / denom
                                                 : (i == j ? 1.0 : 0.0);
            }
        }
    }

    out.correlation = Matrix(a, a);
    for (std::size_t k = 0; k < corr_sum.data.size(); ++k)
        out.correlation.data[k] =
            corr_sum.data[k] / static_cast<double>(inputs.rows);

    double sum = 0.0;
    double mx = -1.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < a; ++i) {
        for (std::size_t j = 0; j < a; ++j) {
            if (i == j) continue;
            sum += out.correlation.at(i, j);
            mx = std::max(mx, out.correlation.at(i, j));
            ++cnt;
        }
    }
    out.mean_offdiag = cnt > 0 ? sum / static_cast<double>(cnt) : 1.0;
    out.max_offdiag = cnt > 0 ? mx : 1.0;
    return out;
}

} // namespace ste

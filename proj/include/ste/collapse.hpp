#pragma once

#include <string>
#include <vector>

#include "ste/layers.hpp"
#include "ste/rng.hpp"

namespace ste {

struct ModelSpec;
struct Model;

// Test-time parameter averaging of an STE layer into one dense layer:
//   dropout mode:      W_eff = (p/A) sum W_i,  b_eff = (p/A) sum b_i
//   dropconnect mode:  W_eff = (p/A) sum W_i,  b_eff = (1/A) sum b_i
// (the dropconnect mask touches W only, so the bias stays unscaled).
// The activation carries over; an output-dropout factor p_out is kept on
// the resulting dense layer and applied post-activation at eval time.
DenseLayer collapse_ste(const STELayer& layer);

// General fold for any affine test-time noise transform z -> C z + d:
//   W_eff = (1/A) sum C W_i,  b_eff = (1/A) sum (C b_i + d).
DenseLayer collapse_affine(const STELayer& layer, const Matrix& C,
                           const Vector& d);

struct VerifyReport {
    std::size_t trials = 0;
    double max_abs_diff = 0.0;
    double tol = 0.0;
    bool pass = false;

    std::string summary() const;
};

// Drives random inputs (plus one explicit zero input, which isolates the
// bias path) through ste_forward_eval and the collapsed dense forward and
// reports the max elementwise absolute difference.
VerifyReport verify_collapse(const STELayer& layer, const DenseLayer& collapsed,
                             std::size_t trials, double tol, Rng& rng);

// Same comparison end to end: eval forward of the full model against the
// forward of its collapsed counterpart.
VerifyReport verify_model_collapse(const Model& model, const Model& collapsed,
                                   std::size_t trials, double tol, Rng& rng);

struct LayerParamCount {
    std::size_t as_trained = 0;
    std::size_t collapsed = 0;
};

struct ParamCountReport {
    std::vector<LayerParamCount> per_layer;
    std::size_t total_as_trained = 0;
    std::size_t total_collapsed = 0;
};

// Dense M->N counts N(M+1); an STE layer counts A*N(M+1) as trained and
// N(M+1) collapsed.
ParamCountReport count_parameters(const ModelSpec& spec);
ParamCountReport count_parameters(const Model& model);

// 83939338 -> "83.9M" (rounded to 0.1M).
std::string format_millions(std::size_t n);

} // namespace ste

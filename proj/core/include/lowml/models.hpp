#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lowml/corpus.hpp"
#include "lowml/sparse.hpp"
#include "lowml/tensor.hpp"

namespace lowml {

enum class ModelKind { Linear, Nbsvm, Mlp };
enum class Head { Softmax, Sigmoid, Identity };

std::string to_string(ModelKind k);
std::string to_string(Head h);
ModelKind model_kind_from_string(const std::string& s);
Head head_from_string(const std::string& s);

Head head_for(TaskType t);

struct ModelSpec {
    ModelKind kind = ModelKind::Linear;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::size_t hidden_dim = 64;  // MLP only
    Head head = Head::Softmax;
    // NBSVM-style input transform: x_j -> 1[x_j != 0]. Set on folded
    // one-vs-rest NBSVM ensembles (see learner).
    bool binarize_input = false;
};

ModelSpec make_model_spec(ModelKind kind, std::size_t input_dim,
                          const TaskKind& task, std::size_t hidden_dim = 64);

// Wang-Manning log-count ratios plus the interpolation constants.
struct NbsvmState {
    std::vector<double> r;
    double alpha = 1.0;
    double beta = 0.25;
};

struct Model {
    ModelSpec spec;
    Params params;
    std::optional<NbsvmState> nb;  // present iff spec.kind == Nbsvm
};

// Glorot-uniform weights, zero biases, deterministic in `seed`.
// Throws DataError for NBSVM with output_dim != 2 or a non-softmax head.
Params build_model(const ModelSpec& spec, std::uint64_t seed);

Model make_model(const ModelSpec& spec, std::uint64_t seed);

// p = alpha + sum(features of positive rows), q likewise for negative rows,
// r = ln((p/|p|1) / (q/|q|1)) elementwise. "Positive" is output index 1 of
// the one-hot targets. The dataset is summed as given; callers binarize
// first (the NBSVM training path does).
NbsvmState nbsvm_ratios(const Dataset& train, double alpha = 1.0);

// x'_j = r_j * 1[x_j != 0], the model-input transform for NBSVM.
SparseMatrix nbsvm_scale(const SparseMatrix& x, const NbsvmState& nb);
SparseVector nbsvm_scale(const SparseVector& x, const NbsvmState& nb);

SparseMatrix binarize(const SparseMatrix& x);
SparseVector binarize(const SparseVector& x);

// Applies the model's input transform (NBSVM ratio scaling or plain
// binarization) to raw preprocessor features.
SparseMatrix model_input(const Model& model, const SparseMatrix& features);

// Pre-activation logits, n x K. NBSVM batches must already be scaled.
Tensor forward(const Params& params, const ModelSpec& spec,
               const SparseMatrix& batch);

struct LossGrad {
    double loss = 0.0;
    Grads grads;
};

// Mean-over-batch loss with exact hand-derived gradients:
// softmax cross-entropy (MULTICLASS), per-output sigmoid BCE (MULTILABEL),
// half squared error (REGRESSION).
LossGrad loss_and_grad(const Params& params, const ModelSpec& spec,
                       const SparseMatrix& batch, const Tensor& targets);

// Per-example losses (same definitions), for view_top_losses.
std::vector<double> per_example_loss(const Params& params, const ModelSpec& spec,
                                     const SparseMatrix& batch, const Tensor& targets);

// Softmax rows / sigmoid entries / identity passthrough; log-sum-exp
// stabilized.
Tensor predict_proba(const Params& params, const ModelSpec& spec,
                     const SparseMatrix& batch);

Tensor softmax_rows(const Tensor& logits);

// Wang-Manning weight interpolation applied per output row at training end:
// w' = beta*w + (1-beta)*mean(|w|)*sign(w).
void nbsvm_interpolate(Tensor& w, double beta);

// Per-model training defaults (the paper names none; ours, recorded).
struct TrainingDefaults {
    double lr;
    bool use_adamw;
};
TrainingDefaults training_defaults(ModelKind kind);

}  // namespace lowml

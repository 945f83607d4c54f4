#include "lowml/models.hpp"

#include <algorithm>
#include <cmath>

#include "lowml/errors.hpp"
#include "lowml/rng.hpp"

namespace lowml {

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Linear: return "linear";
        case ModelKind::Nbsvm: return "nbsvm";
        case ModelKind::Mlp: return "mlp";
    }
    return "?";
}

std::string to_string(Head h) {
    switch (h) {
        case Head::Softmax: return "softmax";
        case Head::Sigmoid: return "sigmoid";
        case Head::Identity: return "identity";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "linear") return ModelKind::Linear;
    if (s == "nbsvm") return ModelKind::Nbsvm;
    if (s == "mlp") return ModelKind::Mlp;
    throw DataError("unknown model kind: " + s);
}

Head head_from_string(const std::string& s) {
    if (s == "softmax") return Head::Softmax;
    if (s == "sigmoid") return Head::Sigmoid;
    if (s == "identity") return Head::Identity;
    throw DataError("unknown head: " + s);
}

Head head_for(TaskType t) {
    switch (t) {
        case TaskType::Multiclass: return Head::Softmax;
        case TaskType::Multilabel: return Head::Sigmoid;
        case TaskType::Regression: return Head::Identity;
    }
    return Head::Softmax;
}

ModelSpec make_model_spec(ModelKind kind, std::size_t input_dim, const TaskKind& task,
                          std::size_t hidden_dim) {
    ModelSpec spec;
    spec.kind = kind;
    spec.input_dim = input_dim;
    spec.output_dim = task.n_outputs;
    spec.hidden_dim = hidden_dim;
    spec.head = head_for(task.type);
    return spec;
}

namespace {

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
    Tensor t = Tensor::zeros({rows, cols});
    double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (auto& x : t.v) x = rng.uniform(-limit, limit);
    return t;
}

}  // namespace

Params build_model(const ModelSpec& spec, std::uint64_t seed) {
    if (spec.input_dim == 0 || spec.output_dim == 0)
        throw DataError("build_model: dims must be positive");
    if (spec.kind == ModelKind::Nbsvm) {
        if (spec.head != Head::Softmax || spec.output_dim != 2)
            throw DataError("NBSVM supports binary classification only (got " +
                            std::to_string(spec.output_dim) + " outputs, head " +
                            to_string(spec.head) + ")");
    }
    Rng rng(seed);
    Params p;
    if (spec.kind == ModelKind::Mlp) {
        if (spec.hidden_dim == 0) throw DataError("build_model: hidden_dim must be positive");
        p.push_back({"W1", glorot(spec.hidden_dim, spec.input_dim, rng)});
        p.push_back({"b1", Tensor::zeros({spec.hidden_dim})});
        p.push_back({"W2", glorot(spec.output_dim, spec.hidden_dim, rng)});
        p.push_back({"b2", Tensor::zeros({spec.output_dim})});
    } else {
        p.push_back({"W", glorot(spec.output_dim, spec.input_dim, rng)});
        p.push_back({"b", Tensor::zeros({spec.output_dim})});
    }
    return p;
}

Model make_model(const ModelSpec& spec, std::uint64_t seed) {
    return Model{spec, build_model(spec, seed), std::nullopt};
}

NbsvmState nbsvm_ratios(const Dataset& train, double alpha) {
    if (train.targets.cols() != 2)
        throw DataError("nbsvm_ratios: binary one-hot targets required");
    if (alpha <= 0.0) throw DataError("nbsvm_ratios: alpha must be > 0");
    std::size_t v_dim = train.features.n_cols;
    std::vector<double> p(v_dim, alpha), q(v_dim, alpha);
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        bool positive = train.targets(i, 1) == 1.0;
        (positive ? n_pos : n_neg)++;
        auto& acc = positive ? p : q;
        for (std::size_t k = train.features.row_begin(i); k < train.features.row_end(i); ++k)
            acc[train.features.col[k]] += train.features.val[k];
    }
    if (n_pos == 0 || n_neg == 0)
        throw DataError("nbsvm_ratios: a class has zero examples (pos=" +
                        std::to_string(n_pos) + ", neg=" + std::to_string(n_neg) + ")");
    double p1 = 0.0, q1 = 0.0;
    for (double x : p) p1 += x;
    for (double x : q) q1 += x;
    NbsvmState nb;
    nb.alpha = alpha;
    nb.r.resize(v_dim);
    for (std::size_t j = 0; j < v_dim; ++j)
        nb.r[j] = std::log((p[j] / p1) / (q[j] / q1));
    return nb;
}

SparseVector nbsvm_scale(const SparseVector& x, const NbsvmState& nb) {
    SparseVector out;
    out.reserve(x.size());
    for (const auto& [c, v] : x)
        if (v != 0.0) out.emplace_back(c, nb.r[c]);
    return out;
}

SparseMatrix nbsvm_scale(const SparseMatrix& x, const NbsvmState& nb) {
    SparseMatrix out;
    out.n_cols = x.n_cols;
    for (std::size_t i = 0; i < x.n_rows; ++i) out.append_row(nbsvm_scale(x.row(i), nb));
    return out;
}

SparseVector binarize(const SparseVector& x) {
    SparseVector out;
    out.reserve(x.size());
    for (const auto& [c, v] : x)
        if (v != 0.0) out.emplace_back(c, 1.0);
    return out;
}

SparseMatrix binarize(const SparseMatrix& x) {
    SparseMatrix out;
    out.n_cols = x.n_cols;
    for (std::size_t i = 0; i < x.n_rows; ++i) out.append_row(binarize(x.row(i)));
    return out;
}

SparseMatrix model_input(const Model& model, const SparseMatrix& features) {
    if (model.spec.kind == ModelKind::Nbsvm) {
        if (!model.nb) throw DataError("NBSVM model without ratio vector");
        return nbsvm_scale(features, *model.nb);
    }
    if (model.spec.binarize_input) return binarize(features);
    return features;
}

namespace {

const Tensor& find_tensor(const Params& p, const char* name) {
    for (const auto& nt : p)
        if (nt.name == name) return nt.t;
    throw DataError(std::string("missing parameter tensor: ") + name);
}

// logits = X W^T + b for sparse X (n x V), dense W (K x V).
Tensor linear_forward(const SparseMatrix& x, const Tensor& w, const Tensor& b) {
    std::size_t n = x.n_rows, k_dim = w.rows();
    Tensor z = Tensor::zeros({n, k_dim});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = x.row_begin(i); p < x.row_end(i); ++p) {
            std::uint32_t j = x.col[p];
            double xv = x.val[p];
            for (std::size_t k = 0; k < k_dim; ++k) z(i, k) += xv * w(k, j);
        }
        for (std::size_t k = 0; k < k_dim; ++k) z(i, k) += b(k);
    }
    return z;
}

void check_batch(const ModelSpec& spec, const SparseMatrix& batch) {
    if (batch.n_cols != spec.input_dim)
        throw DataError("batch has " + std::to_string(batch.n_cols) + " columns, model expects " +
                        std::to_string(spec.input_dim));
}

struct ForwardCache {
    Tensor hidden;  // post-ReLU (MLP only)
    Tensor logits;
};

ForwardCache forward_cached(const Params& params, const ModelSpec& spec,
                            const SparseMatrix& batch) {
    check_batch(spec, batch);
    ForwardCache f;
    if (spec.kind == ModelKind::Mlp) {
        const Tensor& w1 = find_tensor(params, "W1");
        const Tensor& b1 = find_tensor(params, "b1");
        const Tensor& w2 = find_tensor(params, "W2");
        const Tensor& b2 = find_tensor(params, "b2");
        f.hidden = linear_forward(batch, w1, b1);
        for (auto& h : f.hidden.v) h = std::max(h, 0.0);
        std::size_t n = batch.n_rows, k_dim = w2.rows(), h_dim = w2.cols();
        f.logits = Tensor::zeros({n, k_dim});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < k_dim; ++k) {
                double s = b2(k);
                for (std::size_t h = 0; h < h_dim; ++h) s += f.hidden(i, h) * w2(k, h);
                f.logits(i, k) = s;
            }
    } else {
        f.logits = linear_forward(batch, find_tensor(params, "W"), find_tensor(params, "b"));
    }
    return f;
}

double row_logsumexp(const Tensor& z, std::size_t i) {
    double m = z(i, 0);
    for (std::size_t k = 1; k < z.cols(); ++k) m = std::max(m, z(i, k));
    double s = 0.0;
    for (std::size_t k = 0; k < z.cols(); ++k) s += std::exp(z(i, k) - m);
    return m + std::log(s);
}

// Stable log(1 + e^z).
double softplus(double z) {
    if (z > 0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Per-example loss and dL/dz for one row; dz may be null for loss-only.
double head_loss_row(Head head, const Tensor& z, const Tensor& t, std::size_t i,
                     Tensor* dz) {
    std::size_t k_dim = z.cols();
    double loss = 0.0;
    switch (head) {
        case Head::Softmax: {
            double lse = row_logsumexp(z, i);
            for (std::size_t k = 0; k < k_dim; ++k) {
                loss -= t(i, k) * (z(i, k) - lse);
                if (dz) (*dz)(i, k) = std::exp(z(i, k) - lse) - t(i, k);
            }
            break;
        }
        case Head::Sigmoid: {
            for (std::size_t k = 0; k < k_dim; ++k) {
                // BCE(z, t) = softplus(z) - t*z, stable for |z| large.
                loss += softplus(z(i, k)) - t(i, k) * z(i, k);
                if (dz) (*dz)(i, k) = sigmoid(z(i, k)) - t(i, k);
            }
            break;
        }
        case Head::Identity: {
            for (std::size_t k = 0; k < k_dim; ++k) {
                double d = z(i, k) - t(i, k);
                loss += 0.5 * d * d;
                if (dz) (*dz)(i, k) = d;
            }
            break;
        }
    }
    return loss;
}

}  // namespace

Tensor forward(const Params& params, const ModelSpec& spec, const SparseMatrix& batch) {
    return forward_cached(params, spec, batch).logits;
}

LossGrad loss_and_grad(const Params& params, const ModelSpec& spec,
                       const SparseMatrix& batch, const Tensor& targets) {
    if (targets.rows() != batch.n_rows || targets.cols() != spec.output_dim)
        throw DataError("targets shape mismatch in loss_and_grad");
    for (double v : targets.v)
        if (!std::isfinite(v)) throw DataError("non-finite target in loss_and_grad");

    ForwardCache f = forward_cached(params, spec, batch);
    std::size_t n = batch.n_rows, k_dim = spec.output_dim;
    Tensor dz = Tensor::zeros({n, k_dim});
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        total += head_loss_row(spec.head, f.logits, targets, i, &dz);
    double inv_n = 1.0 / static_cast<double>(n);
    total *= inv_n;
    for (auto& g : dz.v) g *= inv_n;

    LossGrad out;
    out.loss = total;
    out.grads = zeros_like(params);
    if (spec.kind == ModelKind::Mlp) {
        const Tensor& w2 = find_tensor(params, "W2");
        std::size_t h_dim = w2.cols();
        Tensor& g_w1 = out.grads[0];
        Tensor& g_b1 = out.grads[1];
        Tensor& g_w2 = out.grads[2];
        Tensor& g_b2 = out.grads[3];
        Tensor da = Tensor::zeros({n, h_dim});
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < k_dim; ++k) {
                double g = dz(i, k);
                g_b2(k) += g;
                for (std::size_t h = 0; h < h_dim; ++h) {
                    g_w2(k, h) += g * f.hidden(i, h);
                    da(i, h) += g * w2(k, h);
                }
            }
            for (std::size_t h = 0; h < h_dim; ++h)
                if (f.hidden(i, h) <= 0.0) da(i, h) = 0.0;  // ReLU mask
            for (std::size_t p = batch.row_begin(i); p < batch.row_end(i); ++p) {
                std::uint32_t j = batch.col[p];
                double xv = batch.val[p];
                for (std::size_t h = 0; h < h_dim; ++h) g_w1(h, j) += da(i, h) * xv;
            }
            for (std::size_t h = 0; h < h_dim; ++h) g_b1(h) += da(i, h);
        }
    } else {
        Tensor& g_w = out.grads[0];
        Tensor& g_b = out.grads[1];
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = batch.row_begin(i); p < batch.row_end(i); ++p) {
                std::uint32_t j = batch.col[p];
                double xv = batch.val[p];
                for (std::size_t k = 0; k < k_dim; ++k) g_w(k, j) += dz(i, k) * xv;
            }
            for (std::size_t k = 0; k < k_dim; ++k) g_b(k) += dz(i, k);
        }
    }
    return out;
}

std::vector<double> per_example_loss(const Params& params, const ModelSpec& spec,
                                     const SparseMatrix& batch, const Tensor& targets) {
    ForwardCache f = forward_cached(params, spec, batch);
    std::vector<double> out(batch.n_rows);
    for (std::size_t i = 0; i < batch.n_rows; ++i)
        out[i] = head_loss_row(spec.head, f.logits, targets, i, nullptr);
    return out;
}

Tensor softmax_rows(const Tensor& logits) {
    Tensor p = Tensor::zeros({logits.rows(), logits.cols()});
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        double lse = row_logsumexp(logits, i);
        for (std::size_t k = 0; k < logits.cols(); ++k)
            p(i, k) = std::exp(logits(i, k) - lse);
    }
    return p;
}

Tensor predict_proba(const Params& params, const ModelSpec& spec, const SparseMatrix& batch) {
    Tensor z = forward(params, spec, batch);
    switch (spec.head) {
        case Head::Softmax: return softmax_rows(z);
        case Head::Sigmoid:
            for (auto& x : z.v) x = sigmoid(x);
            return z;
        case Head::Identity: return z;
    }
    return z;
}

void nbsvm_interpolate(Tensor& w, double beta) {
    for (std::size_t k = 0; k < w.rows(); ++k) {
        double mean_abs = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) mean_abs += std::abs(w(k, j));
        mean_abs /= static_cast<double>(w.cols());
        for (std::size_t j = 0; j < w.cols(); ++j) {
            double x = w(k, j);
            double sign = x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
            w(k, j) = beta * x + (1.0 - beta) * mean_abs * sign;
        }
    }
}

TrainingDefaults training_defaults(ModelKind kind) {
    switch (kind) {
        case ModelKind::Linear:
        case ModelKind::Nbsvm: return {0.25, false};
        case ModelKind::Mlp: return {1e-3, true};
    }
    return {0.25, false};
}

}  // namespace lowml

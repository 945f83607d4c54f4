#include "lowml/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lowml/errors.hpp"
#include "lowml/rng.hpp"

namespace lowml {

namespace {

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string label_string(const std::vector<std::string>& labels, const Tensor& rows,
                         std::size_t i, TaskType task) {
    std::size_t k_dim = rows.cols();
    if (task == TaskType::Regression) {
        std::string out;
        for (std::size_t k = 0; k < k_dim; ++k) {
            if (k) out += ',';
            char buf[32];
            std::snprintf(buf, sizeof buf, "%g", rows(i, k));
            out += buf;
        }
        return out;
    }
    if (task == TaskType::Multilabel) {
        std::string out;
        for (std::size_t k = 0; k < k_dim; ++k) {
            if (rows(i, k) >= 0.5) {
                if (!out.empty()) out += ',';
                out += k < labels.size() ? labels[k] : std::to_string(k);
            }
        }
        return out;
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < k_dim; ++k)
        if (rows(i, k) > rows(i, best)) best = k;
    return best < labels.size() ? labels[best] : std::to_string(best);
}

TaskType task_of(const ModelSpec& spec) {
    switch (spec.head) {
        case Head::Softmax: return TaskType::Multiclass;
        case Head::Sigmoid: return TaskType::Multilabel;
        case Head::Identity: return TaskType::Regression;
    }
    return TaskType::Multiclass;
}

}  // namespace

// ---------------------------------------------------------------------------
// Reports

std::string ClassificationReport::text() const {
    std::size_t name_w = std::string("weighted avg").size();
    for (const auto& n : class_names) name_w = std::max(name_w, n.size());
    std::ostringstream out;
    auto pad = [&](const std::string& s, std::size_t w) {
        std::string r(w > s.size() ? w - s.size() : 0, ' ');
        return r + s;
    };
    auto num = [&](double v) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return pad(buf, 10);
    };
    auto cnt = [&](std::size_t v) { return pad(std::to_string(v), 10); };

    out << pad("", name_w) << pad("precision", 10) << pad("recall", 10)
        << pad("f1-score", 10) << pad("support", 10) << "\n\n";
    for (std::size_t c = 0; c < class_names.size(); ++c)
        out << pad(class_names[c], name_w) << num(precision[c]) << num(recall[c]) << num(f1[c])
            << cnt(support[c]) << '\n';
    out << '\n';
    out << pad("accuracy", name_w) << pad("", 10) << pad("", 10) << num(accuracy)
        << cnt(n_total) << '\n';
    out << pad("macro avg", name_w) << num(macro_precision) << num(macro_recall)
        << num(macro_f1) << cnt(n_total) << '\n';
    out << pad("weighted avg", name_w) << num(weighted_precision) << num(weighted_recall)
        << num(weighted_f1) << cnt(n_total) << '\n';
    return out.str();
}

std::string ClassificationReport::json() const {
    nlohmann::json j;
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t c = 0; c < class_names.size(); ++c)
        classes.push_back({{"name", class_names[c]},
                           {"precision", precision[c]},
                           {"recall", recall[c]},
                           {"f1", f1[c]},
                           {"support", support[c]}});
    j["classes"] = classes;
    j["accuracy"] = accuracy;
    j["macro_avg"] = {{"precision", macro_precision}, {"recall", macro_recall}, {"f1", macro_f1}};
    j["weighted_avg"] = {{"precision", weighted_precision},
                         {"recall", weighted_recall},
                         {"f1", weighted_f1}};
    j["n"] = n_total;
    if (!confusion.empty()) j["confusion"] = confusion;
    return j.dump();
}

std::string RegressionReport::text() const {
    std::ostringstream out;
    out << "MSE: " << fmt_g17(mse) << "\nMAE: " << fmt_g17(mae) << "\nn: " << n_total << '\n';
    return out.str();
}

std::string RegressionReport::json() const {
    nlohmann::json j{{"mse", mse}, {"mae", mae}, {"n", n_total}};
    return j.dump();
}

std::string eval_text(const EvalResult& r) {
    return std::visit([](const auto& x) { return x.text(); }, r);
}

std::string eval_json(const EvalResult& r) {
    return std::visit([](const auto& x) { return x.json(); }, r);
}

// ---------------------------------------------------------------------------
// Learner

Learner::Learner(Model model, Dataset train, Dataset val, std::size_t batch_size,
                 std::uint64_t seed)
    : model_(std::move(model)),
      train_(std::move(train)),
      val_(std::move(val)),
      batch_size_(batch_size),
      seed_(seed) {
    if (train_.size() == 0) throw DataError("get_learner: empty training dataset");
    if (val_.size() == 0) throw DataError("get_learner: empty validation dataset");
    if (batch_size_ < 1) throw DataError("get_learner: batch_size must be >= 1");
    if (model_.spec.input_dim != train_.features.n_cols)
        throw DataError("model input_dim " + std::to_string(model_.spec.input_dim) +
                        " != dataset feature width " + std::to_string(train_.features.n_cols));
    if (model_.spec.output_dim != train_.targets.cols())
        throw DataError("model output_dim != target width");
    if (val_.features.n_cols != train_.features.n_cols)
        throw DataError("train/val feature width mismatch");
    TrainingDefaults d = training_defaults(model_.spec.kind);
    optimizer_ = d.use_adamw ? OptimizerKind::AdamW : OptimizerKind::Sgd;
    adamw_ = AdamWState::init(model_.params);
    velocity_.clear();
}

std::size_t Learner::batches_per_epoch() const {
    return (train_.size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::size_t> Learner::epoch_permutation(std::size_t epoch) const {
    Rng rng(mix_seed(seed_, epoch));
    return rng.permutation(train_.size());
}

double Learner::train_epoch(std::size_t epoch_index, const ScheduleSpec& schedule,
                            std::size_t step_offset, bool cycle_momentum, double* last_lr) {
    auto perm = epoch_permutation(epoch_index);
    std::size_t n = train_.size();
    std::size_t n_batches = batches_per_epoch();
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
        std::size_t lo = b * batch_size_;
        std::size_t hi = std::min(lo + batch_size_, n);
        std::vector<std::size_t> idx(perm.begin() + static_cast<long>(lo),
                                     perm.begin() + static_cast<long>(hi));
        SparseMatrix batch = train_.features.select_rows(idx);
        Tensor targets = Tensor::zeros({idx.size(), train_.targets.cols()});
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t k = 0; k < targets.cols(); ++k)
                targets(i, k) = train_.targets(idx[i], k);

        LossGrad lg = loss_and_grad(model_.params, model_.spec, batch, targets);
        if (!std::isfinite(lg.loss))
            throw DivergenceError("training diverged: non-finite loss at epoch " +
                                  std::to_string(epoch_index + 1) + ", step " +
                                  std::to_string(b + 1));
        SchedulePoint pt = schedule_at(schedule, step_offset + b);
        if (optimizer_ == OptimizerKind::AdamW) {
            adamw_step(model_.params, lg.grads, adamw_, pt.lr);
        } else {
            double mom = cycle_momentum && pt.momentum ? *pt.momentum : sgd_momentum_;
            sgd_momentum_step(model_.params, lg.grads, velocity_, pt.lr, mom);
        }
        if (last_lr) *last_lr = pt.lr;
        loss_sum += lg.loss * static_cast<double>(idx.size());
    }
    return loss_sum / static_cast<double>(n);
}

double Learner::val_loss() const {
    auto losses = per_example_loss(model_.params, model_.spec, val_.features, val_.targets);
    double s = std::accumulate(losses.begin(), losses.end(), 0.0);
    return s / static_cast<double>(losses.size());
}

double Learner::val_metric() const {
    Tensor proba = predict_proba(model_.params, model_.spec, val_.features);
    TaskType task = task_of(model_.spec);
    std::size_t n = val_.size();
    if (task == TaskType::Regression) {
        double se = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < proba.cols(); ++k) {
                double d = proba(i, k) - val_.targets(i, k);
                se += d * d;
            }
        return se / static_cast<double>(n * proba.cols());
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (task == TaskType::Multiclass) {
            std::size_t pred = 0, truth = 0;
            for (std::size_t k = 1; k < proba.cols(); ++k) {
                if (proba(i, k) > proba(i, pred)) pred = k;
                if (val_.targets(i, k) > val_.targets(i, truth)) truth = k;
            }
            if (pred == truth) ++correct;
        } else {
            bool all = true;
            for (std::size_t k = 0; k < proba.cols(); ++k)
                if ((proba(i, k) >= 0.5) != (val_.targets(i, k) >= 0.5)) { all = false; break; }
            if (all) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

void Learner::finalize_training() {
    if (model_.spec.kind != ModelKind::Nbsvm || !model_.nb) return;
    for (auto& nt : model_.params)
        if (nt.name == "W") nbsvm_interpolate(nt.t, model_.nb->beta);
}

void Learner::run_schedule(const ScheduleSpec& schedule, std::size_t epochs,
                           bool cycle_momentum) {
    std::size_t spe = batches_per_epoch();
    for (std::size_t e = 0; e < epochs; ++e) {
        double last_lr = 0.0;
        double train_loss =
            train_epoch(epochs_run_ + e, schedule, e * spe, cycle_momentum, &last_lr);
        history_.push_back({history_.size() + 1, train_loss, val_loss(), val_metric(), last_lr});
    }
    epochs_run_ += epochs;
}

const std::vector<EpochRecord>& Learner::fit(double lr, std::size_t epochs,
                                             std::size_t cycle_len, std::size_t cycle_mult) {
    if (!(lr > 0.0)) throw DataError("fit: lr must be > 0");
    if (epochs < 1) throw DataError("fit: epochs must be >= 1");
    if (cycle_len == 0) {
        run_schedule(ConstantSpec{lr}, epochs, false);
    } else {
        CosineRestartsSpec spec;
        spec.lr_base = lr;
        spec.lr_min = 0.0;
        spec.cycle_len = cycle_len;
        spec.cycle_mult = std::max<std::size_t>(1, cycle_mult);
        spec.steps_per_epoch = batches_per_epoch();
        spec.n_cycles = epochs;  // epochs counts annealing cycles here
        std::size_t total_epochs = 0, len = cycle_len;
        for (std::size_t c = 0; c < epochs; ++c) {
            total_epochs += len;
            len *= spec.cycle_mult;
        }
        run_schedule(spec, total_epochs, false);
    }
    finalize_training();
    return history_;
}

const std::vector<EpochRecord>& Learner::fit_onecycle(double lr_max, std::size_t epochs) {
    if (!(lr_max > 0.0)) throw DataError("fit_onecycle: lr_max must be > 0");
    if (epochs < 1) throw DataError("fit_onecycle: epochs must be >= 1");
    OneCycleSpec spec;
    spec.lr_max = lr_max;
    spec.total_steps = epochs * batches_per_epoch();
    run_schedule(spec, epochs, optimizer_ == OptimizerKind::Sgd);
    finalize_training();
    return history_;
}

const std::vector<EpochRecord>& Learner::autofit(double lr_max,
                                                 std::optional<std::size_t> epochs,
                                                 const AutofitOptions& opts) {
    if (!(lr_max > 0.0)) throw DataError("autofit: lr_max must be > 0");
    if (epochs) {
        if (*epochs < 1) throw DataError("autofit: epochs must be >= 1");
        run_schedule(TriangularSpec{lr_max, batches_per_epoch()}, *epochs, false);
        finalize_training();
        return history_;
    }
    // No budget: monitor validation loss; halve lr_max each reduce_patience
    // epochs without improvement, stop after stop_patience and restore the
    // best weights.
    double current_max = lr_max;
    double best_loss = std::numeric_limits<double>::infinity();
    Params best_params = model_.params;
    std::size_t since_best = 0;
    for (std::size_t e = 0; e < opts.max_epochs; ++e) {
        run_schedule(TriangularSpec{current_max, batches_per_epoch()}, 1, false);
        double vl = history_.back().val_loss;
        if (vl < best_loss) {
            best_loss = vl;
            best_params = model_.params;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= opts.stop_patience) break;
            if (since_best % opts.reduce_patience == 0) current_max *= opts.reduce_factor;
        }
    }
    model_.params = std::move(best_params);
    finalize_training();
    return history_;
}

EvalResult evaluate_predictions(const Tensor& proba, const Tensor& targets, TaskType task,
                                const std::vector<std::string>& labels) {
    std::size_t n = proba.rows(), k_dim = proba.cols();

    if (task == TaskType::Regression) {
        RegressionReport r;
        r.n_total = n;
        double se = 0.0, ae = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < k_dim; ++k) {
                double d = proba(i, k) - targets(i, k);
                se += d * d;
                ae += std::abs(d);
            }
        r.mse = se / static_cast<double>(n * k_dim);
        r.mae = ae / static_cast<double>(n * k_dim);
        return r;
    }

    ClassificationReport r;
    r.n_total = n;
    r.class_names = labels;
    if (r.class_names.size() != k_dim) {
        r.class_names.clear();
        for (std::size_t k = 0; k < k_dim; ++k) r.class_names.push_back(std::to_string(k));
    }
    std::vector<std::size_t> tp(k_dim, 0), fp(k_dim, 0), fn(k_dim, 0);

    if (task == TaskType::Multiclass) {
        r.confusion.assign(k_dim, std::vector<std::size_t>(k_dim, 0));
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t pred = 0, truth = 0;
            for (std::size_t k = 1; k < k_dim; ++k) {
                if (proba(i, k) > proba(i, pred)) pred = k;
                if (targets(i, k) > targets(i, truth)) truth = k;
            }
            r.confusion[truth][pred]++;
            if (pred == truth) ++correct;
        }
        for (std::size_t c = 0; c < k_dim; ++c) {
            tp[c] = r.confusion[c][c];
            for (std::size_t o = 0; o < k_dim; ++o) {
                if (o != c) {
                    fp[c] += r.confusion[o][c];
                    fn[c] += r.confusion[c][o];
                }
            }
        }
        r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    } else {
        std::size_t exact = 0;
        for (std::size_t i = 0; i < n; ++i) {
            bool all = true;
            for (std::size_t k = 0; k < k_dim; ++k) {
                bool pred = proba(i, k) >= 0.5;
                bool truth = targets(i, k) >= 0.5;
                if (pred && truth) ++tp[k];
                else if (pred && !truth) ++fp[k];
                else if (!pred && truth) ++fn[k];
                if (pred != truth) all = false;
            }
            if (all) ++exact;
        }
        r.accuracy = static_cast<double>(exact) / static_cast<double>(n);
    }

    double w_p = 0, w_r = 0, w_f = 0;
    std::size_t support_sum = 0;
    for (std::size_t c = 0; c < k_dim; ++c) {
        double p = tp[c] + fp[c] ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c]) : 0.0;
        double rec = tp[c] + fn[c] ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]) : 0.0;
        double f1 = p + rec > 0 ? 2.0 * p * rec / (p + rec) : 0.0;
        std::size_t sup = tp[c] + fn[c];
        r.precision.push_back(p);
        r.recall.push_back(rec);
        r.f1.push_back(f1);
        r.support.push_back(sup);
        r.macro_precision += p;
        r.macro_recall += rec;
        r.macro_f1 += f1;
        w_p += p * static_cast<double>(sup);
        w_r += rec * static_cast<double>(sup);
        w_f += f1 * static_cast<double>(sup);
        support_sum += sup;
    }
    double kd = static_cast<double>(k_dim);
    r.macro_precision /= kd;
    r.macro_recall /= kd;
    r.macro_f1 /= kd;
    if (support_sum > 0) {
        r.weighted_precision = w_p / static_cast<double>(support_sum);
        r.weighted_recall = w_r / static_cast<double>(support_sum);
        r.weighted_f1 = w_f / static_cast<double>(support_sum);
    }
    return r;
}

EvalResult Learner::evaluate() const {
    Tensor proba = predict_proba(model_.params, model_.spec, val_.features);
    return evaluate_predictions(proba, val_.targets, task_of(model_.spec), labels_);
}

EvalResult evaluate_model(const Model& model, const Dataset& val,
                          const std::vector<std::string>& labels) {
    SparseMatrix input = model_input(model, val.features);
    Tensor proba = predict_proba(model.params, model.spec, input);
    return evaluate_predictions(proba, val.targets, task_of(model.spec), labels);
}

std::vector<TopLoss> Learner::view_top_losses(std::size_t n) const {
    if (n < 1) throw DataError("view_top_losses: n must be >= 1");
    auto losses = per_example_loss(model_.params, model_.spec, val_.features, val_.targets);
    Tensor proba = predict_proba(model_.params, model_.spec, val_.features);
    TaskType task = task_of(model_.spec);
    std::vector<std::size_t> order(losses.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });
    std::size_t take = std::min(n, order.size());
    std::vector<TopLoss> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        std::size_t row = order[i];
        out.push_back({val_.sources[row], label_string(labels_, val_.targets, row, task),
                       label_string(labels_, proba, row, task), losses[row]});
    }
    return out;
}

LRFinderResult Learner::lr_find(const LrFindOptions& opts) {
    // Throwaway copies: the learner's model and optimizer state are never
    // touched.
    Params params = model_.params;
    AdamWState adamw = AdamWState::init(params);
    std::vector<Tensor> velocity;
    auto perm = epoch_permutation(0);
    std::size_t n = train_.size();
    std::size_t n_batches = batches_per_epoch();
    std::size_t cursor = 0;

    auto step = [&](double lr) -> double {
        std::size_t b = cursor % n_batches;
        ++cursor;
        std::size_t lo = b * batch_size_;
        std::size_t hi = std::min(lo + batch_size_, n);
        std::vector<std::size_t> idx(perm.begin() + static_cast<long>(lo),
                                     perm.begin() + static_cast<long>(hi));
        SparseMatrix batch = train_.features.select_rows(idx);
        Tensor targets = Tensor::zeros({idx.size(), train_.targets.cols()});
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t k = 0; k < targets.cols(); ++k)
                targets(i, k) = train_.targets(idx[i], k);
        LossGrad lg = loss_and_grad(params, model_.spec, batch, targets);
        if (!std::isfinite(lg.loss)) return lg.loss;
        if (optimizer_ == OptimizerKind::AdamW) adamw_step(params, lg.grads, adamw, lr);
        else sgd_momentum_step(params, lg.grads, velocity, lr, sgd_momentum_);
        return lg.loss;
    };
    return run_lr_range_test(step, opts);
}

std::string history_csv(const std::vector<EpochRecord>& history) {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss,val_metric,lr\n";
    for (const auto& e : history)
        out << e.epoch << ',' << fmt_g17(e.train_loss) << ',' << fmt_g17(e.val_loss) << ','
            << fmt_g17(e.val_metric) << ',' << fmt_g17(e.lr) << '\n';
    return out.str();
}

std::string Learner::history_csv() const { return lowml::history_csv(history_); }

Learner get_learner(Model model, Dataset train, Dataset val, std::size_t batch_size,
                    std::uint64_t seed) {
    if (model.spec.kind == ModelKind::Nbsvm) {
        if (train.targets.cols() != 2)
            throw DataError("NBSVM supports binary classification only");
        if (!model.nb) {
            Dataset binarized;
            binarized.features = binarize(train.features);
            binarized.targets = train.targets;
            binarized.sources = train.sources;
            model.nb = nbsvm_ratios(binarized, 1.0);
        }
        train.features = nbsvm_scale(train.features, *model.nb);
        val.features = nbsvm_scale(val.features, *model.nb);
    }
    return Learner(std::move(model), std::move(train), std::move(val), batch_size, seed);
}

Model train_nbsvm_ovr(const Dataset& train, const Dataset& val,
                      const OvrTrainOptions& opts, std::uint64_t seed) {
    std::size_t k_dim = train.targets.cols();
    if (k_dim < 3)
        throw DataError("train_nbsvm_ovr: use a plain NBSVM learner for binary tasks");
    std::size_t v_dim = train.features.n_cols;

    Tensor w_fold = Tensor::zeros({k_dim, v_dim});
    Tensor b_fold = Tensor::zeros({k_dim});

    auto binary_view = [](const Dataset& d, std::size_t cls) {
        Dataset out;
        out.features = d.features;
        out.sources = d.sources;
        out.targets = Tensor::zeros({d.size(), 2});
        for (std::size_t i = 0; i < d.size(); ++i) {
            double pos = d.targets(i, cls);
            out.targets(i, 1) = pos;
            out.targets(i, 0) = 1.0 - pos;
        }
        return out;
    };

    for (std::size_t c = 0; c < k_dim; ++c) {
        Dataset btrain = binary_view(train, c);
        Dataset bval = binary_view(val, c);

        ModelSpec spec;
        spec.kind = ModelKind::Nbsvm;
        spec.input_dim = v_dim;
        spec.output_dim = 2;
        spec.head = Head::Softmax;

        Model m;
        m.spec = spec;
        m.params = build_model(spec, mix_seed(seed, c));
        {
            Dataset bin;
            bin.features = binarize(btrain.features);
            bin.targets = btrain.targets;
            bin.sources = btrain.sources;
            NbsvmState nb = nbsvm_ratios(bin, opts.alpha);
            nb.beta = opts.beta;
            m.nb = std::move(nb);
        }

        Learner lrn = get_learner(std::move(m), std::move(btrain), std::move(bval),
                                  opts.batch_size, mix_seed(seed, 1000 + c));
        lrn.autofit(opts.lr_max, opts.epochs, opts.autofit);

        const Model& trained = lrn.model();
        const Tensor* w = nullptr;
        const Tensor* b = nullptr;
        for (const auto& nt : trained.params) {
            if (nt.name == "W") w = &nt.t;
            if (nt.name == "b") b = &nt.t;
        }
        const std::vector<double>& r = trained.nb->r;
        for (std::size_t j = 0; j < v_dim; ++j)
            w_fold(c, j) = ((*w)(1, j) - (*w)(0, j)) * r[j];
        b_fold(c) = (*b)(1) - (*b)(0);
    }

    Model out;
    out.spec.kind = ModelKind::Linear;
    out.spec.input_dim = v_dim;
    out.spec.output_dim = k_dim;
    out.spec.head = Head::Softmax;
    out.spec.binarize_input = true;
    out.params.push_back({"W", std::move(w_fold)});
    out.params.push_back({"b", std::move(b_fold)});
    return out;
}

}  // namespace lowml

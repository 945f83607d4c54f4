#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lowml/corpus.hpp"
#include "lowml/models.hpp"
#include "lowml/optim.hpp"

namespace lowml {

struct EpochRecord {
    std::size_t epoch = 0;      // 1-based
    double train_loss = 0.0;    // mean per-example loss over the epoch
    double val_loss = 0.0;
    double val_metric = 0.0;    // accuracy (classification) / MSE (regression)
    double lr = 0.0;            // lr at the last step of the epoch
};

struct ClassificationReport {
    std::vector<std::string> class_names;
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    std::vector<std::size_t> support;
    double accuracy = 0.0;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
    std::size_t n_total = 0;
    // K x K counts, row = true class, column = predicted (multiclass only;
    // empty for multilabel reports).
    std::vector<std::vector<std::size_t>> confusion;

    std::string text() const;  // paper-style table layout
    std::string json() const;
};

struct RegressionReport {
    double mse = 0.0;
    double mae = 0.0;
    std::size_t n_total = 0;

    std::string text() const;
    std::string json() const;
};

using EvalResult = std::variant<ClassificationReport, RegressionReport>;

std::string eval_text(const EvalResult& r);
std::string eval_json(const EvalResult& r);

struct TopLoss {
    std::string source;
    std::string true_label;
    std::string predicted_label;
    double loss = 0.0;
};

struct AutofitOptions {
    std::size_t reduce_patience = 2;
    std::size_t stop_patience = 5;
    double reduce_factor = 0.5;
    std::size_t max_epochs = 1000;  // safety cap when no budget is given
};

enum class OptimizerKind { Sgd, AdamW };

class Learner {
public:
    Learner(Model model, Dataset train, Dataset val, std::size_t batch_size,
            std::uint64_t seed = 42);

    // Constant lr, or SGDR when cycle_len > 0 (then `epochs` counts
    // annealing cycles and the run spans cycle_len * sum(mult^k) epochs).
    const std::vector<EpochRecord>& fit(double lr, std::size_t epochs,
                                        std::size_t cycle_len = 0,
                                        std::size_t cycle_mult = 1);

    const std::vector<EpochRecord>& fit_onecycle(double lr_max, std::size_t epochs);

    // Triangular schedule per epoch. Without an epoch budget: monitors val
    // loss, halves lr_max on plateau, stops and restores the best weights.
    const std::vector<EpochRecord>& autofit(double lr_max,
                                            std::optional<std::size_t> epochs = {},
                                            const AutofitOptions& opts = {});

    EvalResult evaluate() const;

    std::vector<TopLoss> view_top_losses(std::size_t n) const;

    LRFinderResult lr_find(const LrFindOptions& opts = {});

    const Model& model() const { return model_; }
    Model& model() { return model_; }
    const std::vector<EpochRecord>& history() const { return history_; }
    const Dataset& train_data() const { return train_; }
    const Dataset& val_data() const { return val_; }
    std::size_t batch_size() const { return batch_size_; }
    std::size_t batches_per_epoch() const;
    std::uint64_t seed() const { return seed_; }
    OptimizerKind optimizer() const { return optimizer_; }
    void set_optimizer(OptimizerKind k) { optimizer_ = k; }
    double sgd_momentum() const { return sgd_momentum_; }
    void set_sgd_momentum(double m) { sgd_momentum_ = m; }
    const std::vector<std::string>& label_names() const { return labels_; }
    void set_label_names(std::vector<std::string> names) { labels_ = std::move(names); }

    // Epoch batch order: sequential slices of a permutation derived from
    // (seed, epoch).
    std::vector<std::size_t> epoch_permutation(std::size_t epoch) const;

    std::string history_csv() const;

private:
    struct OptState;
    void run_schedule(const ScheduleSpec& schedule, std::size_t epochs,
                      bool cycle_momentum);
    double train_epoch(std::size_t epoch_index, const ScheduleSpec& schedule,
                       std::size_t step_offset, bool cycle_momentum,
                       double* last_lr);
    double val_loss() const;
    double val_metric() const;
    void finalize_training();  // NBSVM weight interpolation

    Model model_;
    Dataset train_;
    Dataset val_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    OptimizerKind optimizer_;
    double sgd_momentum_ = 0.9;
    AdamWState adamw_;
    std::vector<Tensor> velocity_;
    std::vector<EpochRecord> history_;
    std::vector<std::string> labels_;
    std::size_t epochs_run_ = 0;
};

// Shape checks + fresh optimizer state. For NBSVM models the datasets are
// binarized and scaled by the ratio vector here, once.
Learner get_learner(Model model, Dataset train, Dataset val,
                    std::size_t batch_size, std::uint64_t seed = 42);

struct OvrTrainOptions {
    double lr_max = 0.25;
    std::optional<std::size_t> epochs;  // empty => autofit early stopping
    std::size_t batch_size = 32;
    double alpha = 1.0;
    double beta = 0.25;
    AutofitOptions autofit;
};

// One-vs-rest NBSVM for K > 2 classes: per class, binary ratios + autofit,
// then the ensemble is folded into a single multiclass linear model over
// binarized features (margins = (w_pos - w_neg) .* r_c).
Model train_nbsvm_ovr(const Dataset& train, const Dataset& val,
                      const OvrTrainOptions& opts, std::uint64_t seed);

std::string history_csv(const std::vector<EpochRecord>& history);

// Evaluation of a standalone model on raw (preprocessor-output) features;
// the model's input transform is applied here.
EvalResult evaluate_model(const Model& model, const Dataset& val,
                          const std::vector<std::string>& labels);

EvalResult evaluate_predictions(const Tensor& proba, const Tensor& targets, TaskType task,
                                const std::vector<std::string>& labels);

}  // namespace lowml

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lowml/tensor.hpp"

namespace lowml {

struct AdamWState {
    std::vector<Tensor> m;  // first moments, aligned with Params
    std::vector<Tensor> v;  // second moments
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    static AdamWState init(const Params& params, double weight_decay = 0.0);
};

// Decoupled AdamW: theta <- theta - lr*(mhat/(sqrt(vhat)+eps) + wd*theta).
// Throws DivergenceError naming the tensor on non-finite gradients.
void adamw_step(Params& params, const Grads& grads, AdamWState& state, double lr);

// v <- momentum*v - lr*g; theta <- theta + v.
void sgd_momentum_step(Params& params, const Grads& grads,
                       std::vector<Tensor>& velocity, double lr, double momentum);

struct OneCycleSpec {
    double lr_max = 1e-3;
    std::size_t total_steps = 2;
    double pct_start = 0.3;
    double div_factor = 25.0;
    double final_div = 2500.0;
    double mom_high = 0.95;
    double mom_low = 0.85;

    // Integer phase-boundary step: the single step where lr == lr_max.
    std::size_t boundary_step() const;
};

struct TriangularSpec {
    double lr_max = 1e-3;
    std::size_t steps_per_epoch = 2;
};

// SGDR. cycle_len is in epochs; steps_per_epoch converts to steps.
// n_cycles = 0 means unbounded.
struct CosineRestartsSpec {
    double lr_base = 1e-3;
    double lr_min = 0.0;
    std::size_t cycle_len = 1;
    std::size_t cycle_mult = 1;
    std::size_t steps_per_epoch = 1;
    std::size_t n_cycles = 0;

    std::size_t total_steps() const;  // 0 when unbounded
};

struct ConstantSpec {
    double lr = 1e-3;
};

using ScheduleSpec =
    std::variant<OneCycleSpec, TriangularSpec, CosineRestartsSpec, ConstantSpec>;

struct SchedulePoint {
    double lr = 0.0;
    std::optional<double> momentum;
};

// lr (and momentum for 1cycle) at an integer step. Throws DataError for
// steps past the end of a bounded schedule; a bounded SGDR run additionally
// accepts its one-past-the-end step and returns lr_min there.
SchedulePoint schedule_at(const ScheduleSpec& spec, std::size_t step);

struct LRFinderResult {
    std::vector<double> lrs;             // strictly increasing trial rates
    std::vector<double> raw_losses;
    std::vector<double> smoothed_losses; // bias-corrected EMA
    std::size_t stop_step = 0;
    double suggestion = 0.0;
};

struct LrFindOptions {
    double lr_start = 1e-7;
    double lr_end = 10.0;
    std::size_t max_iters = 100;
    double ema_beta = 0.98;
    double divergence_factor = 4.0;
};

// One training step per trial rate on a throwaway model copy; the step
// closure returns the batch loss at the given lr. Stops early once the
// smoothed loss exceeds divergence_factor x the best smoothed loss.
// Suggestion: lr at the steepest negative slope of the smoothed curve,
// falling back to (lr at min smoothed)/10.
LRFinderResult run_lr_range_test(const std::function<double(double)>& train_step,
                                 const LrFindOptions& opts);

// CSV columns step,lr,raw_loss,smoothed_loss plus trailing
// "# suggestion=<lr>" comment line.
std::string lr_curve_csv(const LRFinderResult& r);
void write_lr_curve_csv(const LRFinderResult& r, const std::string& path);

// Minimal line plot of smoothed loss vs log10(lr).
std::string lr_curve_svg(const LRFinderResult& r);
void write_lr_curve_svg(const LRFinderResult& r, const std::string& path);

}  // namespace lowml

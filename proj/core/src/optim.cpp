#include "lowml/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "lowml/errors.hpp"

namespace lowml {

AdamWState AdamWState::init(const Params& params, double weight_decay) {
    AdamWState s;
    s.weight_decay = weight_decay;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& nt : params) {
        s.m.push_back(Tensor::zeros(nt.t.shape));
        s.v.push_back(Tensor::zeros(nt.t.shape));
    }
    return s;
}

namespace {

void check_finite(const Grads& grads, const Params& params) {
    for (std::size_t i = 0; i < grads.size(); ++i)
        for (double g : grads[i].v)
            if (!std::isfinite(g))
                throw DivergenceError("non-finite gradient for tensor '" + params[i].name + "'");
}

}  // namespace

void adamw_step(Params& params, const Grads& grads, AdamWState& state, double lr) {
    if (grads.size() != params.size()) throw DataError("adamw_step: grads misaligned");
    if (!(lr > 0.0)) throw DataError("adamw_step: lr must be > 0");
    check_finite(grads, params);
    state.t += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& theta = params[i].t;
        const Tensor& g = grads[i];
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t k = 0; k < theta.size(); ++k) {
            m.v[k] = state.beta1 * m.v[k] + (1.0 - state.beta1) * g.v[k];
            v.v[k] = state.beta2 * v.v[k] + (1.0 - state.beta2) * g.v[k] * g.v[k];
            double mhat = m.v[k] / bc1;
            double vhat = v.v[k] / bc2;
            theta.v[k] -= lr * (mhat / (std::sqrt(vhat) + state.eps) +
                                state.weight_decay * theta.v[k]);
        }
    }
}

void sgd_momentum_step(Params& params, const Grads& grads, std::vector<Tensor>& velocity,
                       double lr, double momentum) {
    if (grads.size() != params.size()) throw DataError("sgd_momentum_step: grads misaligned");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw DataError("sgd_momentum_step: momentum must be in [0, 1)");
    check_finite(grads, params);
    if (velocity.size() != params.size()) {
        velocity.clear();
        for (const auto& nt : params) velocity.push_back(Tensor::zeros(nt.t.shape));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& theta = params[i].t;
        const Tensor& g = grads[i];
        Tensor& v = velocity[i];
        for (std::size_t k = 0; k < theta.size(); ++k) {
            v.v[k] = momentum * v.v[k] - lr * g.v[k];
            theta.v[k] += v.v[k];
        }
    }
}

// ---------------------------------------------------------------------------
// Schedules

std::size_t OneCycleSpec::boundary_step() const {
    long s = std::llround(pct_start * static_cast<double>(total_steps));
    s = std::max<long>(1, std::min<long>(s, static_cast<long>(total_steps) - 1));
    return static_cast<std::size_t>(s);
}

std::size_t CosineRestartsSpec::total_steps() const {
    if (n_cycles == 0) return 0;
    std::size_t total = 0, len = cycle_len * steps_per_epoch;
    for (std::size_t c = 0; c < n_cycles; ++c) {
        total += len;
        len *= cycle_mult;
    }
    return total;
}

namespace {

SchedulePoint onecycle_at(const OneCycleSpec& s, std::size_t step) {
    if (s.total_steps < 2) throw DataError("OneCycle: total_steps must be >= 2");
    if (step >= s.total_steps)
        throw DataError("schedule step " + std::to_string(step) + " out of range (total " +
                        std::to_string(s.total_steps) + ")");
    std::size_t b = s.boundary_step();
    double lr0 = s.lr_max / s.div_factor;
    double lr_final = s.lr_max / s.final_div;
    SchedulePoint out;
    // Convex-combination form: the endpoints and the peak are exact.
    if (step <= b) {
        double u = static_cast<double>(step) / static_cast<double>(b);
        out.lr = (1.0 - u) * lr0 + u * s.lr_max;
        out.momentum = (1.0 - u) * s.mom_high + u * s.mom_low;
    } else {
        double span = static_cast<double>(s.total_steps - 1 - b);
        double u = static_cast<double>(step - b) / span;
        double c = 0.5 * (1.0 + std::cos(std::numbers::pi * u));
        out.lr = c * s.lr_max + (1.0 - c) * lr_final;
        out.momentum = c * s.mom_low + (1.0 - c) * s.mom_high;
    }
    return out;
}

SchedulePoint triangular_at(const TriangularSpec& s, std::size_t step) {
    if (s.steps_per_epoch < 1) throw DataError("Triangular: steps_per_epoch must be >= 1");
    std::size_t i = step % s.steps_per_epoch;
    double floor_lr = s.lr_max / 10.0;
    if (s.steps_per_epoch == 1) return {s.lr_max, std::nullopt};
    double half = static_cast<double>(s.steps_per_epoch) / 2.0;
    double pos = static_cast<double>(i);
    double u = pos <= half ? pos / half
                           : (static_cast<double>(s.steps_per_epoch) - pos) / half;
    return {(1.0 - u) * floor_lr + u * s.lr_max, std::nullopt};
}

SchedulePoint cosine_at(const CosineRestartsSpec& s, std::size_t step) {
    if (s.cycle_len < 1 || s.steps_per_epoch < 1 || s.cycle_mult < 1)
        throw DataError("Cosine: cycle_len, steps_per_epoch and cycle_mult must be >= 1");
    std::size_t len = s.cycle_len * s.steps_per_epoch;
    std::size_t t = step;
    std::size_t cycle = 0;
    while (t >= len) {
        if (s.n_cycles > 0 && cycle + 1 >= s.n_cycles) {
            // Bounded run: accept exactly the one-past-the-end step as the
            // closing endpoint (t_cur == T of the last cycle -> lr_min).
            if (t == len) break;
            throw DataError("schedule step " + std::to_string(step) + " out of range");
        }
        t -= len;
        len *= s.cycle_mult;
        ++cycle;
    }
    double u = static_cast<double>(t) / static_cast<double>(len);
    double c = 0.5 * (1.0 + std::cos(std::numbers::pi * u));
    return {c * s.lr_base + (1.0 - c) * s.lr_min, std::nullopt};
}

}  // namespace

SchedulePoint schedule_at(const ScheduleSpec& spec, std::size_t step) {
    return std::visit(
        [step](const auto& s) -> SchedulePoint {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, OneCycleSpec>) return onecycle_at(s, step);
            else if constexpr (std::is_same_v<T, TriangularSpec>) return triangular_at(s, step);
            else if constexpr (std::is_same_v<T, CosineRestartsSpec>) return cosine_at(s, step);
            else return SchedulePoint{s.lr, std::nullopt};
        },
        spec);
}

// ---------------------------------------------------------------------------
// LR range test

LRFinderResult run_lr_range_test(const std::function<double(double)>& train_step,
                                 const LrFindOptions& opts) {
    if (!(opts.lr_start < opts.lr_end)) throw DataError("lr_find: lr_start must be < lr_end");
    if (opts.max_iters < 10) throw DataError("lr_find: max_iters must be >= 10");

    LRFinderResult r;
    double ratio = opts.lr_end / opts.lr_start;
    double ema = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < opts.max_iters; ++i) {
        double lr = opts.lr_start *
                    std::pow(ratio, static_cast<double>(i) /
                                        static_cast<double>(opts.max_iters - 1));
        double loss = train_step(lr);
        if (!std::isfinite(loss)) {
            if (i == 0)
                throw DivergenceError("lr_find: loss not finite at the first step: "
                                      "lr_start too high or data degenerate");
            break;  // treat as divergence
        }
        ema = opts.ema_beta * ema + (1.0 - opts.ema_beta) * loss;
        double smoothed = ema / (1.0 - std::pow(opts.ema_beta, static_cast<double>(i + 1)));
        r.lrs.push_back(lr);
        r.raw_losses.push_back(loss);
        r.smoothed_losses.push_back(smoothed);
        best = std::min(best, smoothed);
        if (smoothed > opts.divergence_factor * best) break;
    }
    r.stop_step = r.lrs.size();

    // Steepest negative slope of the smoothed curve; fall back to the lr at
    // the smoothed minimum divided by 10.
    double best_slope = 0.0;
    std::size_t best_i = 0;
    bool found = false;
    for (std::size_t i = 0; i + 1 < r.smoothed_losses.size(); ++i) {
        double slope = r.smoothed_losses[i + 1] - r.smoothed_losses[i];
        if (slope < best_slope) {
            best_slope = slope;
            best_i = i;
            found = true;
        }
    }
    if (found) {
        r.suggestion = r.lrs[best_i];
    } else {
        std::size_t arg_min = 0;
        for (std::size_t i = 1; i < r.smoothed_losses.size(); ++i)
            if (r.smoothed_losses[i] < r.smoothed_losses[arg_min]) arg_min = i;
        r.suggestion = r.lrs.empty() ? opts.lr_start : r.lrs[arg_min] / 10.0;
    }
    return r;
}

namespace {

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string lr_curve_csv(const LRFinderResult& r) {
    std::ostringstream out;
    out << "step,lr,raw_loss,smoothed_loss\n";
    for (std::size_t i = 0; i < r.lrs.size(); ++i)
        out << i << ',' << fmt_g17(r.lrs[i]) << ',' << fmt_g17(r.raw_losses[i]) << ','
            << fmt_g17(r.smoothed_losses[i]) << '\n';
    out << "# suggestion=" << fmt_g17(r.suggestion) << '\n';
    return out.str();
}

void write_lr_curve_csv(const LRFinderResult& r, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    f << lr_curve_csv(r);
}

std::string lr_curve_svg(const LRFinderResult& r) {
    const double width = 640, height = 400, margin = 50;
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (r.lrs.size() >= 2) {
        double x_lo = std::log10(r.lrs.front()), x_hi = std::log10(r.lrs.back());
        double y_lo = r.smoothed_losses.front(), y_hi = y_lo;
        for (double v : r.smoothed_losses) {
            y_lo = std::min(y_lo, v);
            y_hi = std::max(y_hi, v);
        }
        if (y_hi == y_lo) y_hi = y_lo + 1.0;
        auto px = [&](double lx) {
            return margin + (lx - x_lo) / (x_hi - x_lo) * (width - 2 * margin);
        };
        auto py = [&](double v) {
            return height - margin - (v - y_lo) / (y_hi - y_lo) * (height - 2 * margin);
        };
        out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < r.lrs.size(); ++i) {
            if (i) out << ' ';
            out << px(std::log10(r.lrs[i])) << ',' << py(r.smoothed_losses[i]);
        }
        out << "\"/>\n";
        double sx = px(std::log10(r.suggestion));
        out << "<line x1=\"" << sx << "\" y1=\"" << margin << "\" x2=\"" << sx << "\" y2=\""
            << height - margin << "\" stroke=\"crimson\" stroke-dasharray=\"4 3\"/>\n";
        out << "<text x=\"" << margin << "\" y=\"" << margin - 12
            << "\" font-family=\"sans-serif\" font-size=\"13\">smoothed loss vs log10(lr); "
               "suggestion=" << fmt_g17(r.suggestion) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

void write_lr_curve_svg(const LRFinderResult& r, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    f << lr_curve_svg(r);
}

}  // namespace lowml

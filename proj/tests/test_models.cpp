#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"

#include "lowml/corpus.hpp"
#include "lowml/errors.hpp"
#include "lowml/models.hpp"
#include "lowml/rng.hpp"

using namespace lowml;

namespace {

SparseMatrix dense_rows(const std::vector<std::vector<double>>& rows) {
    SparseMatrix m;
    m.n_cols = rows.empty() ? 0 : rows[0].size();
    for (const auto& r : rows) {
        SparseVector v;
        for (std::size_t j = 0; j < r.size(); ++j)
            if (r[j] != 0.0) v.emplace_back(static_cast<std::uint32_t>(j), r[j]);
        m.append_row(v);
    }
    return m;
}

Tensor target_rows(const std::vector<std::vector<double>>& rows) {
    Tensor t = Tensor::zeros({rows.size(), rows[0].size()});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) t(i, j) = rows[i][j];
    return t;
}

// Central finite differences on the batch loss; the independent gradient
// oracle for the analytic backward pass.
double fd_rel_err(const ModelSpec& spec, Params params, const SparseMatrix& x,
                  const Tensor& t) {
    const double h = 1e-4;
    LossGrad lg = loss_and_grad(params, spec, x, t);
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t k = 0; k < params[p].t.size(); ++k) {
            double saved = params[p].t.v[k];
            params[p].t.v[k] = saved + h;
            double up = loss_and_grad(params, spec, x, t).loss;
            params[p].t.v[k] = saved - h;
            double down = loss_and_grad(params, spec, x, t).loss;
            params[p].t.v[k] = saved;
            double fd = (up - down) / (2.0 * h);
            double ga = lg.grads[p].v[k];
            double denom = std::max({std::abs(fd), std::abs(ga), 1e-6});
            worst = std::max(worst, std::abs(fd - ga) / denom);
        }
    }
    return worst;
}

struct RandomInstance {
    ModelSpec spec;
    Params params;
    SparseMatrix x;
    Tensor t;
};

RandomInstance random_instance(ModelKind kind, Head head, std::uint64_t seed) {
    Rng rng(seed);
    std::size_t v = 2 + rng.below(9);  // <= 10
    std::size_t n = 1 + rng.below(8);  // <= 8
    std::size_t k = kind == ModelKind::Nbsvm ? 2 : 2 + rng.below(3);
    RandomInstance inst;
    inst.spec.kind = kind;
    inst.spec.head = head;
    inst.spec.input_dim = v;
    inst.spec.output_dim = k;
    inst.spec.hidden_dim = 3;
    inst.params = build_model(inst.spec, seed);
    // Make the init nontrivial so gradients are not at a symmetric point.
    for (auto& nt : inst.params)
        for (auto& x2 : nt.t.v) x2 += rng.uniform(-0.5, 0.5);

    std::vector<std::vector<double>> rows(n, std::vector<double>(v, 0.0));
    for (auto& r : rows)
        for (auto& x2 : r)
            if (rng.uniform() < 0.6) x2 = rng.uniform(-1.0, 1.0);
    inst.x = dense_rows(rows);

    inst.t = Tensor::zeros({n, k});
    for (std::size_t i = 0; i < n; ++i) {
        if (head == Head::Softmax) {
            inst.t(i, rng.below(k)) = 1.0;
        } else if (head == Head::Sigmoid) {
            for (std::size_t c = 0; c < k; ++c) inst.t(i, c) = rng.uniform() < 0.5 ? 1.0 : 0.0;
        } else {
            for (std::size_t c = 0; c < k; ++c) inst.t(i, c) = rng.uniform(-2.0, 2.0);
        }
    }
    return inst;
}

}  // namespace

TEST_CASE("build_model: deterministic glorot init, zero biases") {
    ModelSpec spec{ModelKind::Linear, 3, 2, 64, Head::Softmax, false};
    Params a = build_model(spec, 7);
    Params b = build_model(spec, 7);
    REQUIRE(a.size() == 2);
    CHECK(a[0].name == "W");
    CHECK(a[0].t.shape == std::vector<std::size_t>{2, 3});
    CHECK(a[1].t.shape == std::vector<std::size_t>{2});
    CHECK(a[1].t.v == std::vector<double>{0.0, 0.0});
    CHECK(a[0].t.v == b[0].t.v);
    double limit = std::sqrt(6.0 / 5.0);
    for (double w : a[0].t.v) CHECK(std::abs(w) <= limit);
    Params c = build_model(spec, 8);
    CHECK(a[0].t.v != c[0].t.v);
}

TEST_CASE("build_model: mlp shapes") {
    ModelSpec spec{ModelKind::Mlp, 4, 3, 2, Head::Softmax, false};
    Params p = build_model(spec, 1);
    REQUIRE(p.size() == 4);
    CHECK(p[0].t.shape == std::vector<std::size_t>{2, 4});
    CHECK(p[1].t.shape == std::vector<std::size_t>{2});
    CHECK(p[2].t.shape == std::vector<std::size_t>{3, 2});
    CHECK(p[3].t.shape == std::vector<std::size_t>{3});
}

TEST_CASE("build_model: nbsvm requires binary softmax") {
    ModelSpec spec{ModelKind::Nbsvm, 4, 3, 64, Head::Softmax, false};
    CHECK_THROWS_AS(build_model(spec, 1), DataError);
    spec.output_dim = 2;
    spec.head = Head::Identity;
    CHECK_THROWS_AS(build_model(spec, 1), DataError);
    spec.head = Head::Softmax;
    CHECK_NOTHROW(build_model(spec, 1));
}

TEST_CASE("nbsvm_ratios matches the hand-computed two-document oracle") {
    // vocab {good, bad}; positive doc counts (2,0), negative doc (0,1).
    Dataset d;
    d.features = dense_rows({{2, 0}, {0, 1}});
    d.targets = target_rows({{0, 1}, {1, 0}});
    d.sources = {"0", "1"};
    NbsvmState nb = nbsvm_ratios(d, 1.0);
    // p=(3,1), q=(1,2): r_good = ln 2.25, r_bad = ln 0.375 (oracle values).
    CHECK(nb.r[0] == doctest::Approx(0.8109302162163288).epsilon(1e-15));
    CHECK(nb.r[1] == doctest::Approx(-0.9808292530117262).epsilon(1e-15));
}

TEST_CASE("nbsvm_ratios: balanced feature has exactly zero ratio") {
    Dataset d;
    d.features = dense_rows({{1, 1}, {1, 1}});
    d.targets = target_rows({{0, 1}, {1, 0}});
    d.sources = {"0", "1"};
    NbsvmState nb = nbsvm_ratios(d, 1.0);
    CHECK(nb.r[0] == 0.0);
    CHECK(nb.r[1] == 0.0);
}

TEST_CASE("nbsvm_ratios: huge alpha flattens the ratios") {
    Dataset d;
    d.features = dense_rows({{2, 0}, {0, 1}});
    d.targets = target_rows({{0, 1}, {1, 0}});
    d.sources = {"0", "1"};
    NbsvmState nb = nbsvm_ratios(d, 1e6);
    for (double r : nb.r) CHECK(std::abs(r) < 1e-5);
}

TEST_CASE("nbsvm_ratios: class with zero examples errors") {
    Dataset d;
    d.features = dense_rows({{1, 0}, {0, 1}});
    d.targets = target_rows({{0, 1}, {0, 1}});
    d.sources = {"0", "1"};
    CHECK_THROWS_WITH_AS(nbsvm_ratios(d, 1.0), doctest::Contains("zero examples"), DataError);
}

TEST_CASE("nbsvm ratio antisymmetry under label swap") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        std::size_t n = 4 + rng.below(6), v = 3 + rng.below(5);
        std::vector<std::vector<double>> feats(n, std::vector<double>(v, 0.0));
        for (auto& r : feats)
            for (auto& x : r)
                if (rng.uniform() < 0.5) x = 1.0 + std::floor(rng.uniform() * 3.0);
        Dataset d;
        d.features = dense_rows(feats);
        d.targets = Tensor::zeros({n, 2});
        for (std::size_t i = 0; i < n; ++i) d.targets(i, i < n / 2 ? 0 : 1) = 1.0;
        Dataset swapped = d;
        for (std::size_t i = 0; i < n; ++i) {
            swapped.targets(i, 0) = d.targets(i, 1);
            swapped.targets(i, 1) = d.targets(i, 0);
        }
        NbsvmState a = nbsvm_ratios(d, 1.0);
        NbsvmState b = nbsvm_ratios(swapped, 1.0);
        for (std::size_t j = 0; j < v; ++j)
            CHECK(std::abs(a.r[j] + b.r[j]) <= 1e-12 * std::max(1.0, std::abs(a.r[j])));
    }
}

TEST_CASE("nbsvm scaling binarizes before applying ratios") {
    NbsvmState nb;
    nb.r = {0.5, -0.25, 2.0};
    SparseVector x{{0, 3.7}, {2, 0.1}};
    auto s = nbsvm_scale(x, nb);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == std::pair<std::uint32_t, double>{0, 0.5});
    CHECK(s[1] == std::pair<std::uint32_t, double>{2, 2.0});
}

TEST_CASE("forward: zero params give zero logits; rows map through") {
    ModelSpec spec{ModelKind::Linear, 3, 2, 64, Head::Softmax, false};
    Params p;
    p.push_back({"W", Tensor::zeros({2, 3})});
    p.push_back({"b", Tensor::zeros({2})});
    auto x = dense_rows({{1, 2, 3}, {0, 1, 0}});
    Tensor z = forward(p, spec, x);
    CHECK(z.rows() == 2);
    for (double v : z.v) CHECK(v == 0.0);

    // Identity-like rows select matching weight entries.
    p[0].t(0, 0) = 1.0;
    p[0].t(1, 1) = 1.0;
    Tensor z2 = forward(p, spec, dense_rows({{0, 1, 0}}));
    CHECK(z2(0, 0) == 0.0);
    CHECK(z2(0, 1) == 1.0);
}

TEST_CASE("forward rejects dimension mismatches") {
    ModelSpec spec{ModelKind::Linear, 3, 2, 64, Head::Softmax, false};
    Params p = build_model(spec, 1);
    CHECK_THROWS_AS(forward(p, spec, dense_rows({{1, 2}})), DataError);
}

TEST_CASE("softmax cross-entropy of uniform logits is ln K") {
    ModelSpec spec{ModelKind::Linear, 2, 4, 64, Head::Softmax, false};
    Params p;
    p.push_back({"W", Tensor::zeros({4, 2})});
    p.push_back({"b", Tensor::zeros({4})});
    auto x = dense_rows({{1, 1}});
    Tensor t = target_rows({{0, 0, 1, 0}});
    LossGrad lg = loss_and_grad(p, spec, x, t);
    CHECK(lg.loss == doctest::Approx(std::log(4.0)).epsilon(1e-15));
}

TEST_CASE("regression at the optimum has zero loss and gradients") {
    ModelSpec spec{ModelKind::Linear, 2, 1, 64, Head::Identity, false};
    Params p;
    p.push_back({"W", Tensor::zeros({1, 2})});
    p.push_back({"b", Tensor::zeros({1})});
    auto x = dense_rows({{1, 2}, {3, 4}});
    Tensor t = target_rows({{0}, {0}});
    LossGrad lg = loss_and_grad(p, spec, x, t);
    CHECK(lg.loss == 0.0);
    for (const auto& g : lg.grads)
        for (double v : g.v) CHECK(v == 0.0);
}

TEST_CASE("analytic gradients match central finite differences") {
    struct Combo {
        ModelKind kind;
        Head head;
    };
    std::vector<Combo> combos{
        {ModelKind::Linear, Head::Softmax},  {ModelKind::Linear, Head::Sigmoid},
        {ModelKind::Linear, Head::Identity}, {ModelKind::Nbsvm, Head::Softmax},
        {ModelKind::Mlp, Head::Softmax},     {ModelKind::Mlp, Head::Sigmoid},
        {ModelKind::Mlp, Head::Identity},
    };
    for (const auto& combo : combos) {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            auto inst = random_instance(combo.kind, combo.head, seed * 977);
            double err = fd_rel_err(inst.spec, inst.params, inst.x, inst.t);
            CAPTURE(static_cast<int>(combo.kind));
            CAPTURE(static_cast<int>(combo.head));
            CAPTURE(seed);
            CHECK(err <= 1e-4);
        }
    }
}

TEST_CASE("predict_proba: softmax normalization and stability") {
    ModelSpec spec{ModelKind::Linear, 1, 2, 64, Head::Softmax, false};
    Params p;
    p.push_back({"W", Tensor::zeros({2, 1})});
    p.push_back({"b", Tensor::zeros({2})});
    auto x = dense_rows({{0}});
    Tensor proba = predict_proba(p, spec, x);
    CHECK(proba(0, 0) == 0.5);
    CHECK(proba(0, 1) == 0.5);

    // Extreme logits: no overflow.
    p[1].t(0) = 1000.0;
    Tensor big = predict_proba(p, spec, x);
    CHECK(std::isfinite(big(0, 0)));
    CHECK(big(0, 0) == doctest::Approx(1.0));
    CHECK(big(0, 1) == doctest::Approx(0.0));

    // Row sums over random logits.
    Rng rng(3);
    Tensor z = Tensor::zeros({5, 7});
    for (auto& v : z.v) v = rng.uniform(-30.0, 30.0);
    Tensor sm = softmax_rows(z);
    for (std::size_t i = 0; i < 5; ++i) {
        double s = 0;
        for (std::size_t k = 0; k < 7; ++k) s += sm(i, k);
        CHECK(std::abs(s - 1.0) <= 1e-6);
    }
}

TEST_CASE("softmax is invariant to constant logit shifts") {
    Rng rng(11);
    Tensor z = Tensor::zeros({4, 5});
    for (auto& v : z.v) v = rng.uniform(-5.0, 5.0);
    Tensor shifted = z;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 5; ++k) shifted(i, k) += 17.25;
    Tensor a = softmax_rows(z);
    Tensor b = softmax_rows(shifted);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.v[i] - b.v[i]) <= 1e-9);
}

TEST_CASE("linear losses are convex in the parameters") {
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        for (Head head : {Head::Softmax, Head::Sigmoid, Head::Identity}) {
            auto inst = random_instance(ModelKind::Linear, head, seed * 131);
            Params p2 = build_model(inst.spec, seed * 131 + 1);
            for (auto& nt : p2)
                for (auto& v : nt.t.v) v += 0.3;
            Params mid = inst.params;
            for (std::size_t i = 0; i < mid.size(); ++i)
                for (std::size_t k = 0; k < mid[i].t.size(); ++k)
                    mid[i].t.v[k] = 0.5 * (inst.params[i].t.v[k] + p2[i].t.v[k]);
            double la = loss_and_grad(inst.params, inst.spec, inst.x, inst.t).loss;
            double lb = loss_and_grad(p2, inst.spec, inst.x, inst.t).loss;
            double lm = loss_and_grad(mid, inst.spec, inst.x, inst.t).loss;
            CHECK(lm <= 0.5 * (la + lb) + 1e-12);
        }
    }
}

TEST_CASE("nbsvm weight interpolation pulls toward the mean magnitude") {
    Tensor w = Tensor::zeros({1, 4});
    w(0, 0) = 2.0;
    w(0, 1) = -1.0;
    w(0, 2) = 0.5;
    w(0, 3) = 0.0;
    nbsvm_interpolate(w, 0.25);
    double mean_abs = (2.0 + 1.0 + 0.5 + 0.0) / 4.0;  // 0.875
    CHECK(w(0, 0) == doctest::Approx(0.25 * 2.0 + 0.75 * mean_abs).epsilon(1e-15));
    CHECK(w(0, 1) == doctest::Approx(0.25 * -1.0 - 0.75 * mean_abs).epsilon(1e-15));
    CHECK(w(0, 2) == doctest::Approx(0.25 * 0.5 + 0.75 * mean_abs).epsilon(1e-15));
    CHECK(w(0, 3) == 0.0);  // sign(0) = 0
}

TEST_CASE("training defaults per model kind") {
    CHECK(training_defaults(ModelKind::Linear).lr == 0.25);
    CHECK(training_defaults(ModelKind::Nbsvm).use_adamw == false);
    CHECK(training_defaults(ModelKind::Mlp).lr == 1e-3);
    CHECK(training_defaults(ModelKind::Mlp).use_adamw == true);
}

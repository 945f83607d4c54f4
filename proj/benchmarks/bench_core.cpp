#include <benchmark/benchmark.h>

#include <filesystem>
#include <string>
#include <vector>

#include "lowml/corpus.hpp"
#include "lowml/models.hpp"
#include "lowml/optim.hpp"
#include "lowml/qa.hpp"
#include "lowml/rng.hpp"
#include "lowml/topic.hpp"

using namespace lowml;

namespace {

SparseMatrix random_sparse(Rng& rng, std::size_t n, std::size_t v, double density) {
    SparseMatrix m;
    m.n_cols = v;
    for (std::size_t i = 0; i < n; ++i) {
        SparseVector row;
        for (std::size_t j = 0; j < v; ++j)
            if (rng.uniform() < density) row.emplace_back(static_cast<std::uint32_t>(j),
                                                          rng.uniform(0.1, 1.0));
        m.append_row(row);
    }
    return m;
}

std::vector<std::string> synthetic_docs(std::size_t n, std::size_t vocab, std::size_t len) {
    Rng rng(7);
    std::vector<std::string> docs;
    docs.reserve(n);
    for (std::size_t d = 0; d < n; ++d) {
        std::string doc;
        for (std::size_t i = 0; i < len; ++i)
            doc += "w" + std::to_string(rng.below(vocab)) + " ";
        docs.push_back(doc);
    }
    return docs;
}

}  // namespace

static void BM_AdamwStep(benchmark::State& state) {
    std::size_t dim = static_cast<std::size_t>(state.range(0));
    Params p;
    p.push_back({"W", Tensor::zeros({dim})});
    Rng rng(1);
    for (auto& v : p[0].t.v) v = rng.uniform(-1, 1);
    Grads g;
    g.push_back(Tensor::zeros({dim}));
    for (auto& v : g[0].v) v = rng.uniform(-1, 1);
    AdamWState st = AdamWState::init(p, 0.01);
    for (auto _ : state) {
        adamw_step(p, g, st, 1e-3);
        benchmark::DoNotOptimize(p[0].t.v.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(dim));
}
BENCHMARK(BM_AdamwStep)->Arg(1000)->Arg(100000);

static void BM_LinearLossGrad(benchmark::State& state) {
    Rng rng(2);
    std::size_t n = 64, v = 10000, k = 4;
    SparseMatrix batch = random_sparse(rng, n, v, 0.01);
    ModelSpec spec{ModelKind::Linear, v, k, 64, Head::Softmax, false};
    Params p = build_model(spec, 3);
    Tensor t = Tensor::zeros({n, k});
    for (std::size_t i = 0; i < n; ++i) t(i, rng.below(k)) = 1.0;
    for (auto _ : state) {
        auto lg = loss_and_grad(p, spec, batch, t);
        benchmark::DoNotOptimize(lg.loss);
    }
}
BENCHMARK(BM_LinearLossGrad);

static void BM_TransformText(benchmark::State& state) {
    auto docs = synthetic_docs(200, 5000, 120);
    TextPreprocessor preproc =
        fit_text_preprocessor(docs, TokenizerMode::Word, {512, 1, 2, 10000, 2});
    std::size_t i = 0;
    for (auto _ : state) {
        auto v = preproc.transform(docs[i++ % docs.size()]);
        benchmark::DoNotOptimize(v.data());
    }
}
BENCHMARK(BM_TransformText);

static void BM_Bm25Search(benchmark::State& state) {
    namespace fs = std::filesystem;
    fs::path path = fs::temp_directory_path() / "lowml_bench_idx";
    fs::remove_all(path);
    qa::SearchIndex::initialize(path.string());
    auto idx = qa::index_from_list(synthetic_docs(2000, 20000, 150), path.string());
    std::size_t q = 0;
    for (auto _ : state) {
        auto hits = idx.search("w17 w420 w99 w" + std::to_string(q++ % 20000), 10);
        benchmark::DoNotOptimize(hits.data());
    }
    fs::remove_all(path);
}
BENCHMARK(BM_Bm25Search);

static void BM_NmfIteration(benchmark::State& state) {
    Rng rng(5);
    SparseMatrix x = random_sparse(rng, 200, 2000, 0.02);
    topic::NmfOptions opts;
    opts.tol = 0.0;
    for (auto _ : state) {
        state.PauseTiming();
        opts.max_iters = 1;
        state.ResumeTiming();
        auto r = topic::nmf_factorize(x, 20, 1, opts);
        benchmark::DoNotOptimize(r.objective_log.data());
    }
}
BENCHMARK(BM_NmfIteration);

BENCHMARK_MAIN();

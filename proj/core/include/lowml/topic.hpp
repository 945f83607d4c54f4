#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lowml/corpus.hpp"
#include "lowml/sparse.hpp"
#include "lowml/tensor.hpp"

namespace lowml::topic {

inline constexpr std::uint32_t kTopicSchemaVersion = 1;

struct NmfOptions {
    std::size_t max_iters = 200;
    double tol = 1e-4;  // relative objective change
};

struct TopicModelOptions {
    std::size_t n_features = 10000;
    std::size_t n_topics = 20;
    std::uint64_t seed = 42;
    NmfOptions nmf;
    FeaturizerOptions featurizer{/*maxlen=*/0, /*ngram_lo=*/1, /*ngram_hi=*/1,
                                 /*max_features=*/10000, /*min_df=*/2};
};

// TF-IDF + NMF (Frobenius multiplicative updates). W: docs x topics,
// H: topics x terms, both nonnegative; the objective log is nonincreasing.
class TopicModel {
public:
    static TopicModel fit(const std::vector<std::string>& docs,
                          const TopicModelOptions& opts);

    // Keeps doc i iff max of its sum-normalized W row >= threshold.
    // `references` must align with the fitted corpus (defaults to row
    // indices as strings).
    void build(double threshold = 0.25,
               const std::vector<std::string>& references = {});

    void train_recommender();

    struct Recommendation {
        std::string reference;
        double similarity = 0.0;
        std::size_t doc_id = 0;
    };

    struct RecommendResult {
        std::vector<Recommendation> items;
        std::string status;  // "ok" | "no thematic signal"
    };

    // text -> tfidf -> nonnegative projection against H -> cosine over the
    // stored kept vectors.
    RecommendResult recommend(const std::string& text, std::size_t n = 5) const;

    // Topic proportions (sum-1) for arbitrary text via multiplicative
    // H-fixed updates on a fresh nonnegative row.
    std::vector<double> project(const std::string& text) const;

    const Tensor& w() const { return w_; }
    const Tensor& h() const { return h_; }
    std::size_t n_topics() const { return n_topics_; }
    const std::vector<double>& objective_log() const { return objective_log_; }
    const TextPreprocessor& preproc() const { return preproc_; }
    const std::vector<std::size_t>& kept_doc_ids() const { return kept_ids_; }
    bool built() const { return built_; }
    bool recommender_trained() const { return recommender_trained_; }
    double threshold() const { return threshold_; }
    std::uint64_t seed() const { return seed_; }

    // topic_meta.json + weights.bin (same binary header convention as the
    // predictor bundle) + checksum.
    void save(const std::string& dir) const;
    static TopicModel load(const std::string& dir);

private:
    TopicModel() = default;

    TextPreprocessor preproc_;
    SparseMatrix x_;  // fitted tf-idf corpus
    Tensor w_;        // docs x topics
    Tensor h_;        // topics x terms
    std::size_t n_topics_ = 0;
    std::uint64_t seed_ = 42;
    std::size_t query_iters_ = 50;
    std::vector<double> objective_log_;

    bool built_ = false;
    double threshold_ = 0.25;
    std::vector<std::string> references_;
    std::vector<std::size_t> kept_ids_;
    std::vector<std::vector<double>> kept_props_;  // sum-1 rows

    bool recommender_trained_ = false;
    std::vector<std::vector<double>> kept_unit_;   // L2-normalized
};

// ||X - WH||_F^2 for sparse X and dense factors.
double nmf_objective(const SparseMatrix& x, const Tensor& w, const Tensor& h);

struct NmfResult {
    Tensor w;  // n x k, nonnegative
    Tensor h;  // k x m, nonnegative
    std::vector<double> objective_log;  // initial value, then one per iteration
};

// Frobenius NMF by multiplicative updates; deterministic in `seed`. The
// objective log is nonincreasing and nonnegativity is preserved exactly.
NmfResult nmf_factorize(const SparseMatrix& x, std::size_t n_topics, std::uint64_t seed,
                        const NmfOptions& opts);

}  // namespace lowml::topic

#include "lowml/topic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include <nlohmann/json.hpp>

#include "lowml/errors.hpp"
#include "lowml/rng.hpp"
#include "weights_io.hpp"

namespace fs = std::filesystem;

namespace lowml::topic {

namespace {

constexpr double kDenomGuard = 1e-12;

const char* kMetaFile = "topic_meta.json";
const char* kWeightsFile = "weights.bin";
const char* kChecksumFile = "checksum";

// k x k Gram matrix A^T A for a (rows x k) factor, or A A^T for (k x cols).
Tensor gram_rows(const Tensor& a) {  // a: n x k -> a^T a (k x k)
    std::size_t n = a.rows(), k = a.cols();
    Tensor g = Tensor::zeros({k, k});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < k; ++t) {
            double v = a(i, t);
            if (v == 0.0) continue;
            for (std::size_t u = 0; u < k; ++u) g(t, u) += v * a(i, u);
        }
    return g;
}

Tensor gram_cols(const Tensor& h) {  // h: k x m -> h h^T (k x k)
    std::size_t k = h.rows(), m = h.cols();
    Tensor g = Tensor::zeros({k, k});
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t t = 0; t < k; ++t) {
            double v = h(t, j);
            if (v == 0.0) continue;
            for (std::size_t u = 0; u < k; ++u) g(t, u) += v * h(u, j);
        }
    return g;
}

}  // namespace

double nmf_objective(const SparseMatrix& x, const Tensor& w, const Tensor& h) {
    std::size_t k = w.cols();
    double x_sq = 0.0;
    for (double v : x.val) x_sq += v * v;
    double cross = 0.0;
    for (std::size_t i = 0; i < x.n_rows; ++i)
        for (std::size_t p = x.row_begin(i); p < x.row_end(i); ++p) {
            std::uint32_t j = x.col[p];
            double wh = 0.0;
            for (std::size_t t = 0; t < k; ++t) wh += w(i, t) * h(t, j);
            cross += x.val[p] * wh;
        }
    Tensor wtw = gram_rows(w);
    Tensor hht = gram_cols(h);
    double wh_sq = 0.0;
    for (std::size_t t = 0; t < k; ++t)
        for (std::size_t u = 0; u < k; ++u) wh_sq += wtw(t, u) * hht(t, u);
    return x_sq - 2.0 * cross + wh_sq;
}

TopicModel TopicModel::fit(const std::vector<std::string>& docs,
                           const TopicModelOptions& opts) {
    if (opts.n_topics < 2) throw DataError("get_topic_model: n_topics must be >= 2");
    if (docs.size() < opts.n_topics)
        throw DataError("get_topic_model: fewer documents (" + std::to_string(docs.size()) +
                        ") than topics (" + std::to_string(opts.n_topics) + ")");

    TopicModel tm;
    tm.n_topics_ = opts.n_topics;
    tm.seed_ = opts.seed;

    FeaturizerOptions fopts = opts.featurizer;
    fopts.max_features = opts.n_features;
    tm.preproc_ = fit_text_preprocessor(docs, TokenizerMode::Word, fopts);
    if (tm.preproc_.n_features() == 0)
        throw DataError("get_topic_model: empty vocabulary (documents too small/distinct?)");

    tm.x_.n_cols = tm.preproc_.n_features();
    for (const auto& d : docs) tm.x_.append_row(tm.preproc_.transform(d));

    NmfResult nmf = nmf_factorize(tm.x_, opts.n_topics, opts.seed, opts.nmf);
    tm.w_ = std::move(nmf.w);
    tm.h_ = std::move(nmf.h);
    tm.objective_log_ = std::move(nmf.objective_log);
    return tm;
}

NmfResult nmf_factorize(const SparseMatrix& x, std::size_t n_topics, std::uint64_t seed,
                        const NmfOptions& opts) {
    std::size_t n = x.n_rows, v = x.n_cols, k = n_topics;
    if (n == 0 || v == 0 || k == 0) throw DataError("nmf_factorize: empty problem");
    double x_sum = std::accumulate(x.val.begin(), x.val.end(), 0.0);
    double scale = std::sqrt((x_sum / (static_cast<double>(n) * static_cast<double>(v))) /
                             static_cast<double>(k));
    if (!(scale > 0.0)) scale = 1e-3;

    Rng rng(seed);
    NmfResult r;
    r.w = Tensor::zeros({n, k});
    for (auto& e : r.w.v) e = rng.uniform() * scale;
    r.h = Tensor::zeros({k, v});
    for (auto& e : r.h.v) e = rng.uniform() * scale;

    r.objective_log.push_back(nmf_objective(x, r.w, r.h));
    for (std::size_t iter = 0; iter < opts.max_iters; ++iter) {
        // W <- W .* (X H^T) ./ (W (H H^T) + eps)
        {
            Tensor hht = gram_cols(r.h);
            Tensor num = Tensor::zeros({n, k});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = x.row_begin(i); p < x.row_end(i); ++p) {
                    std::uint32_t j = x.col[p];
                    double xv = x.val[p];
                    for (std::size_t t = 0; t < k; ++t) num(i, t) += xv * r.h(t, j);
                }
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t t = 0; t < k; ++t) {
                    double den = kDenomGuard;
                    for (std::size_t u = 0; u < k; ++u) den += r.w(i, u) * hht(u, t);
                    r.w(i, t) *= num(i, t) / den;
                }
        }
        // H <- H .* (W^T X) ./ ((W^T W) H + eps)
        {
            Tensor wtw = gram_rows(r.w);
            Tensor num = Tensor::zeros({k, v});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = x.row_begin(i); p < x.row_end(i); ++p) {
                    std::uint32_t j = x.col[p];
                    double xv = x.val[p];
                    for (std::size_t t = 0; t < k; ++t) num(t, j) += r.w(i, t) * xv;
                }
            for (std::size_t j = 0; j < v; ++j)
                for (std::size_t t = 0; t < k; ++t) {
                    double den = kDenomGuard;
                    for (std::size_t u = 0; u < k; ++u) den += wtw(t, u) * r.h(u, j);
                    r.h(t, j) *= num(t, j) / den;
                }
        }
        double obj = nmf_objective(x, r.w, r.h);
        double prev = r.objective_log.back();
        r.objective_log.push_back(obj);
        if (prev > 0.0 && (prev - obj) / prev < opts.tol) break;
    }
    return r;
}

namespace {

// Sum-normalized row; all-zero rows stay zero.
std::vector<double> proportions(const Tensor& w, std::size_t row) {
    std::size_t k = w.cols();
    std::vector<double> p(k, 0.0);
    double s = 0.0;
    for (std::size_t t = 0; t < k; ++t) s += w(row, t);
    if (s > 0.0)
        for (std::size_t t = 0; t < k; ++t) p[t] = w(row, t) / s;
    return p;
}

std::vector<double> unit(const std::vector<double>& v) {
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    std::vector<double> out(v.size(), 0.0);
    if (n2 > 0.0) {
        double inv = 1.0 / std::sqrt(n2);
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
    }
    return out;
}

}  // namespace

void TopicModel::build(double threshold, const std::vector<std::string>& references) {
    if (w_.size() == 0) throw DataError("build: model not fitted");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw DataError("build: threshold must be in (0, 1)");
    std::size_t n = w_.rows();
    if (!references.empty() && references.size() != n)
        throw DataError("build: references length != fitted document count");

    threshold_ = threshold;
    references_.clear();
    if (references.empty())
        for (std::size_t i = 0; i < n; ++i) references_.push_back(std::to_string(i));
    else
        references_ = references;

    kept_ids_.clear();
    kept_props_.clear();
    for (std::size_t i = 0; i < n; ++i) {
        auto p = proportions(w_, i);
        double mx = p.empty() ? 0.0 : *std::max_element(p.begin(), p.end());
        if (mx >= threshold) {
            kept_ids_.push_back(i);
            kept_props_.push_back(std::move(p));
        }
    }
    built_ = true;
    recommender_trained_ = false;
    kept_unit_.clear();
}

void TopicModel::train_recommender() {
    if (!built_) throw DataError("train_recommender: run build first");
    if (kept_ids_.empty()) throw DataError("train_recommender: nothing to recommend "
                                           "(no documents cleared the threshold)");
    kept_unit_.clear();
    kept_unit_.reserve(kept_props_.size());
    for (const auto& p : kept_props_) kept_unit_.push_back(unit(p));
    recommender_trained_ = true;
}

std::vector<double> TopicModel::project(const std::string& text) const {
    std::size_t k = n_topics_;
    SparseVector x = preproc_.transform(text);
    if (x.empty()) return std::vector<double>(k, 0.0);

    Tensor hht = gram_cols(h_);
    std::vector<double> num(k, 0.0);
    for (const auto& [j, xv] : x)
        for (std::size_t t = 0; t < k; ++t) num[t] += xv * h_(t, j);

    std::vector<double> w(k, 1.0);
    for (std::size_t iter = 0; iter < query_iters_; ++iter) {
        for (std::size_t t = 0; t < k; ++t) {
            double den = kDenomGuard;
            for (std::size_t u = 0; u < k; ++u) den += w[u] * hht(u, t);
            w[t] *= num[t] / den;
        }
    }
    double s = std::accumulate(w.begin(), w.end(), 0.0);
    if (s > 0.0)
        for (auto& x2 : w) x2 /= s;
    else
        std::fill(w.begin(), w.end(), 0.0);
    return w;
}

TopicModel::RecommendResult TopicModel::recommend(const std::string& text,
                                                  std::size_t n) const {
    if (!recommender_trained_) throw DataError("recommend: train_recommender first");
    RecommendResult out;
    std::vector<double> props = project(text);
    std::vector<double> q = unit(props);
    bool zero = true;
    for (double x : q)
        if (x != 0.0) { zero = false; break; }
    if (zero) {
        out.status = "no thematic signal";
        return out;
    }
    std::vector<Recommendation> recs;
    recs.reserve(kept_unit_.size());
    for (std::size_t i = 0; i < kept_unit_.size(); ++i) {
        double sim = 0.0;
        for (std::size_t t = 0; t < q.size(); ++t) sim += q[t] * kept_unit_[i][t];
        recs.push_back({references_[kept_ids_[i]], sim, kept_ids_[i]});
    }
    std::sort(recs.begin(), recs.end(), [](const Recommendation& a, const Recommendation& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.doc_id < b.doc_id;
    });
    if (recs.size() > n) recs.resize(n);
    out.items = std::move(recs);
    out.status = "ok";
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

void TopicModel::save(const std::string& dir) const {
    fs::create_directories(dir);
    nlohmann::json meta;
    meta["schema_version"] = kTopicSchemaVersion;
    meta["n_topics"] = n_topics_;
    meta["seed"] = seed_;
    meta["query_iters"] = query_iters_;
    meta["built"] = built_;
    meta["threshold"] = threshold_;
    meta["recommender_trained"] = recommender_trained_;
    meta["references"] = references_;
    meta["vocab"] = preproc_.vocab;
    meta["idf"] = preproc_.idf;
    meta["tokenizer_mode"] = preproc_.mode == TokenizerMode::Word ? "word" : "char_ngram";
    meta["ngram"] = {preproc_.ngram_lo, preproc_.ngram_hi};
    meta["maxlen"] = preproc_.maxlen;
    meta["objective_log"] = objective_log_;

    std::vector<io::F32Tensor> payload;
    payload.push_back({"W", w_.shape, std::vector<float>(w_.v.begin(), w_.v.end())});
    payload.push_back({"H", h_.shape, std::vector<float>(h_.v.begin(), h_.v.end())});

    io::write_file((fs::path(dir) / kMetaFile).string(), meta.dump(2) + "\n");
    io::write_file((fs::path(dir) / kWeightsFile).string(),
                   io::encode_weights(payload, kTopicSchemaVersion));
    io::write_file((fs::path(dir) / kChecksumFile).string(),
                   io::checksum_lines(dir, {kMetaFile, kWeightsFile}));
}

TopicModel TopicModel::load(const std::string& dir) {
    for (const char* f : {kMetaFile, kWeightsFile})
        if (!fs::exists(fs::path(dir) / f))
            throw BundleMissingFileError("topic bundle missing file: " + std::string(f));
    io::verify_checksums(dir, kChecksumFile);

    nlohmann::json meta =
        nlohmann::json::parse(io::read_file((fs::path(dir) / kMetaFile).string()));
    std::uint32_t version = meta.at("schema_version").get<std::uint32_t>();
    if (version > kTopicSchemaVersion)
        throw BundleVersionError("topic schema_version " + std::to_string(version) +
                                 " unsupported (reader supports 1.." +
                                 std::to_string(kTopicSchemaVersion) + ")");

    TopicModel tm;
    tm.n_topics_ = meta.at("n_topics").get<std::size_t>();
    tm.seed_ = meta.at("seed").get<std::uint64_t>();
    tm.query_iters_ = meta.at("query_iters").get<std::size_t>();
    tm.objective_log_ = meta.at("objective_log").get<std::vector<double>>();

    tm.preproc_.mode = meta.at("tokenizer_mode").get<std::string>() == "word"
                           ? TokenizerMode::Word
                           : TokenizerMode::CharNgram;
    tm.preproc_.ngram_lo = meta.at("ngram")[0].get<int>();
    tm.preproc_.ngram_hi = meta.at("ngram")[1].get<int>();
    tm.preproc_.maxlen = meta.at("maxlen").get<std::size_t>();
    tm.preproc_.vocab = meta.at("vocab").get<std::vector<std::string>>();
    tm.preproc_.idf = meta.at("idf").get<std::vector<double>>();
    tm.preproc_.rebuild_index();

    auto payload = io::decode_weights(io::read_file((fs::path(dir) / kWeightsFile).string()),
                                      kTopicSchemaVersion);
    for (auto& t : payload) {
        Tensor dense;
        dense.shape = t.shape;
        dense.v.assign(t.data.begin(), t.data.end());
        if (t.name == "W") tm.w_ = std::move(dense);
        else if (t.name == "H") tm.h_ = std::move(dense);
    }
    if (tm.w_.size() == 0 || tm.h_.size() == 0)
        throw DataError("topic bundle: missing W/H tensors");

    if (meta.at("built").get<bool>()) {
        auto refs = meta.at("references").get<std::vector<std::string>>();
        tm.build(meta.at("threshold").get<double>(), refs);
        if (meta.at("recommender_trained").get<bool>()) tm.train_recommender();
    }
    return tm;
}

}  // namespace lowml::topic

#include "lowml/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lowml/errors.hpp"
#include "weights_io.hpp"

namespace fs = std::filesystem;

namespace lowml {

namespace {

TaskType task_of(Head head) {
    switch (head) {
        case Head::Softmax: return TaskType::Multiclass;
        case Head::Sigmoid: return TaskType::Multilabel;
        case Head::Identity: return TaskType::Regression;
    }
    return TaskType::Multiclass;
}

const char* kMetaFile = "meta.json";
const char* kVocabFile = "vocab.txt";
const char* kWeightsFile = "weights.bin";
const char* kChecksumFile = "checksum";

nlohmann::json text_preproc_json(const TextPreprocessor& p) {
    nlohmann::json j;
    j["kind"] = "text";
    j["tokenizer_mode"] = p.mode == TokenizerMode::Word ? "word" : "char_ngram";
    j["ngram"] = {p.ngram_lo, p.ngram_hi};
    j["maxlen"] = p.maxlen;
    j["encoding"] = p.encoding;
    j["cjk_threshold"] = p.cjk_threshold;
    j["split_seed"] = p.split_seed;
    j["idf"] = p.idf;
    return j;
}

nlohmann::json tabular_preproc_json(const TabularPreprocessor& p) {
    nlohmann::json j;
    j["kind"] = "tabular";
    j["header"] = p.header;
    j["label_columns"] = p.label_columns;
    j["input_columns"] = p.input_columns;
    j["dropped_columns"] = p.dropped_columns;
    j["missing_value_policy"] = p.missing_value_policy;
    j["split_seed"] = p.split_seed;
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : p.columns) {
        nlohmann::json cj;
        cj["name"] = c.name;
        cj["input_pos"] = c.input_pos;
        cj["kind"] = c.kind == ColumnKind::Numeric ? "numeric" : "categorical";
        if (c.kind == ColumnKind::Numeric) {
            cj["mean"] = c.mean;
            cj["std"] = c.stdev;
        } else {
            cj["categories"] = c.categories;
        }
        cj["offset"] = c.offset;
        cols.push_back(cj);
    }
    j["columns"] = cols;
    return j;
}

TextPreprocessor text_preproc_from_json(const nlohmann::json& j,
                                        std::vector<std::string> vocab) {
    TextPreprocessor p;
    p.mode = j.at("tokenizer_mode").get<std::string>() == "word" ? TokenizerMode::Word
                                                                 : TokenizerMode::CharNgram;
    p.ngram_lo = j.at("ngram")[0].get<int>();
    p.ngram_hi = j.at("ngram")[1].get<int>();
    p.maxlen = j.at("maxlen").get<std::size_t>();
    p.encoding = j.at("encoding").get<std::string>();
    p.cjk_threshold = j.at("cjk_threshold").get<double>();
    p.split_seed = j.at("split_seed").get<std::uint64_t>();
    p.idf = j.at("idf").get<std::vector<double>>();
    p.vocab = std::move(vocab);
    if (p.idf.size() != p.vocab.size())
        throw DataError("bundle: idf length != vocabulary size");
    p.rebuild_index();
    return p;
}

TabularPreprocessor tabular_preproc_from_json(const nlohmann::json& j,
                                              std::vector<std::string> feature_names) {
    TabularPreprocessor p;
    p.header = j.at("header").get<std::vector<std::string>>();
    p.label_columns = j.at("label_columns").get<std::vector<std::string>>();
    p.input_columns = j.at("input_columns").get<std::vector<std::string>>();
    p.dropped_columns = j.at("dropped_columns").get<std::vector<std::string>>();
    p.missing_value_policy = j.at("missing_value_policy").get<std::string>();
    p.split_seed = j.at("split_seed").get<std::uint64_t>();
    for (const auto& cj : j.at("columns")) {
        TabularColumn c;
        c.name = cj.at("name").get<std::string>();
        c.input_pos = cj.at("input_pos").get<std::size_t>();
        if (cj.at("kind").get<std::string>() == "numeric") {
            c.kind = ColumnKind::Numeric;
            c.mean = cj.at("mean").get<double>();
            c.stdev = cj.at("std").get<double>();
        } else {
            c.kind = ColumnKind::Categorical;
            c.categories = cj.at("categories").get<std::vector<std::string>>();
        }
        c.offset = cj.at("offset").get<std::size_t>();
        p.columns.push_back(std::move(c));
    }
    p.feature_names = std::move(feature_names);
    return p;
}

}  // namespace

Predictor::Predictor(const Model& model, Preprocessor preproc)
    : spec_(model.spec), preproc_(std::move(preproc)) {
    TaskType preproc_task;
    std::size_t preproc_features;
    if (auto* tp = std::get_if<TextPreprocessor>(&preproc_)) {
        preproc_task = tp->task.type;
        preproc_features = tp->n_features();
        labels_ = tp->labels;
    } else {
        auto& tab = std::get<TabularPreprocessor>(preproc_);
        preproc_task = tab.task.type;
        preproc_features = tab.n_features();
        labels_ = tab.labels;
    }
    if (task_of(spec_.head) != preproc_task)
        throw DataError("model head (" + to_string(spec_.head) +
                        ") does not match preprocessor task (" + to_string(preproc_task) + ")");
    if (preproc_features != spec_.input_dim)
        throw DataError("preprocessor feature width != model input_dim");
    if (preproc_task != TaskType::Regression && labels_.size() != spec_.output_dim)
        throw DataError("label count != model output_dim");

    // The one-time 64->32 bit cast. Inference uses these copies.
    for (const auto& nt : model.params) {
        std::vector<float> data(nt.t.v.begin(), nt.t.v.end());
        tensors_.emplace_back(nt.name, std::move(data));
        shapes_.push_back(nt.t.shape);
    }
    if (spec_.kind == ModelKind::Nbsvm) {
        if (!model.nb) throw DataError("NBSVM model without ratio vector");
        nbsvm_r_.assign(model.nb->r.begin(), model.nb->r.end());
    }
}

Predictor get_predictor(const Model& model, const Preprocessor& preproc) {
    return Predictor(model, preproc);
}

SparseVector Predictor::model_input(const std::string& raw) const {
    SparseVector x;
    if (auto* tp = std::get_if<TextPreprocessor>(&preproc_)) {
        x = tp->transform(raw);
    } else {
        x = std::get<TabularPreprocessor>(preproc_).transform_csv_row(raw);
    }
    if (spec_.kind == ModelKind::Nbsvm) {
        SparseVector scaled;
        scaled.reserve(x.size());
        for (const auto& [c, v] : x)
            if (v != 0.0) scaled.emplace_back(c, static_cast<double>(nbsvm_r_[c]));
        return scaled;
    }
    if (spec_.binarize_input) return binarize(x);
    return x;
}

Tensor Predictor::logits(const SparseVector& input) const {
    // Weight lookup by name, independent of tensor order on disk.
    auto tensor = [&](const char* name) -> std::pair<const std::vector<float>*, const std::vector<std::size_t>*> {
        for (std::size_t i = 0; i < tensors_.size(); ++i)
            if (tensors_[i].first == name) return {&tensors_[i].second, &shapes_[i]};
        throw DataError(std::string("bundle missing tensor: ") + name);
    };
    auto linear = [&](const char* wn, const char* bn, const std::vector<double>& dense_in,
                      const SparseVector* sparse_in) {
        auto [w, wshape] = tensor(wn);
        auto [b, bshape] = tensor(bn);
        std::size_t rows = (*wshape)[0], cols = (*wshape)[1];
        std::vector<double> out(rows);
        for (std::size_t k = 0; k < rows; ++k) {
            double s = static_cast<double>((*b)[k]);
            if (sparse_in) {
                for (const auto& [j, xv] : *sparse_in)
                    s += xv * static_cast<double>((*w)[k * cols + j]);
            } else {
                for (std::size_t j = 0; j < cols; ++j)
                    s += dense_in[j] * static_cast<double>((*w)[k * cols + j]);
            }
            out[k] = s;
        }
        return out;
    };

    std::vector<double> z;
    if (spec_.kind == ModelKind::Mlp) {
        std::vector<double> h = linear("W1", "b1", {}, &input);
        for (auto& v : h) v = std::max(v, 0.0);
        z = linear("W2", "b2", h, nullptr);
    } else {
        z = linear("W", "b", {}, &input);
    }
    Tensor out = Tensor::zeros({1, z.size()});
    out.v = std::move(z);
    return out;
}

std::vector<double> Predictor::predict_proba(const std::string& raw) const {
    Tensor z = logits(model_input(raw));
    switch (spec_.head) {
        case Head::Softmax: {
            Tensor p = softmax_rows(z);
            return p.v;
        }
        case Head::Sigmoid:
            for (auto& v : z.v) v = 1.0 / (1.0 + std::exp(-v));
            return z.v;
        case Head::Identity: return z.v;
    }
    return z.v;
}

Prediction Predictor::predict(const std::string& raw) const {
    Prediction out;
    std::vector<double> p = predict_proba(raw);
    switch (spec_.head) {
        case Head::Softmax: {
            std::size_t best = 0;
            for (std::size_t k = 1; k < p.size(); ++k)
                if (p[k] > p[best]) best = k;
            out.labels.push_back(best < labels_.size() ? labels_[best] : std::to_string(best));
            out.proba = std::move(p);
            break;
        }
        case Head::Sigmoid: {
            for (std::size_t k = 0; k < p.size(); ++k)
                if (p[k] >= 0.5)
                    out.labels.push_back(k < labels_.size() ? labels_[k] : std::to_string(k));
            out.proba = std::move(p);
            break;
        }
        case Head::Identity:
            out.values = std::move(p);
            break;
    }
    return out;
}

std::vector<Prediction> Predictor::predict(const std::vector<std::string>& raw) const {
    std::vector<Prediction> out;
    out.reserve(raw.size());
    for (const auto& r : raw) out.push_back(predict(r));
    return out;
}

Explanation Predictor::explain(const std::string& raw) const {
    if (spec_.kind == ModelKind::Mlp)
        throw DataError("explain: unsupported model kind 'mlp' (linear family only)");
    SparseVector x = model_input(raw);
    Tensor z = logits(x);
    std::size_t best = 0;
    for (std::size_t k = 1; k < z.size(); ++k)
        if (z(0, k) > z(0, best)) best = k;

    const std::vector<float>* w = nullptr;
    const std::vector<std::size_t>* wshape = nullptr;
    const std::vector<float>* b = nullptr;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        if (tensors_[i].first == "W") { w = &tensors_[i].second; wshape = &shapes_[i]; }
        if (tensors_[i].first == "b") b = &tensors_[i].second;
    }
    std::size_t cols = (*wshape)[1];

    const std::vector<std::string>* names = nullptr;
    if (auto* tp = std::get_if<TextPreprocessor>(&preproc_)) names = &tp->vocab;
    else names = &std::get<TabularPreprocessor>(preproc_).feature_names;

    Explanation e;
    e.bias = static_cast<double>((*b)[best]);
    e.winning_logit = z(0, best);
    e.predicted_label = spec_.head == Head::Identity
                            ? std::to_string(best)
                            : (best < labels_.size() ? labels_[best] : std::to_string(best));
    for (const auto& [j, xv] : x) {
        double contrib = xv * static_cast<double>((*w)[best * cols + j]);
        if (contrib == 0.0) continue;
        e.contributions.push_back({(*names)[j], contrib});
    }
    std::stable_sort(e.contributions.begin(), e.contributions.end(),
                     [](const auto& a, const auto& b2) {
                         return std::abs(a.value) > std::abs(b2.value);
                     });
    return e;
}

// ---------------------------------------------------------------------------
// Bundle save / load

void Predictor::save(const std::string& dir) const {
    fs::create_directories(dir);

    nlohmann::json meta;
    meta["schema_version"] = kBundleSchemaVersion;
    meta["model"] = {{"kind", to_string(spec_.kind)},
                     {"head", to_string(spec_.head)},
                     {"input_dim", spec_.input_dim},
                     {"output_dim", spec_.output_dim},
                     {"hidden_dim", spec_.hidden_dim},
                     {"binarize_input", spec_.binarize_input}};
    meta["task"] = to_string(task_of(spec_.head));
    meta["labels"] = labels_;
    if (auto* tp = std::get_if<TextPreprocessor>(&preproc_))
        meta["preprocessor"] = text_preproc_json(*tp);
    else
        meta["preprocessor"] = tabular_preproc_json(std::get<TabularPreprocessor>(preproc_));

    std::vector<io::F32Tensor> payload;
    for (std::size_t i = 0; i < tensors_.size(); ++i)
        payload.push_back({tensors_[i].first, shapes_[i], tensors_[i].second});
    if (spec_.kind == ModelKind::Nbsvm)
        payload.push_back({"ratios", {nbsvm_r_.size()}, nbsvm_r_});

    const std::vector<std::string>* vocab = nullptr;
    if (auto* tp = std::get_if<TextPreprocessor>(&preproc_)) vocab = &tp->vocab;
    else vocab = &std::get<TabularPreprocessor>(preproc_).feature_names;
    std::string vocab_txt;
    for (const auto& v : *vocab) {
        vocab_txt += v;
        vocab_txt += '\n';
    }

    io::write_file((fs::path(dir) / kMetaFile).string(), meta.dump(2) + "\n");
    io::write_file((fs::path(dir) / kVocabFile).string(), vocab_txt);
    io::write_file((fs::path(dir) / kWeightsFile).string(),
                   io::encode_weights(payload, kBundleSchemaVersion));
    io::write_file((fs::path(dir) / kChecksumFile).string(),
                   io::checksum_lines(dir, {kMetaFile, kVocabFile, kWeightsFile}));
}

Predictor load_predictor(const std::string& dir) {
    for (const char* f : {kMetaFile, kVocabFile, kWeightsFile})
        if (!fs::exists(fs::path(dir) / f))
            throw BundleMissingFileError("bundle missing file: " + std::string(f));
    io::verify_checksums(dir, kChecksumFile);

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(io::read_file((fs::path(dir) / kMetaFile).string()));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bundle meta.json: " + std::string(e.what()));
    }
    std::uint32_t version = meta.at("schema_version").get<std::uint32_t>();
    if (version > kBundleSchemaVersion)
        throw BundleVersionError("bundle schema_version " + std::to_string(version) +
                                 " unsupported (reader supports 1.." +
                                 std::to_string(kBundleSchemaVersion) + ")");

    std::vector<std::string> vocab;
    {
        std::istringstream in(io::read_file((fs::path(dir) / kVocabFile).string()));
        std::string line;
        while (std::getline(in, line)) vocab.push_back(line);
    }

    Predictor p;
    const auto& mj = meta.at("model");
    p.spec_.kind = model_kind_from_string(mj.at("kind").get<std::string>());
    p.spec_.head = head_from_string(mj.at("head").get<std::string>());
    p.spec_.input_dim = mj.at("input_dim").get<std::size_t>();
    p.spec_.output_dim = mj.at("output_dim").get<std::size_t>();
    p.spec_.hidden_dim = mj.at("hidden_dim").get<std::size_t>();
    p.spec_.binarize_input = mj.at("binarize_input").get<bool>();
    p.labels_ = meta.at("labels").get<std::vector<std::string>>();

    TaskKind task{task_of(p.spec_.head),
                  p.spec_.head == Head::Identity ? p.spec_.output_dim : p.labels_.size()};
    const auto& pj = meta.at("preprocessor");
    if (pj.at("kind").get<std::string>() == "text") {
        TextPreprocessor tp = text_preproc_from_json(pj, std::move(vocab));
        tp.task = task;
        tp.labels = p.labels_;
        p.preproc_ = std::move(tp);
    } else {
        TabularPreprocessor tab = tabular_preproc_from_json(pj, std::move(vocab));
        tab.task = task;
        tab.labels = p.labels_;
        p.preproc_ = std::move(tab);
    }

    auto payload = io::decode_weights(io::read_file((fs::path(dir) / kWeightsFile).string()),
                                      kBundleSchemaVersion);
    for (auto& t : payload) {
        if (t.name == "ratios") {
            p.nbsvm_r_ = std::move(t.data);
            continue;
        }
        p.tensors_.emplace_back(t.name, std::move(t.data));
        p.shapes_.push_back(t.shape);
    }
    if (p.spec_.kind == ModelKind::Nbsvm && p.nbsvm_r_.empty())
        throw DataError("bundle: NBSVM model without 'ratios' tensor");
    return p;
}

}  // namespace lowml

#include <cmath>
#include <filesystem>
#include <thread>

#include "doctest.h"
#include "helpers.hpp"

#include "lowml/corpus.hpp"
#include "lowml/errors.hpp"
#include "lowml/learner.hpp"
#include "lowml/predictor.hpp"
#include "lowml/rng.hpp"
#include "weights_io.hpp"

using namespace lowml;
using testutil::TempDir;

namespace fs = std::filesystem;

namespace {

struct ToySentiment {
    TextCorpusResult corpus;
    Model model;
};

// NBSVM trained on the 8-document sentiment corpus.
ToySentiment train_toy(ModelKind kind = ModelKind::Nbsvm) {
    ArrayLoadOptions opts;
    opts.val_fraction = 0.25;
    opts.featurizer.min_df = 1;
    auto corpus = texts_from_array(testutil::sentiment_texts(),
                                   RawTargets::from_labels(testutil::sentiment_labels()), opts);
    ModelSpec spec = make_model_spec(kind, corpus.preproc.n_features(), corpus.preproc.task);
    Learner l = get_learner(make_model(spec, 3), corpus.train, corpus.val, 4, 42);
    l.autofit(0.25, 25);
    return {std::move(corpus), l.model()};
}

std::vector<std::string> bundle_files() {
    return {"meta.json", "vocab.txt", "weights.bin", "checksum"};
}

}  // namespace

TEST_CASE("get_predictor rejects a task mismatch") {
    auto toy = train_toy();
    TextPreprocessor wrong = toy.corpus.preproc;
    wrong.task = {TaskType::Regression, 1};
    wrong.labels.clear();
    CHECK_THROWS_AS(get_predictor(toy.model, Preprocessor{wrong}), DataError);
}

TEST_CASE("constructing twice from the same inputs yields identical predictors") {
    auto toy = train_toy();
    Predictor a = get_predictor(toy.model, Preprocessor{toy.corpus.preproc});
    Predictor b = get_predictor(toy.model, Preprocessor{toy.corpus.preproc});
    REQUIRE(a.tensors().size() == b.tensors().size());
    for (std::size_t i = 0; i < a.tensors().size(); ++i) {
        CHECK(a.tensors()[i].first == b.tensors()[i].first);
        CHECK(a.tensors()[i].second == b.tensors()[i].second);
    }
}

TEST_CASE("toy sentiment model predicts 'good good good' as pos") {
    auto toy = train_toy();
    Predictor p = get_predictor(toy.model, Preprocessor{toy.corpus.preproc});
    auto pred = p.predict(std::string("good good good"));
    REQUIRE(pred.labels.size() == 1);
    CHECK(pred.labels[0] == "pos");
    auto neg = p.predict(std::string("awful bad bad"));
    CHECK(neg.labels[0] == "neg");
}

TEST_CASE("predictor agrees with the learner's probabilities on the validation set") {
    ArrayLoadOptions opts;
    opts.val_fraction = 0.25;
    opts.featurizer.min_df = 1;
    auto corpus = texts_from_array(testutil::sentiment_texts(),
                                   RawTargets::from_labels(testutil::sentiment_labels()), opts);
    ModelSpec spec = make_model_spec(ModelKind::Linear, corpus.preproc.n_features(),
                                     corpus.preproc.task);
    Learner l = get_learner(make_model(spec, 3), corpus.train, corpus.val, 4, 42);
    l.fit_onecycle(0.5, 15);
    Predictor p = get_predictor(l.model(), Preprocessor{corpus.preproc});

    Tensor proba = predict_proba(l.model().params, l.model().spec, corpus.val.features);
    std::size_t agree = 0;
    // Validation rows were split out of the raw array; recover their texts
    // through the recorded sources (original indices).
    auto texts = testutil::sentiment_texts();
    for (std::size_t i = 0; i < corpus.val.size(); ++i) {
        std::size_t argmax = 0;
        for (std::size_t k = 1; k < 2; ++k)
            if (proba(i, k) > proba(i, argmax)) argmax = k;
        auto pred = p.predict(texts[std::stoul(corpus.val.sources[i])]);
        agree += pred.labels[0] == corpus.preproc.labels[argmax];
    }
    CHECK(agree == corpus.val.size());
}

TEST_CASE("all-OOV input is decided by the bias alone") {
    auto toy = train_toy(ModelKind::Linear);
    // Force a known bias argmax.
    Model m = toy.model;
    for (auto& nt : m.params)
        if (nt.name == "b") {
            nt.t(0) = 2.0;  // neg
            nt.t(1) = 1.0;
        }
    Predictor p = get_predictor(m, Preprocessor{toy.corpus.preproc});
    auto pred = p.predict(std::string("zebra quagga xylophone"));
    CHECK(pred.labels[0] == "neg");
}

TEST_CASE("list prediction preserves order") {
    auto toy = train_toy();
    Predictor p = get_predictor(toy.model, Preprocessor{toy.corpus.preproc});
    std::vector<std::string> inputs{"good good", "bad awful", "nice good"};
    auto preds = p.predict(inputs);
    REQUIRE(preds.size() == 3);
    CHECK(preds[0].labels[0] == "pos");
    CHECK(preds[1].labels[0] == "neg");
    CHECK(preds[2].labels[0] == "pos");
}

TEST_CASE("explain: linearity identity and top contribution") {
    auto toy = train_toy();
    Predictor p = get_predictor(toy.model, Preprocessor{toy.corpus.preproc});
    Explanation e = p.explain("good good good");
    CHECK(e.predicted_label == "pos");

    double sum = e.bias;
    for (const auto& c : e.contributions) sum += c.value;
    CHECK(std::abs(sum - e.winning_logit) <= 1e-4);

    // "good" carries the largest positive contribution for pos.
    REQUIRE(!e.contributions.empty());
    CHECK(e.contributions[0].feature == "good");
    CHECK(e.contributions[0].value > 0);

    // Tokens absent from the input are not listed.
    for (const auto& c : e.contributions) CHECK(c.feature.find("awful") == std::string::npos);

    // Sorted by |contribution| descending.
    for (std::size_t i = 1; i < e.contributions.size(); ++i)
        CHECK(std::abs(e.contributions[i - 1].value) >= std::abs(e.contributions[i].value));
}

TEST_CASE("explain holds the completeness identity over random inputs") {
    auto toy = train_toy(ModelKind::Linear);
    Predictor p = get_predictor(toy.model, Preprocessor{toy.corpus.preproc});
    std::vector<std::string> words{"good", "bad", "nice", "awful", "hotel", "room", "view"};
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        std::string text;
        for (int w = 0; w < 6; ++w) {
            text += words[rng.below(words.size())];
            text += ' ';
        }
        Explanation e = p.explain(text);
        double sum = e.bias;
        for (const auto& c : e.contributions) sum += c.value;
        CHECK(std::abs(sum - e.winning_logit) <= 1e-4);
    }
}

TEST_CASE("explain refuses MLP models") {
    ArrayLoadOptions opts;
    opts.val_fraction = 0.25;
    opts.featurizer.min_df = 1;
    auto corpus = texts_from_array(testutil::sentiment_texts(),
                                   RawTargets::from_labels(testutil::sentiment_labels()), opts);
    ModelSpec spec = make_model_spec(ModelKind::Mlp, corpus.preproc.n_features(),
                                     corpus.preproc.task, 4);
    Model m = make_model(spec, 3);
    Predictor p = get_predictor(m, Preprocessor{corpus.preproc});
    CHECK_THROWS_WITH_AS(p.explain("good"), doctest::Contains("mlp"), DataError);
}

TEST_CASE("save/load round trip is bit-exact") {
    TempDir tmp("bundle");
    auto toy = train_toy();
    Predictor p = get_predictor(toy.model, Preprocessor{toy.corpus.preproc});
    p.save(tmp.sub("m"));

    Predictor q = load_predictor(tmp.sub("m"));
    for (const std::string& text : {"good nice", "bad bad awful", "zebra"}) {
        auto a = p.predict_proba(text);
        auto b = q.predict_proba(text);
        CHECK(a == b);  // bitwise
    }

    // save(load(save(x))) produces byte-identical files.
    q.save(tmp.sub("m2"));
    for (const auto& f : bundle_files()) {
        CAPTURE(f);
        CHECK(testutil::read_file(tmp.path() / "m" / f) ==
              testutil::read_file(tmp.path() / "m2" / f));
    }
}

TEST_CASE("tabular predictor round trips through a bundle") {
    TempDir tmp("tab_bundle");
    testutil::write_file(tmp.path() / "d.csv",
                         "x,color,label\n1,red,yes\n2,blue,no\n3,red,yes\n4,green,no\n"
                         "5,blue,yes\n6,red,no\n7,red,yes\n8,blue,no\n");
    auto r = tabular_from_csv(tmp.sub("d.csv"), {"label"}, {});
    ModelSpec spec = make_model_spec(ModelKind::Linear, r.preproc.n_features(), r.preproc.task);
    Learner l = get_learner(make_model(spec, 1), r.train, r.val, 4, 42);
    l.fit(0.1, 5);
    Predictor p = get_predictor(l.model(), Preprocessor{r.preproc});
    p.save(tmp.sub("m"));
    Predictor q = load_predictor(tmp.sub("m"));
    CHECK(p.predict_proba(std::string("3,red")) == q.predict_proba(std::string("3,red")));
    // Unknown category still routes through the UNKNOWN bucket after reload.
    CHECK_NOTHROW(q.predict(std::string("4,neon")));
}

TEST_CASE("corrupting one byte of weights.bin fails the checksum") {
    TempDir tmp("corrupt");
    auto toy = train_toy();
    Predictor p = get_predictor(toy.model, Preprocessor{toy.corpus.preproc});
    p.save(tmp.sub("m"));

    std::string bytes = testutil::read_file(tmp.path() / "m" / "weights.bin");
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
    testutil::write_file(tmp.path() / "m" / "weights.bin", bytes);
    CHECK_THROWS_AS(load_predictor(tmp.sub("m")), BundleChecksumError);
}

TEST_CASE("unsupported schema version is a distinct error naming the range") {
    TempDir tmp("version");
    auto toy = train_toy();
    Predictor p = get_predictor(toy.model, Preprocessor{toy.corpus.preproc});
    p.save(tmp.sub("m"));

    std::string meta = testutil::read_file(tmp.path() / "m" / "meta.json");
    auto pos = meta.find("\"schema_version\": 1");
    REQUIRE(pos != std::string::npos);
    meta.replace(pos, std::string("\"schema_version\": 1").size(), "\"schema_version\": 99");
    testutil::write_file(tmp.path() / "m" / "meta.json", meta);
    // Keep the checksum consistent so the version check is what fires.
    testutil::write_file(tmp.path() / "m" / "checksum",
                         lowml::io::checksum_lines(tmp.sub("m"),
                                                   {"meta.json", "vocab.txt", "weights.bin"}));
    CHECK_THROWS_WITH_AS(load_predictor(tmp.sub("m")), doctest::Contains("1..1"),
                         BundleVersionError);
}

TEST_CASE("missing bundle files are a distinct error") {
    TempDir tmp("missing");
    auto toy = train_toy();
    Predictor p = get_predictor(toy.model, Preprocessor{toy.corpus.preproc});
    p.save(tmp.sub("m"));
    fs::remove(tmp.path() / "m" / "vocab.txt");
    CHECK_THROWS_AS(load_predictor(tmp.sub("m")), BundleMissingFileError);
}

TEST_CASE("concurrent predicts are identical (predictor is immutable)") {
    auto toy = train_toy();
    Predictor p = get_predictor(toy.model, Preprocessor{toy.corpus.preproc});
    auto baseline = p.predict_proba(std::string("good nice room"));
    std::vector<std::thread> threads;
    std::vector<std::vector<double>> results(8);
    for (int t = 0; t < 8; ++t)
        threads.emplace_back([&, t]() {
            for (int i = 0; i < 50; ++i) results[t] = p.predict_proba(std::string("good nice room"));
        });
    for (auto& th : threads) th.join();
    for (const auto& r : results) CHECK(r == baseline);
}

TEST_CASE("multilabel predictions return every label above threshold, possibly none") {
    // Hand-built multilabel model over two features.
    TextPreprocessor tp;
    tp.mode = TokenizerMode::Word;
    tp.ngram_lo = tp.ngram_hi = 1;
    tp.maxlen = 16;
    tp.vocab = {"alpha", "beta"};
    tp.idf = {1.0, 1.0};
    tp.labels = {"L0", "L1"};
    tp.task = {TaskType::Multilabel, 2};
    tp.rebuild_index();

    ModelSpec spec{ModelKind::Linear, 2, 2, 64, Head::Sigmoid, false};
    Model m = make_model(spec, 1);
    m.params[0].t(0, 0) = 10.0;
    m.params[0].t(0, 1) = 0.0;
    m.params[0].t(1, 0) = 0.0;
    m.params[0].t(1, 1) = 10.0;
    m.params[1].t(0) = -2.0;
    m.params[1].t(1) = -2.0;
    Predictor p = get_predictor(m, Preprocessor{tp});

    auto both = p.predict(std::string("alpha beta"));
    CHECK(both.labels == std::vector<std::string>{"L0", "L1"});
    auto one = p.predict(std::string("alpha alpha"));
    CHECK(one.labels == std::vector<std::string>{"L0"});
    auto none = p.predict(std::string("nothing known"));
    CHECK(none.labels.empty());  // no label clears 0.5
}

TEST_CASE("chinese sentiment end to end: char ngrams, bundle round trip") {
    // Hotel-review flavored toy corpus; detection must pick character
    // n-grams and the whole pipeline must survive a bundle round trip.
    std::vector<std::string> texts{
        "酒店很好非常好",      // hotel very good
        "房间很好很干净",      // room good and clean
        "服务很好很不错",      // service good
        "早餐很好非常不错",
        "酒店很差非常差",      // hotel very bad
        "房间很差很脏",            // room bad and dirty
        "服务很差很糟糕",
        "早餐很差非常糟糕",
    };
    std::vector<std::string> labels{"pos", "pos", "pos", "pos", "neg", "neg", "neg", "neg"};
    ArrayLoadOptions opts;
    opts.val_fraction = 0.25;
    opts.featurizer.min_df = 1;
    opts.featurizer.maxlen = 75;
    auto corpus = texts_from_array(texts, RawTargets::from_labels(labels), opts);
    CHECK(corpus.preproc.mode == TokenizerMode::CharNgram);
    CHECK(corpus.preproc.maxlen == 75);

    ModelSpec spec = make_model_spec(ModelKind::Nbsvm, corpus.preproc.n_features(),
                                     corpus.preproc.task);
    Learner l = get_learner(make_model(spec, 3), corpus.train, corpus.val, 4, 42);
    l.fit_onecycle(0.25, 12);
    Predictor p = get_predictor(l.model(), Preprocessor{corpus.preproc});

    std::string good = "很好很好";  // very good, twice
    std::string bad = "很差很脏";
    CHECK(p.predict(good).labels[0] == "pos");
    CHECK(p.predict(bad).labels[0] == "neg");

    TempDir tmp("cjk_bundle");
    p.save(tmp.sub("m"));
    Predictor q = load_predictor(tmp.sub("m"));
    CHECK(p.predict_proba(good) == q.predict_proba(good));
    CHECK(p.predict_proba(bad) == q.predict_proba(bad));
    q.save(tmp.sub("m2"));
    for (const auto& f : bundle_files())
        CHECK(testutil::read_file(tmp.path() / "m" / f) ==
              testutil::read_file(tmp.path() / "m2" / f));
}

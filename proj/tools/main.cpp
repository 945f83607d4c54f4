// lowml command-line front end: train / evaluate / predict / lr-find plus
// the qa and topic subcommands. One process per command, exit codes:
//   0 success, 2 config error, 3 data error, 4 training divergence.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lowml/corpus.hpp"
#include "lowml/errors.hpp"
#include "lowml/learner.hpp"
#include "lowml/models.hpp"
#include "lowml/optim.hpp"
#include "lowml/predictor.hpp"
#include "lowml/qa.hpp"
#include "lowml/topic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw lowml::DataError("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw lowml::DataError("cannot write file: " + path);
    out << content;
}

// ---------------------------------------------------------------------------
// Run configuration (JSON file + flag overrides), strict about unknown keys.

struct ScheduleConfig {
    std::string kind = "autofit";  // onecycle | autofit | sgdr | constant
    std::optional<double> lr;
    std::optional<std::size_t> epochs;
    std::size_t cycle_len = 1;
    std::size_t cycle_mult = 1;
};

struct RunConfig {
    std::string task;  // text-class | tabular-class | tabular-reg
    std::string folder;
    std::vector<std::string> split_names{"train", "test"};
    std::string csv;
    std::vector<std::string> label_columns;
    double val_fraction = 0.1;
    lowml::FeaturizerOptions featurizer;
    std::string model = "nbsvm";
    std::size_t hidden_dim = 64;
    ScheduleConfig schedule;
    std::size_t batch_size = 32;
    std::uint64_t seed = 42;
    std::string output_dir = "lowml_out";
};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw ConfigError("unknown key \"" + key + "\" in " + where);
}

RunConfig load_run_config(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const lowml::DataError& e) {
        throw ConfigError(e.what());
    } catch (const json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    check_keys(j, {"task", "data", "model", "hidden_dim", "schedule", "batch_size", "seed",
                   "output_dir"},
               "config");
    RunConfig c;
    try {
        c.task = j.at("task").get<std::string>();
        if (c.task != "text-class" && c.task != "tabular-class" && c.task != "tabular-reg")
            throw ConfigError("task must be text-class, tabular-class or tabular-reg");

        const json& d = j.at("data");
        check_keys(d, {"folder", "split_names", "csv", "label_columns", "val_fraction",
                       "maxlen", "ngram", "max_features", "min_df"},
                   "data");
        if (d.contains("folder")) c.folder = d["folder"].get<std::string>();
        if (d.contains("split_names"))
            c.split_names = d["split_names"].get<std::vector<std::string>>();
        if (d.contains("csv")) c.csv = d["csv"].get<std::string>();
        if (d.contains("label_columns"))
            c.label_columns = d["label_columns"].get<std::vector<std::string>>();
        if (d.contains("val_fraction")) c.val_fraction = d["val_fraction"].get<double>();
        if (d.contains("maxlen")) c.featurizer.maxlen = d["maxlen"].get<std::size_t>();
        if (d.contains("ngram")) {
            auto ng = d["ngram"].get<std::vector<int>>();
            if (ng.size() != 2) throw ConfigError("data.ngram must be [lo, hi]");
            c.featurizer.ngram_lo = ng[0];
            c.featurizer.ngram_hi = ng[1];
        }
        if (d.contains("max_features"))
            c.featurizer.max_features = d["max_features"].get<std::size_t>();
        if (d.contains("min_df")) c.featurizer.min_df = d["min_df"].get<std::size_t>();

        if (j.contains("model")) c.model = j["model"].get<std::string>();
        if (j.contains("hidden_dim")) c.hidden_dim = j["hidden_dim"].get<std::size_t>();

        if (j.contains("schedule")) {
            const json& s = j["schedule"];
            check_keys(s, {"kind", "lr", "epochs", "cycle_len", "cycle_mult"}, "schedule");
            if (s.contains("kind")) c.schedule.kind = s["kind"].get<std::string>();
            if (s.contains("lr")) c.schedule.lr = s["lr"].get<double>();
            if (s.contains("epochs")) c.schedule.epochs = s["epochs"].get<std::size_t>();
            if (s.contains("cycle_len")) c.schedule.cycle_len = s["cycle_len"].get<std::size_t>();
            if (s.contains("cycle_mult"))
                c.schedule.cycle_mult = s["cycle_mult"].get<std::size_t>();
        }
        if (c.schedule.kind != "onecycle" && c.schedule.kind != "autofit" &&
            c.schedule.kind != "sgdr" && c.schedule.kind != "constant")
            throw ConfigError("schedule.kind must be onecycle, autofit, sgdr or constant");

        if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }
    if (c.task == "text-class" && c.folder.empty())
        throw ConfigError("text-class needs data.folder");
    if (c.task != "text-class" && c.csv.empty()) throw ConfigError(c.task + " needs data.csv");
    if (c.task != "text-class" && c.label_columns.empty())
        throw ConfigError(c.task + " needs data.label_columns");
    return c;
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    std::optional<double> lr;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<std::string> model;
};

void apply_overrides(RunConfig& c, const Overrides& o) {
    if (o.seed) c.seed = *o.seed;
    if (o.output_dir) c.output_dir = *o.output_dir;
    if (o.lr) c.schedule.lr = *o.lr;
    if (o.epochs) c.schedule.epochs = *o.epochs;
    if (o.batch_size) c.batch_size = *o.batch_size;
    if (o.model) c.model = *o.model;
}

// ---------------------------------------------------------------------------
// Data loading shared by train / lr-find

struct LoadedData {
    lowml::Dataset train;
    lowml::Dataset val;
    lowml::Preprocessor preproc;
    lowml::TaskKind task;
    std::vector<std::string> labels;
    std::size_t n_features = 0;
};

LoadedData load_data(const RunConfig& c) {
    LoadedData out;
    if (c.task == "text-class") {
        lowml::FolderLoadOptions opts;
        opts.split_names = c.split_names;
        opts.featurizer = c.featurizer;
        auto r = lowml::texts_from_folder(c.folder, opts);
        out.train = std::move(r.train);
        out.val = std::move(r.val);
        out.task = r.preproc.task;
        out.labels = r.preproc.labels;
        out.n_features = r.preproc.n_features();
        out.preproc = std::move(r.preproc);
    } else {
        lowml::CsvLoadOptions opts;
        opts.val_fraction = c.val_fraction;
        opts.seed = c.seed;
        opts.task_override = c.task == "tabular-reg" ? lowml::TaskType::Regression
                                                     : lowml::TaskType::Multiclass;
        auto r = lowml::tabular_from_csv(c.csv, c.label_columns, opts);
        out.train = std::move(r.train);
        out.val = std::move(r.val);
        out.task = r.preproc.task;
        out.labels = r.preproc.labels;
        out.n_features = r.preproc.n_features();
        out.preproc = std::move(r.preproc);
    }
    return out;
}

lowml::Model run_training(const RunConfig& c, LoadedData& data, bool quiet,
                          std::vector<lowml::EpochRecord>* history_out) {
    lowml::ModelKind kind = lowml::model_kind_from_string(c.model);
    double lr = c.schedule.lr.value_or(lowml::training_defaults(kind).lr);

    if (kind == lowml::ModelKind::Nbsvm && data.task.n_outputs > 2) {
        if (c.schedule.kind != "autofit")
            throw ConfigError("multiclass nbsvm trains one-vs-rest and supports autofit only");
        lowml::OvrTrainOptions ovr;
        ovr.lr_max = lr;
        ovr.epochs = c.schedule.epochs;
        ovr.batch_size = c.batch_size;
        lowml::Model model = lowml::train_nbsvm_ovr(data.train, data.val, ovr, c.seed);
        if (history_out) history_out->clear();  // per-class histories are internal
        if (!quiet) std::cout << "trained one-vs-rest nbsvm over " << data.task.n_outputs
                              << " classes\n";
        return model;
    }

    lowml::ModelSpec spec = lowml::make_model_spec(kind, data.n_features, data.task,
                                                   c.hidden_dim);
    lowml::Learner learner = lowml::get_learner(lowml::make_model(spec, c.seed), data.train,
                                                data.val, c.batch_size, c.seed);
    learner.set_label_names(data.labels);

    const std::string& sk = c.schedule.kind;
    if (sk == "onecycle") {
        if (!c.schedule.epochs) throw ConfigError("schedule.epochs required for onecycle");
        learner.fit_onecycle(lr, *c.schedule.epochs);
    } else if (sk == "autofit") {
        learner.autofit(lr, c.schedule.epochs);
    } else if (sk == "sgdr") {
        if (!c.schedule.epochs) throw ConfigError("schedule.epochs required for sgdr");
        learner.fit(lr, *c.schedule.epochs, c.schedule.cycle_len, c.schedule.cycle_mult);
    } else {
        if (!c.schedule.epochs) throw ConfigError("schedule.epochs required for constant");
        learner.fit(lr, *c.schedule.epochs);
    }
    if (!quiet)
        for (const auto& e : learner.history())
            std::cout << "epoch " << e.epoch << ": train_loss=" << e.train_loss
                      << " val_loss=" << e.val_loss << " val_metric=" << e.val_metric << '\n';
    if (history_out) *history_out = learner.history();
    return learner.model();
}

// ---------------------------------------------------------------------------
// Commands

int cmd_train(const std::string& config_path, const Overrides& overrides, bool quiet) {
    RunConfig c = load_run_config(config_path);
    apply_overrides(c, overrides);
    LoadedData data = load_data(c);

    std::vector<lowml::EpochRecord> history;
    lowml::Model model = run_training(c, data, quiet, &history);

    lowml::EvalResult eval = lowml::evaluate_model(model, data.val, data.labels);
    lowml::Predictor predictor = lowml::get_predictor(model, data.preproc);

    fs::create_directories(c.output_dir);
    predictor.save((fs::path(c.output_dir) / "bundle").string());
    write_text_file((fs::path(c.output_dir) / "history.csv").string(),
                    lowml::history_csv(history));
    write_text_file((fs::path(c.output_dir) / "report.txt").string(), lowml::eval_text(eval));
    write_text_file((fs::path(c.output_dir) / "report.json").string(),
                    lowml::eval_json(eval) + "\n");
    if (!quiet) {
        std::cout << lowml::eval_text(eval);
        std::cout << "saved bundle to " << (fs::path(c.output_dir) / "bundle").string() << '\n';
    }
    return 0;
}

int cmd_lr_find(const std::string& config_path, const Overrides& overrides, double lr_start,
                double lr_end, std::size_t max_iters, const std::string& out_csv,
                const std::string& out_svg, bool quiet) {
    RunConfig c = load_run_config(config_path);
    apply_overrides(c, overrides);
    LoadedData data = load_data(c);

    lowml::ModelKind kind = lowml::model_kind_from_string(c.model);
    lowml::TaskKind task = data.task;
    if (kind == lowml::ModelKind::Nbsvm && task.n_outputs > 2)
        throw ConfigError("lr-find on multiclass nbsvm is not defined (one-vs-rest training)");
    lowml::ModelSpec spec = lowml::make_model_spec(kind, data.n_features, task, c.hidden_dim);
    lowml::Learner learner = lowml::get_learner(lowml::make_model(spec, c.seed), data.train,
                                                data.val, c.batch_size, c.seed);
    lowml::LrFindOptions opts;
    opts.lr_start = lr_start;
    opts.lr_end = lr_end;
    opts.max_iters = max_iters;
    lowml::LRFinderResult r = learner.lr_find(opts);

    std::string csv_path = out_csv.empty()
                               ? (fs::path(c.output_dir) / "lr_find.csv").string()
                               : out_csv;
    lowml::write_lr_curve_csv(r, csv_path);
    if (!out_svg.empty()) lowml::write_lr_curve_svg(r, out_svg);
    if (!quiet) std::cout << "curve written to " << csv_path << '\n';
    std::cout << "suggestion=" << fmt_g17(r.suggestion) << '\n';
    return 0;
}

// Evaluation data for a saved bundle: a folder of <class>/*.txt or a CSV
// with the bundle's label columns.
int cmd_evaluate(const std::string& bundle_dir, const std::string& data_path, bool as_json) {
    lowml::Predictor p = lowml::load_predictor(bundle_dir);
    if (data_path.empty() || !fs::exists(data_path))
        throw lowml::DataError("evaluation data not found: " +
                               (data_path.empty() ? "(none given)" : data_path));

    std::vector<std::string> raw;
    std::vector<std::vector<std::string>> label_sets;

    if (fs::is_directory(data_path)) {
        std::vector<std::pair<std::string, std::string>> files;  // rel, class
        for (const auto& cls : fs::directory_iterator(data_path)) {
            if (!cls.is_directory()) continue;
            for (const auto& f : fs::directory_iterator(cls.path())) {
                if (!f.is_regular_file() || f.path().extension() != ".txt") continue;
                files.emplace_back(f.path().string(), cls.path().filename().string());
            }
        }
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw lowml::DataError("no <class>/*.txt documents under " + data_path);
        for (auto& [path, cls] : files) {
            raw.push_back(read_text_file(path));
            label_sets.push_back({cls});
        }
    } else {
        auto rows = lowml::parse_csv(read_text_file(data_path));
        if (rows.size() < 2) throw lowml::DataError("evaluation CSV has no data rows");
        const auto* tab = std::get_if<lowml::TabularPreprocessor>(&p.preproc());
        if (!tab) throw lowml::DataError("CSV evaluation data given for a text bundle");
        const auto& header = rows.front();
        std::vector<std::size_t> label_idx, feature_idx;
        for (const auto& lc : tab->label_columns) {
            auto it = std::find(header.begin(), header.end(), lc);
            if (it == header.end())
                throw lowml::DataError("label column missing in evaluation CSV: " + lc);
            label_idx.push_back(static_cast<std::size_t>(it - header.begin()));
        }
        for (std::size_t i = 0; i < header.size(); ++i)
            if (std::find(label_idx.begin(), label_idx.end(), i) == label_idx.end())
                feature_idx.push_back(i);
        for (std::size_t rix = 1; rix < rows.size(); ++rix) {
            std::string line;
            for (std::size_t k = 0; k < feature_idx.size(); ++k) {
                if (k) line += ',';
                line += lowml::csv_escape(rows[rix][feature_idx[k]]);
            }
            raw.push_back(line);
            std::vector<std::string> labels;
            for (std::size_t c : label_idx) labels.push_back(rows[rix][c]);
            label_sets.push_back(labels);
        }
    }

    // Probabilities row by row through the predictor.
    std::size_t k_dim = p.spec().output_dim;
    lowml::Tensor proba = lowml::Tensor::zeros({raw.size(), k_dim});
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto row = p.predict_proba(raw[i]);
        for (std::size_t k = 0; k < k_dim; ++k) proba(i, k) = row[k];
    }

    lowml::TaskKind task{p.spec().head == lowml::Head::Softmax ? lowml::TaskType::Multiclass
                         : p.spec().head == lowml::Head::Sigmoid
                             ? lowml::TaskType::Multilabel
                             : lowml::TaskType::Regression,
                         k_dim};
    lowml::RawTargets targets;
    if (task.type == lowml::TaskType::Regression) {
        for (auto& ls : label_sets) {
            std::vector<double> vals;
            for (auto& s : ls) {
                try {
                    vals.push_back(std::stod(s));
                } catch (const std::exception&) {
                    throw lowml::DataError("non-numeric regression target: " + s);
                }
            }
            targets.numeric.push_back(vals);
        }
    } else {
        targets.labels = label_sets;
    }
    lowml::Tensor t = lowml::encode_targets(targets, task, p.labels());
    lowml::EvalResult eval = lowml::evaluate_predictions(proba, t, task.type, p.labels());
    std::cout << (as_json ? lowml::eval_json(eval) + "\n" : lowml::eval_text(eval));
    return 0;
}

int cmd_predict(const std::string& bundle_dir, const std::string& input_path, bool proba,
                bool as_json) {
    lowml::Predictor p = lowml::load_predictor(bundle_dir);
    std::vector<std::string> inputs;
    if (!input_path.empty()) {
        std::istringstream in(read_text_file(input_path));
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) inputs.push_back(line);
    } else {
        std::string line;
        while (std::getline(std::cin, line))
            if (!line.empty()) inputs.push_back(line);
    }
    for (const auto& raw : inputs) {
        lowml::Prediction pred = p.predict(raw);
        if (as_json || true) {  // JSON lines are the predict output format
            json j;
            j["input"] = raw;
            if (p.spec().head == lowml::Head::Identity) {
                if (pred.values.size() == 1) j["value"] = pred.values[0];
                else j["values"] = pred.values;
            } else if (p.spec().head == lowml::Head::Softmax) {
                j["label"] = pred.labels.empty() ? "" : pred.labels[0];
            } else {
                j["labels"] = pred.labels;
            }
            if (proba && !pred.proba.empty()) j["proba"] = pred.proba;
            std::cout << j.dump() << '\n';
        }
    }
    return 0;
}

int cmd_qa_index(const std::string& index_path, const std::string& from_folder,
                 const std::string& from_jsonl, std::size_t commit_every, bool quiet) {
    if (from_folder.empty() == from_jsonl.empty())
        throw ConfigError("qa index needs exactly one of --from-folder / --from-jsonl");
    lowml::qa::SearchIndex::initialize(index_path);
    lowml::qa::IndexSummary summary;
    if (!from_folder.empty()) {
        auto idx = lowml::qa::index_from_folder(from_folder, index_path, commit_every);
        summary.n_indexed = idx.n_docs();
    } else {
        std::vector<std::string> docs;
        std::istringstream in(read_text_file(from_jsonl));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                docs.push_back(json::parse(line).at("text").get<std::string>());
            } catch (const json::exception& e) {
                throw lowml::DataError("bad JSONL at line " + std::to_string(line_no) + ": " +
                                       e.what());
            }
        }
        auto idx = lowml::qa::index_from_list(docs, index_path, commit_every);
        summary.n_indexed = idx.n_docs();
    }
    if (!quiet)
        std::cout << "indexed " << summary.n_indexed << " documents at " << index_path << '\n';
    return 0;
}

int cmd_qa_ask(const std::string& index_path, const std::string& question, std::size_t k_docs,
               std::size_t k_answers, bool as_json) {
    auto idx = lowml::qa::SearchIndex::open(index_path);
    lowml::qa::LexicalReader reader;
    auto answers = lowml::qa::ask(idx, question, reader, {k_docs, k_answers});
    if (as_json) {
        for (const auto& a : answers) {
            json j;
            j["answer"] = a.text;
            j["confidence"] = a.confidence;
            j["context"] = a.context;
            j["span"] = {a.span_begin, a.span_end};
            j["reference"] = a.reference;
            std::cout << j.dump() << '\n';
        }
    } else if (answers.empty()) {
        std::cout << "no answers\n";
    } else {
        for (const auto& a : answers)
            std::cout << a.text << "\t(confidence " << a.confidence << ", reference "
                      << a.reference << ")\n";
    }
    return 0;
}

int cmd_topic_build(const std::string& docs_path, const std::string& out_dir,
                    std::size_t n_topics, std::size_t n_features, double threshold,
                    std::uint64_t seed, std::size_t min_df, bool quiet) {
    std::vector<std::string> docs;
    std::vector<std::string> references;
    if (fs::is_directory(docs_path)) {
        std::vector<std::string> rels;
        for (const auto& e : fs::recursive_directory_iterator(docs_path))
            if (e.is_regular_file())
                rels.push_back(fs::relative(e.path(), docs_path).generic_string());
        std::sort(rels.begin(), rels.end());
        for (const auto& rel : rels) {
            docs.push_back(read_text_file((fs::path(docs_path) / rel).string()));
            references.push_back(rel);
        }
    } else {
        std::istringstream in(read_text_file(docs_path));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                docs.push_back(json::parse(line).at("text").get<std::string>());
            } catch (const json::exception& e) {
                throw lowml::DataError("bad JSONL at line " + std::to_string(line_no) + ": " +
                                       e.what());
            }
            references.push_back(std::to_string(line_no));
            ++line_no;
        }
    }
    if (docs.empty()) throw lowml::DataError("no documents at " + docs_path);

    lowml::topic::TopicModelOptions opts;
    opts.n_topics = n_topics;
    opts.n_features = n_features;
    opts.seed = seed;
    opts.featurizer.min_df = min_df;
    auto tm = lowml::topic::TopicModel::fit(docs, opts);
    tm.build(threshold, references);
    tm.train_recommender();
    tm.save(out_dir);
    if (!quiet)
        std::cout << "topic model over " << docs.size() << " docs, kept "
                  << tm.kept_doc_ids().size() << ", saved to " << out_dir << '\n';
    return 0;
}

int cmd_topic_recommend(const std::string& model_dir, const std::string& text_file,
                        std::size_t n, bool as_json) {
    auto tm = lowml::topic::TopicModel::load(model_dir);
    std::string text;
    if (!text_file.empty()) {
        text = read_text_file(text_file);
    } else {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        text = ss.str();
    }
    auto rec = tm.recommend(text, n);
    if (as_json) {
        for (const auto& item : rec.items) {
            json j;
            j["reference"] = item.reference;
            j["similarity"] = item.similarity;
            std::cout << j.dump() << '\n';
        }
        if (rec.items.empty()) {
            json j;
            j["status"] = rec.status;
            std::cout << j.dump() << '\n';
        }
    } else if (rec.items.empty()) {
        std::cout << rec.status << '\n';
    } else {
        for (const auto& item : rec.items)
            std::cout << item.reference << "\t" << item.similarity << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lowml: low-code text/tabular training, QA search and topic models"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path;
    bool quiet = false;
    bool as_json = false;
    Overrides overrides;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_flag("--quiet", quiet, "suppress progress output");
    app.add_flag("--json", as_json, "machine-readable JSON output");
    std::uint64_t seed_flag = 0;
    auto* seed_opt = app.add_option("--seed", seed_flag, "override config seed");

    // train
    auto* train = app.add_subcommand("train", "load, preprocess, train, evaluate, save bundle");
    std::string out_flag, model_flag;
    double lr_flag = 0;
    std::size_t epochs_flag = 0, batch_flag = 0;
    auto* t_out = train->add_option("--output-dir", out_flag, "override output dir");
    auto* t_lr = train->add_option("--lr", lr_flag, "override schedule lr");
    auto* t_ep = train->add_option("--epochs", epochs_flag, "override schedule epochs");
    auto* t_bs = train->add_option("--batch-size", batch_flag, "override batch size");
    auto* t_model = train->add_option("--model", model_flag, "override model kind");

    // lr-find
    auto* lrfind = app.add_subcommand("lr-find", "learning-rate range test");
    double lf_start = 1e-7, lf_end = 10.0;
    std::size_t lf_iters = 100;
    std::string lf_csv, lf_svg;
    lrfind->add_option("--lr-start", lf_start, "sweep start rate");
    lrfind->add_option("--lr-end", lf_end, "sweep end rate");
    lrfind->add_option("--max-iters", lf_iters, "sweep length");
    lrfind->add_option("--out", lf_csv, "curve CSV path");
    lrfind->add_option("--svg", lf_svg, "optional SVG plot path");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a saved bundle on labeled data");
    std::string eval_bundle, eval_data;
    evaluate->add_option("--bundle", eval_bundle, "bundle directory")->required();
    evaluate->add_option("--data", eval_data, "folder of <class>/*.txt or CSV");

    // predict
    auto* predict = app.add_subcommand("predict", "predict raw inputs (stdin or --input)");
    std::string pred_bundle, pred_input;
    bool pred_proba = false;
    predict->add_option("--bundle", pred_bundle, "bundle directory")->required();
    predict->add_option("--input", pred_input, "file with one raw input per line");
    predict->add_flag("--proba", pred_proba, "include per-class scores");

    // qa
    auto* qa_cmd = app.add_subcommand("qa", "open-domain question answering");
    qa_cmd->require_subcommand(1);
    auto* qa_index = qa_cmd->add_subcommand("index", "build a search index");
    std::string qi_path, qi_folder, qi_jsonl;
    std::size_t qi_commit = 0;
    qa_index->add_option("--index", qi_path, "index directory")->required();
    qa_index->add_option("--from-folder", qi_folder, "index every file under a folder");
    qa_index->add_option("--from-jsonl", qi_jsonl, "index {\"text\":...} JSON lines");
    qa_index->add_option("--commit-every", qi_commit, "flush postings every N docs");
    auto* qa_ask_cmd = qa_cmd->add_subcommand("ask", "ask a question against an index");
    std::string qa_path, qa_question;
    std::size_t qa_kdocs = 10, qa_kanswers = 5;
    qa_ask_cmd->add_option("--index", qa_path, "index directory")->required();
    qa_ask_cmd->add_option("question", qa_question, "natural-language question")->required();
    qa_ask_cmd->add_option("--k-docs", qa_kdocs, "documents to retrieve");
    qa_ask_cmd->add_option("--k-answers", qa_kanswers, "answers to keep");

    // topic
    auto* topic_cmd = app.add_subcommand("topic", "topic model and recommender");
    topic_cmd->require_subcommand(1);
    auto* topic_build = topic_cmd->add_subcommand("build", "fit topic model and recommender");
    std::string tb_docs, tb_out;
    std::size_t tb_topics = 20, tb_features = 10000, tb_min_df = 2;
    double tb_threshold = 0.25;
    topic_build->add_option("--docs", tb_docs, "folder or JSONL of documents")->required();
    topic_build->add_option("--out", tb_out, "output model directory")->required();
    topic_build->add_option("--n-topics", tb_topics, "number of topics");
    topic_build->add_option("--n-features", tb_features, "vocabulary cap");
    topic_build->add_option("--threshold", tb_threshold, "keep threshold on proportions");
    topic_build->add_option("--min-df", tb_min_df, "minimum document frequency");
    auto* topic_rec = topic_cmd->add_subcommand("recommend", "recommend similar documents");
    std::string tr_model, tr_text;
    std::size_t tr_n = 5;
    topic_rec->add_option("--model", tr_model, "model directory")->required();
    topic_rec->add_option("--text-file", tr_text, "query text file (stdin otherwise)");
    topic_rec->add_option("-n", tr_n, "number of recommendations");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: config: " << e.what() << '\n';
        return 2;
    }

    if (seed_opt->count()) overrides.seed = seed_flag;
    if (t_out->count()) overrides.output_dir = out_flag;
    if (t_lr->count()) overrides.lr = lr_flag;
    if (t_ep->count()) overrides.epochs = epochs_flag;
    if (t_bs->count()) overrides.batch_size = batch_flag;
    if (t_model->count()) overrides.model = model_flag;

    try {
        if (train->parsed()) {
            if (config_path.empty()) throw ConfigError("train needs --config");
            return cmd_train(config_path, overrides, quiet);
        }
        if (lrfind->parsed()) {
            if (config_path.empty()) throw ConfigError("lr-find needs --config");
            return cmd_lr_find(config_path, overrides, lf_start, lf_end, lf_iters, lf_csv,
                               lf_svg, quiet);
        }
        if (evaluate->parsed()) return cmd_evaluate(eval_bundle, eval_data, as_json);
        if (predict->parsed()) return cmd_predict(pred_bundle, pred_input, pred_proba, as_json);
        if (qa_index->parsed()) return cmd_qa_index(qi_path, qi_folder, qi_jsonl, qi_commit, quiet);
        if (qa_ask_cmd->parsed())
            return cmd_qa_ask(qa_path, qa_question, qa_kdocs, qa_kanswers, as_json);
        if (topic_build->parsed())
            return cmd_topic_build(tb_docs, tb_out, tb_topics, tb_features, tb_threshold,
                                   seed_opt->count() ? seed_flag : 42, tb_min_df, quiet);
        if (topic_rec->parsed()) return cmd_topic_recommend(tr_model, tr_text, tr_n, as_json);
        throw ConfigError("no command");
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return 2;
    } catch (const lowml::DivergenceError& e) {
        std::cerr << "error: training: " << e.what() << '\n';
        return 4;
    } catch (const lowml::DataError& e) {
        std::cerr << "error: data: " << e.what() << '\n';
        return 3;
    } catch (const lowml::BundleMissingFileError& e) {
        std::cerr << "error: data: " << e.what() << '\n';
        return 3;
    } catch (const lowml::BundleChecksumError& e) {
        std::cerr << "error: data: " << e.what() << '\n';
        return 3;
    } catch (const lowml::BundleVersionError& e) {
        std::cerr << "error: data: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (...) {
        std::cerr << "error: unknown failure\n";
        return 1;
    }
}

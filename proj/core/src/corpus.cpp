#include "lowml/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lowml/errors.hpp"
#include "lowml/rng.hpp"

namespace fs = std::filesystem;

namespace lowml {

std::string to_string(TaskType t) {
    switch (t) {
        case TaskType::Multiclass: return "multiclass";
        case TaskType::Multilabel: return "multilabel";
        case TaskType::Regression: return "regression";
    }
    return "?";
}

TaskType task_type_from_string(const std::string& s) {
    if (s == "multiclass") return TaskType::Multiclass;
    if (s == "multilabel") return TaskType::Multilabel;
    if (s == "regression") return TaskType::Regression;
    throw DataError("unknown task type: " + s);
}

RawTargets RawTargets::from_labels(const std::vector<std::string>& single) {
    RawTargets t;
    t.labels.reserve(single.size());
    for (const auto& s : single) t.labels.push_back({s});
    return t;
}

RawTargets RawTargets::from_label_sets(std::vector<std::vector<std::string>> sets) {
    RawTargets t;
    t.labels = std::move(sets);
    return t;
}

RawTargets RawTargets::from_values(const std::vector<double>& single) {
    RawTargets t;
    t.numeric.reserve(single.size());
    for (double v : single) t.numeric.push_back({v});
    return t;
}

RawTargets RawTargets::from_value_rows(std::vector<std::vector<double>> rows) {
    RawTargets t;
    t.numeric = std::move(rows);
    return t;
}

TaskKind inspect_targets(const RawTargets& targets) {
    if (targets.size() == 0) throw DataError("inspect_targets: empty targets");
    if (!targets.numeric.empty() && !targets.labels.empty())
        throw DataError("inspect_targets: mixed numeric and token targets");
    if (targets.is_numeric()) {
        std::size_t width = targets.numeric.front().size();
        bool integral = true;
        std::set<double> distinct;
        for (const auto& row : targets.numeric) {
            if (row.size() != width)
                throw DataError("inspect_targets: ragged numeric target rows");
            for (double v : row) {
                if (!std::isfinite(v)) throw DataError("inspect_targets: non-finite target");
                if (v != std::floor(v)) integral = false;
                distinct.insert(v);
            }
        }
        if (width > 1 || !integral || distinct.size() > 20)
            return {TaskType::Regression, width};
        // Small set of integers: treat as class ids.
        return {TaskType::Multiclass, std::max<std::size_t>(distinct.size(), 2)};
    }
    std::set<std::string> distinct;
    bool any_multi = false;
    for (const auto& set : targets.labels) {
        if (set.empty()) throw DataError("inspect_targets: example with no label");
        if (set.size() > 1) any_multi = true;
        for (const auto& l : set) distinct.insert(l);
    }
    if (distinct.size() < 2) throw DataError("inspect_targets: need >= 2 distinct labels");
    return {any_multi ? TaskType::Multilabel : TaskType::Multiclass, distinct.size()};
}

std::vector<std::string> collect_labels(const RawTargets& targets) {
    std::set<std::string> s;
    if (targets.is_numeric()) {
        for (const auto& row : targets.numeric)
            for (double v : row) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%g", v);
                s.insert(buf);
            }
    } else {
        for (const auto& set : targets.labels)
            for (const auto& l : set) s.insert(l);
    }
    return {s.begin(), s.end()};
}

Tensor encode_targets(const RawTargets& targets, const TaskKind& task,
                      const std::vector<std::string>& labels) {
    std::size_t n = targets.size();
    Tensor out = Tensor::zeros({n, task.n_outputs});
    if (task.type == TaskType::Regression) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto& row = targets.numeric[i];
            if (row.size() != task.n_outputs)
                throw DataError("target row width mismatch at row " + std::to_string(i));
            for (std::size_t k = 0; k < row.size(); ++k) out(i, k) = row[k];
        }
        return out;
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < labels.size(); ++k) index[labels[k]] = k;
    auto label_of = [&](std::size_t i) -> std::vector<std::string> {
        if (!targets.is_numeric()) return targets.labels[i];
        std::vector<std::string> out_labels;
        for (double v : targets.numeric[i]) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%g", v);
            out_labels.push_back(buf);
        }
        return out_labels;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& l : label_of(i)) {
            auto it = index.find(l);
            if (it == index.end()) throw DataError("unknown label '" + l + "'");
            out(i, it->second) = 1.0;
        }
        if (task.type == TaskType::Multiclass) {
            double s = 0;
            for (std::size_t k = 0; k < task.n_outputs; ++k) s += out(i, k);
            if (s != 1.0)
                throw DataError("multiclass example with " + std::to_string(s) +
                                " labels at row " + std::to_string(i));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Text featurization

TextPreprocessor fit_text_preprocessor(const std::vector<std::string>& texts,
                                       TokenizerMode mode,
                                       const FeaturizerOptions& opts) {
    TextPreprocessor p;
    p.mode = mode;
    p.ngram_lo = opts.ngram_lo;
    p.ngram_hi = opts.ngram_hi;
    p.maxlen = opts.maxlen;

    std::map<std::string, std::size_t> df;  // ordered: deterministic ties
    for (const auto& text : texts) {
        auto base = base_tokens(text, mode, opts.maxlen);
        auto grams = ngram_tokens(base, opts.ngram_lo, opts.ngram_hi);
        std::sort(grams.begin(), grams.end());
        grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
        for (auto& g : grams) ++df[g];
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [tok, d] : df)
        if (d >= opts.min_df) kept.emplace_back(tok, d);
    if (opts.max_features > 0 && kept.size() > opts.max_features) {
        // Keep the most frequent; ties resolved lexicographically.
        std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        kept.resize(opts.max_features);
        std::sort(kept.begin(), kept.end());
    }
    double n_docs = static_cast<double>(texts.size());
    p.vocab.reserve(kept.size());
    p.idf.reserve(kept.size());
    for (auto& [tok, d] : kept) {
        p.vocab.push_back(tok);
        p.idf.push_back(std::log((1.0 + n_docs) / (1.0 + static_cast<double>(d))) + 1.0);
    }
    p.rebuild_index();
    return p;
}

void TextPreprocessor::rebuild_index() {
    vocab_index.clear();
    vocab_index.reserve(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i)
        vocab_index.emplace(vocab[i], static_cast<std::uint32_t>(i));
}

std::optional<std::size_t> TextPreprocessor::label_index(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return i;
    return std::nullopt;
}

SparseVector TextPreprocessor::transform(const std::string& text) const {
    auto base = base_tokens(text, mode, maxlen);
    auto grams = ngram_tokens(base, ngram_lo, ngram_hi);
    std::map<std::uint32_t, double> counts;
    for (const auto& g : grams) {
        auto it = vocab_index.find(g);
        if (it != vocab_index.end()) counts[it->second] += 1.0;
    }
    SparseVector out;
    out.reserve(counts.size());
    double norm2 = 0.0;
    for (auto& [c, cnt] : counts) {
        double w = cnt * idf[c];
        out.emplace_back(c, w);
        norm2 += w * w;
    }
    if (norm2 > 0.0) {
        double inv = 1.0 / std::sqrt(norm2);
        for (auto& [c, w] : out) w *= inv;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Folder loader

namespace {

std::string read_bytes_or_throw(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read file: " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct LoadedSplit {
    std::vector<std::string> texts;
    std::vector<std::string> classes;  // per document
    std::vector<std::string> sources;
    std::map<std::string, std::size_t> encodings_seen;
};

LoadedSplit load_split(const fs::path& root, const std::string& split,
                       std::vector<std::string>* class_names, bool first_split) {
    fs::path split_dir = root / split;
    if (!fs::is_directory(split_dir))
        throw DataError("missing split folder: " + split_dir.string());

    std::vector<std::string> found;
    for (const auto& e : fs::directory_iterator(split_dir))
        if (e.is_directory()) found.push_back(e.path().filename().string());
    std::sort(found.begin(), found.end());

    if (first_split) {
        if (found.size() < 2)
            throw DataError("need >= 2 classes under " + split_dir.string() + ", found " +
                            std::to_string(found.size()));
        *class_names = found;
    } else {
        for (const auto& c : found)
            if (std::find(class_names->begin(), class_names->end(), c) == class_names->end())
                throw DataError("class '" + c + "' present in split '" + split +
                                "' but absent from training");
    }

    LoadedSplit out;
    std::vector<std::pair<std::string, std::string>> files;  // (rel path, class)
    for (const auto& cls : found) {
        fs::path cls_dir = split_dir / cls;
        for (const auto& e : fs::directory_iterator(cls_dir)) {
            if (e.is_directory())
                throw DataError("nested class subfolders unsupported: " + e.path().string());
            if (e.path().extension() != ".txt") continue;
            files.emplace_back((fs::path(split) / cls / e.path().filename()).generic_string(),
                               cls);
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& [rel, cls] : files) {
        std::string bytes = read_bytes_or_throw(root / rel);
        if (bytes.empty()) {
            out.texts.emplace_back();
            out.encodings_seen["utf-8"]++;
        } else {
            DecodedText d = decode_bytes(bytes, rel);
            out.texts.push_back(std::move(d.text));
            out.encodings_seen[d.encoding]++;
        }
        out.classes.push_back(cls);
        out.sources.push_back(rel);
    }
    return out;
}

std::string majority_encoding(const std::map<std::string, std::size_t>& seen) {
    std::string best = "utf-8";
    std::size_t best_n = 0;
    for (const auto& [enc, n] : seen)
        if (n > best_n || (n == best_n && enc < best)) { best = enc; best_n = n; }
    return best;
}

Dataset assemble_text_dataset(const std::vector<std::string>& texts,
                              const RawTargets& targets,
                              const std::vector<std::string>& sources,
                              const TextPreprocessor& preproc) {
    Dataset d;
    d.features.n_cols = preproc.n_features();
    for (const auto& t : texts) d.features.append_row(preproc.transform(t));
    d.targets = encode_targets(targets, preproc.task, preproc.labels);
    d.sources = sources;
    return d;
}

}  // namespace

TextCorpusResult texts_from_folder(const std::string& root, const FolderLoadOptions& opts) {
    if (opts.split_names.size() != 2)
        throw DataError("texts_from_folder: exactly two split names expected");
    fs::path root_path(root);
    if (!fs::is_directory(root_path)) throw DataError("missing data folder: " + root);

    std::vector<std::string> class_names;
    LoadedSplit train = load_split(root_path, opts.split_names[0], &class_names, true);
    LoadedSplit val = load_split(root_path, opts.split_names[1], &class_names, false);
    if (train.texts.empty()) throw DataError("no .txt documents under training split");

    std::string all_train;
    for (const auto& t : train.texts) { all_train += t; all_train += '\n'; }
    TokenizerMode mode = cjk_fraction(all_train) > opts.cjk_threshold
                             ? TokenizerMode::CharNgram
                             : TokenizerMode::Word;

    TextPreprocessor preproc = fit_text_preprocessor(train.texts, mode, opts.featurizer);
    preproc.labels = class_names;
    preproc.task = {TaskType::Multiclass, class_names.size()};
    preproc.encoding = majority_encoding(train.encodings_seen);
    preproc.cjk_threshold = opts.cjk_threshold;

    TextCorpusResult out;
    out.train = assemble_text_dataset(train.texts, RawTargets::from_labels(train.classes),
                                      train.sources, preproc);
    out.val = assemble_text_dataset(val.texts, RawTargets::from_labels(val.classes),
                                    val.sources, preproc);
    out.preproc = std::move(preproc);
    return out;
}

TextCorpusResult texts_from_array(const std::vector<std::string>& texts,
                                  const RawTargets& targets, const ArrayLoadOptions& opts) {
    if (texts.size() != targets.size())
        throw DataError("texts_from_array: " + std::to_string(texts.size()) + " texts vs " +
                        std::to_string(targets.size()) + " targets");
    if (texts.size() < 4) throw DataError("texts_from_array: need at least 4 examples");
    if (!(opts.val_fraction > 0.0 && opts.val_fraction < 0.5))
        throw DataError("texts_from_array: val_fraction must be in (0, 0.5)");
    for (std::size_t i = 0; i < texts.size(); ++i)
        if (texts[i].empty())
            throw DataError("texts_from_array: empty text at index " + std::to_string(i));

    std::size_t n = texts.size();
    std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * opts.val_fraction)));
    Rng rng(opts.seed);
    std::vector<std::size_t> perm = rng.permutation(n);
    std::vector<std::size_t> val_idx(perm.begin(), perm.begin() + static_cast<long>(n_val));
    std::vector<std::size_t> train_idx(perm.begin() + static_cast<long>(n_val), perm.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    auto subset_texts = [&](const std::vector<std::size_t>& idx) {
        std::vector<std::string> out;
        out.reserve(idx.size());
        for (std::size_t i : idx) out.push_back(texts[i]);
        return out;
    };
    auto subset_targets = [&](const std::vector<std::size_t>& idx) {
        RawTargets out;
        for (std::size_t i : idx) {
            if (targets.is_numeric()) out.numeric.push_back(targets.numeric[i]);
            else out.labels.push_back(targets.labels[i]);
        }
        return out;
    };
    auto subset_sources = [&](const std::vector<std::size_t>& idx) {
        std::vector<std::string> out;
        out.reserve(idx.size());
        for (std::size_t i : idx) out.push_back(std::to_string(i));
        return out;
    };

    std::vector<std::string> train_texts = subset_texts(train_idx);
    RawTargets train_targets = subset_targets(train_idx);

    TaskKind task = inspect_targets(targets);

    std::string all_train;
    for (const auto& t : train_texts) { all_train += t; all_train += '\n'; }
    TokenizerMode mode = cjk_fraction(all_train) > opts.cjk_threshold
                             ? TokenizerMode::CharNgram
                             : TokenizerMode::Word;

    TextPreprocessor preproc = fit_text_preprocessor(train_texts, mode, opts.featurizer);
    preproc.task = task;
    preproc.labels = task.type == TaskType::Regression ? std::vector<std::string>{}
                                                       : collect_labels(targets);
    preproc.split_seed = opts.seed;
    preproc.cjk_threshold = opts.cjk_threshold;

    TextCorpusResult out;
    out.train = assemble_text_dataset(train_texts, train_targets,
                                      subset_sources(train_idx), preproc);
    out.val = assemble_text_dataset(subset_texts(val_idx), subset_targets(val_idx),
                                    subset_sources(val_idx), preproc);
    out.preproc = std::move(preproc);
    return out;
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::vector<std::string>> parse_csv(std::string_view content) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool in_quotes = false;
    bool cell_started = false;
    std::size_t i = 0;
    auto end_cell = [&]() {
        row.push_back(std::move(cell));
        cell.clear();
        cell_started = false;
    };
    auto end_row = [&]() {
        end_cell();
        rows.push_back(std::move(row));
        row.clear();
    };
    while (i < content.size()) {
        char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    cell.push_back('"');
                    i += 2;
                    continue;
                }
                in_quotes = false;
                ++i;
                continue;
            }
            cell.push_back(c);
            ++i;
            continue;
        }
        if (c == '"') {
            if (cell_started && !cell.empty())
                throw DataError("CSV: quote inside unquoted cell near offset " +
                                std::to_string(i));
            in_quotes = true;
            cell_started = true;
            ++i;
            continue;
        }
        if (c == ',') { end_cell(); ++i; continue; }
        if (c == '\r') {
            if (i + 1 < content.size() && content[i + 1] == '\n') { end_row(); i += 2; }
            else { end_row(); ++i; }
            continue;
        }
        if (c == '\n') { end_row(); ++i; continue; }
        cell.push_back(c);
        cell_started = true;
        ++i;
    }
    if (in_quotes) throw DataError("CSV: unterminated quoted cell");
    if (cell_started || !row.empty()) end_row();
    return rows;
}

std::vector<std::string> parse_csv_line(const std::string& line) {
    auto rows = parse_csv(line);
    if (rows.empty()) return {};
    return rows.front();
}

std::string csv_escape(const std::string& cell) {
    if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

// ---------------------------------------------------------------------------
// Tabular loader

namespace {

bool parse_number(const std::string& s, double* out) {
    if (s.empty()) return false;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return false;
    if (!std::isfinite(v)) return false;  // keep datasets NaN/Inf-free
    *out = v;
    return true;
}

}  // namespace

SparseVector TabularPreprocessor::transform(const std::vector<std::string>& cells) const {
    if (cells.size() != input_columns.size())
        throw DataError("tabular row width " + std::to_string(cells.size()) + ", expected " +
                        std::to_string(input_columns.size()) + " feature columns");
    SparseVector out;
    out.reserve(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const TabularColumn& col = columns[c];
        const std::string& cell = cells[col.input_pos];
        if (col.kind == ColumnKind::Numeric) {
            double v;
            if (cell.empty()) {
                v = col.mean;  // mean-impute missing
            } else if (!parse_number(cell, &v)) {
                throw DataError("non-numeric value '" + cell + "' in numeric column '" +
                                col.name + "'");
            }
            out.emplace_back(static_cast<std::uint32_t>(col.offset), (v - col.mean) / col.stdev);
        } else {
            auto it = std::lower_bound(col.categories.begin(), col.categories.end(), cell);
            std::size_t slot;
            if (it != col.categories.end() && *it == cell)
                slot = static_cast<std::size_t>(it - col.categories.begin());
            else
                slot = col.categories.size();  // UNKNOWN bucket
            out.emplace_back(static_cast<std::uint32_t>(col.offset + slot), 1.0);
        }
    }
    return out;
}

SparseVector TabularPreprocessor::transform_csv_row(const std::string& line) const {
    return transform(parse_csv_line(line));
}

TabularCorpusResult tabular_from_csv(const std::string& path,
                                     const std::vector<std::string>& label_columns,
                                     const CsvLoadOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read CSV: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    auto rows = parse_csv(ss.str());
    if (rows.size() < 2) throw DataError("CSV needs a header row and at least one data row");

    const auto& header = rows.front();
    {
        std::set<std::string> seen;
        for (const auto& h : header)
            if (!seen.insert(h).second) throw DataError("duplicate header name: " + h);
    }
    std::vector<std::size_t> label_idx;
    for (const auto& lc : label_columns) {
        auto it = std::find(header.begin(), header.end(), lc);
        if (it == header.end()) throw DataError("label column not in header: " + lc);
        label_idx.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    if (label_idx.empty()) throw DataError("no label columns given");

    std::vector<std::size_t> feature_idx;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (std::find(label_idx.begin(), label_idx.end(), c) == label_idx.end())
            feature_idx.push_back(c);

    std::size_t n = rows.size() - 1;
    if (n < 4) throw DataError("tabular_from_csv: need at least 4 data rows");
    for (std::size_t r = 1; r < rows.size(); ++r)
        if (rows[r].size() != header.size())
            throw DataError("CSV row " + std::to_string(r + 1) + " has " +
                            std::to_string(rows[r].size()) + " cells, header has " +
                            std::to_string(header.size()));

    if (!(opts.val_fraction > 0.0 && opts.val_fraction < 0.5))
        throw DataError("tabular_from_csv: val_fraction must be in (0, 0.5)");
    std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * opts.val_fraction)));
    Rng rng(opts.seed);
    auto perm = rng.permutation(n);
    std::vector<std::size_t> val_rows(perm.begin(), perm.begin() + static_cast<long>(n_val));
    std::vector<std::size_t> train_rows(perm.begin() + static_cast<long>(n_val), perm.end());
    std::sort(val_rows.begin(), val_rows.end());
    std::sort(train_rows.begin(), train_rows.end());

    // Infer column kinds from the training split: numeric iff every
    // non-missing cell parses as a number.
    TabularPreprocessor preproc;
    preproc.header = header;
    preproc.label_columns = label_columns;
    preproc.split_seed = opts.seed;

    for (std::size_t c : feature_idx) preproc.input_columns.push_back(header[c]);

    std::size_t offset = 0;
    std::size_t input_pos = 0;
    for (std::size_t c : feature_idx) {
        bool numeric = true;
        bool any_value = false;
        for (std::size_t r : train_rows) {
            const std::string& cell = rows[r + 1][c];
            if (cell.empty()) continue;
            any_value = true;
            double v;
            if (!parse_number(cell, &v)) { numeric = false; break; }
        }
        if (!any_value) numeric = false;  // all-missing: treat as categorical
        TabularColumn col;
        col.name = header[c];
        col.input_pos = input_pos++;
        if (numeric) {
            col.kind = ColumnKind::Numeric;
            double sum = 0.0;
            std::size_t cnt = 0;
            for (std::size_t r : train_rows) {
                const std::string& cell = rows[r + 1][c];
                if (cell.empty()) continue;
                double v = 0.0;
                parse_number(cell, &v);
                sum += v;
                ++cnt;
            }
            col.mean = sum / static_cast<double>(cnt);
            double ss2 = 0.0;
            for (std::size_t r : train_rows) {
                const std::string& cell = rows[r + 1][c];
                if (cell.empty()) continue;
                double v = 0.0;
                parse_number(cell, &v);
                ss2 += (v - col.mean) * (v - col.mean);
            }
            double var = ss2 / static_cast<double>(cnt);  // population variance
            if (var <= 0.0) {
                preproc.dropped_columns.push_back(col.name);
                continue;
            }
            col.stdev = std::sqrt(var);
        } else {
            col.kind = ColumnKind::Categorical;
            std::set<std::string> values;
            for (std::size_t r : train_rows) values.insert(rows[r + 1][c]);
            col.categories.assign(values.begin(), values.end());
        }
        col.offset = offset;
        offset += col.width();
        preproc.columns.push_back(std::move(col));
    }

    for (const auto& col : preproc.columns) {
        if (col.kind == ColumnKind::Numeric) {
            preproc.feature_names.push_back(col.name);
        } else {
            for (const auto& v : col.categories)
                preproc.feature_names.push_back(col.name + "=" + v);
            preproc.feature_names.push_back(col.name + "=<UNKNOWN>");
        }
    }

    // Targets.
    RawTargets targets;
    bool labels_numeric = true;
    for (std::size_t r = 1; r < rows.size() && labels_numeric; ++r)
        for (std::size_t c : label_idx) {
            double v;
            if (!parse_number(rows[r][c], &v)) { labels_numeric = false; break; }
        }
    if (opts.task_override && *opts.task_override == TaskType::Regression && !labels_numeric)
        throw DataError("regression requested but label column has non-numeric values");
    bool as_regression;
    if (opts.task_override)
        as_regression = *opts.task_override == TaskType::Regression;
    else {
        if (labels_numeric) {
            RawTargets probe;
            for (std::size_t r = 1; r < rows.size(); ++r) {
                std::vector<double> vals;
                for (std::size_t c : label_idx) {
                    double v = 0.0;
                    parse_number(rows[r][c], &v);
                    vals.push_back(v);
                }
                probe.numeric.push_back(std::move(vals));
            }
            as_regression = inspect_targets(probe).type == TaskType::Regression;
        } else {
            as_regression = false;
        }
    }
    if (as_regression) {
        for (std::size_t r = 1; r < rows.size(); ++r) {
            std::vector<double> vals;
            for (std::size_t c : label_idx) {
                double v;
                if (!parse_number(rows[r][c], &v))
                    throw DataError("non-numeric regression target at row " + std::to_string(r + 1));
                vals.push_back(v);
            }
            targets.numeric.push_back(std::move(vals));
        }
    } else {
        if (label_idx.size() != 1)
            throw DataError("classification from CSV expects a single label column");
        for (std::size_t r = 1; r < rows.size(); ++r)
            targets.labels.push_back({rows[r][label_idx[0]]});
    }

    TaskKind task = as_regression
                        ? TaskKind{TaskType::Regression, label_idx.size()}
                        : TaskKind{TaskType::Multiclass, collect_labels(targets).size()};
    if (!as_regression && task.n_outputs < 2)
        throw DataError("tabular classification needs >= 2 distinct labels");
    preproc.task = task;
    preproc.labels = as_regression ? std::vector<std::string>{} : collect_labels(targets);

    auto build_split = [&](const std::vector<std::size_t>& idx) {
        Dataset d;
        d.features.n_cols = preproc.n_features();
        RawTargets t;
        for (std::size_t r : idx) {
            std::vector<std::string> cells;
            cells.reserve(feature_idx.size());
            for (std::size_t c : feature_idx) cells.push_back(rows[r + 1][c]);
            d.features.append_row(preproc.transform(cells));
            if (as_regression) t.numeric.push_back(targets.numeric[r]);
            else t.labels.push_back(targets.labels[r]);
            d.sources.push_back(std::to_string(r));
        }
        d.targets = encode_targets(t, preproc.task, preproc.labels);
        return d;
    };

    TabularCorpusResult out;
    out.train = build_split(train_rows);
    out.val = build_split(val_rows);
    out.preproc = std::move(preproc);
    return out;
}

}  // namespace lowml

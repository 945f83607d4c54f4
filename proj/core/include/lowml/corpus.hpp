#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "lowml/sparse.hpp"
#include "lowml/tensor.hpp"
#include "lowml/text.hpp"

namespace lowml {

enum class TaskType { Multiclass, Multilabel, Regression };

std::string to_string(TaskType t);
TaskType task_type_from_string(const std::string& s);

struct TaskKind {
    TaskType type = TaskType::Multiclass;
    std::size_t n_outputs = 0;
};

struct RawDocument {
    std::string text;
    std::vector<std::string> labels;
    std::vector<double> values;
    std::string source;
};

// Raw targets before task inspection: one entry per example, either label
// tokens or numeric values (never mixed).
struct RawTargets {
    std::vector<std::vector<std::string>> labels;  // used when numeric is empty
    std::vector<std::vector<double>> numeric;

    bool is_numeric() const { return !numeric.empty(); }
    std::size_t size() const { return is_numeric() ? numeric.size() : labels.size(); }

    static RawTargets from_labels(const std::vector<std::string>& single);
    static RawTargets from_label_sets(std::vector<std::vector<std::string>> sets);
    static RawTargets from_values(const std::vector<double>& single);
    static RawTargets from_value_rows(std::vector<std::vector<double>> rows);
};

// Decides the task from raw targets. All-numeric targets are REGRESSION
// unless every value is integral and there are at most 20 distinct values
// (then the integers are treated as class tokens). Mixed numeric/token
// targets throw DataError.
TaskKind inspect_targets(const RawTargets& targets);

struct Dataset {
    SparseMatrix features;             // n x V
    Tensor targets;                    // n x n_outputs
    std::vector<std::string> sources;  // per-row origin tags

    std::size_t size() const { return features.n_rows; }
};

struct FeaturizerOptions {
    std::size_t maxlen = 512;
    int ngram_lo = 1;
    int ngram_hi = 2;
    std::size_t max_features = 10000;
    std::size_t min_df = 2;
};

struct TextPreprocessor {
    TokenizerMode mode = TokenizerMode::Word;
    int ngram_lo = 1;
    int ngram_hi = 2;
    std::size_t maxlen = 512;
    std::vector<std::string> vocab;  // position = column index
    std::unordered_map<std::string, std::uint32_t> vocab_index;
    std::vector<double> idf;         // |vocab| entries
    std::vector<std::string> labels; // position = output index
    TaskKind task;
    std::string encoding = "utf-8";
    double cjk_threshold = 0.30;
    std::uint64_t split_seed = 42;

    std::size_t n_features() const { return vocab.size(); }

    // Pure: tf-idf counts over the frozen vocabulary, L2-normalized.
    SparseVector transform(const std::string& text) const;

    std::optional<std::size_t> label_index(const std::string& label) const;

    void rebuild_index();  // after deserialization
};

enum class ColumnKind { Numeric, Categorical };

struct TabularColumn {
    std::string name;
    std::size_t input_pos = 0;  // position among the input feature cells
    ColumnKind kind = ColumnKind::Numeric;
    // Numeric: training-set statistics (population std).
    double mean = 0.0;
    double stdev = 1.0;
    // Categorical: sorted distinct training values; one output column per
    // value plus a trailing UNKNOWN column.
    std::vector<std::string> categories;
    std::size_t offset = 0;  // first output column of this block

    std::size_t width() const {
        return kind == ColumnKind::Numeric ? 1 : categories.size() + 1;
    }
};

struct TabularPreprocessor {
    std::vector<std::string> header;          // original CSV header
    std::vector<std::string> label_columns;
    std::vector<std::string> input_columns;   // feature cells expected by transform
    std::vector<TabularColumn> columns;       // active columns, layout order
    std::vector<std::string> dropped_columns; // zero-variance numerics
    std::vector<std::string> feature_names;   // flattened output columns
    std::vector<std::string> labels;
    TaskKind task;
    std::string missing_value_policy = "numeric:mean-impute;categorical:literal";
    std::uint64_t split_seed = 42;

    std::size_t n_features() const { return feature_names.size(); }

    // `cells` are the feature columns in `input_columns` order (label
    // columns removed; dropped columns still present and ignored). Throws
    // DataError on width mismatch or a non-numeric value in a numeric
    // column.
    SparseVector transform(const std::vector<std::string>& cells) const;

    // Convenience: parse one RFC-4180 line that carries exactly the feature
    // columns in original header order (labels stripped).
    SparseVector transform_csv_row(const std::string& line) const;
};

using Preprocessor = std::variant<TextPreprocessor, TabularPreprocessor>;

struct TextCorpusResult {
    Dataset train;
    Dataset val;
    TextPreprocessor preproc;
};

struct FolderLoadOptions {
    std::vector<std::string> split_names{"train", "test"};
    FeaturizerOptions featurizer;
    double cjk_threshold = 0.30;
};

// <root>/<split>/<class>/*.txt. Classes come from the first split's sorted
// subfolder names; the vocabulary is built from the first split only; rows
// are ordered by sorted relative path. Rejects nested class subfolders and
// classes present in the validation split but absent from training.
TextCorpusResult texts_from_folder(const std::string& root,
                                   const FolderLoadOptions& opts = {});

struct ArrayLoadOptions {
    double val_fraction = 0.1;
    std::uint64_t seed = 42;
    FeaturizerOptions featurizer;
    double cjk_threshold = 0.30;
};

TextCorpusResult texts_from_array(const std::vector<std::string>& texts,
                                  const RawTargets& targets,
                                  const ArrayLoadOptions& opts = {});

struct TabularCorpusResult {
    Dataset train;
    Dataset val;
    TabularPreprocessor preproc;
};

struct CsvLoadOptions {
    double val_fraction = 0.1;
    std::uint64_t seed = 42;
    std::optional<TaskType> task_override;  // set by CLI task selection
};

TabularCorpusResult tabular_from_csv(const std::string& path,
                                     const std::vector<std::string>& label_columns,
                                     const CsvLoadOptions& opts = {});

// RFC-4180: header row, '"' quoting, CRLF or LF. Throws DataError on
// malformed quoting or duplicate header names (when check_header).
std::vector<std::vector<std::string>> parse_csv(std::string_view content);
std::vector<std::string> parse_csv_line(const std::string& line);
std::string csv_escape(const std::string& cell);

// Builds a frozen text preprocessor (vocabulary, idf, labels) from training
// texts only. Shared by the corpus loaders and the topic model.
TextPreprocessor fit_text_preprocessor(const std::vector<std::string>& texts,
                                       TokenizerMode mode,
                                       const FeaturizerOptions& opts);

// One-hot / {0,1} / numeric target rows for a task.
Tensor encode_targets(const RawTargets& targets, const TaskKind& task,
                      const std::vector<std::string>& labels);

// Sorted distinct label tokens.
std::vector<std::string> collect_labels(const RawTargets& targets);

}  // namespace lowml

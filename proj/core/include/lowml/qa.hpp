#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace lowml::qa {

inline constexpr std::uint32_t kIndexFormatVersion = 1;
inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;

struct Posting {
    std::uint32_t doc_id = 0;
    std::uint32_t tf = 0;
};

struct StoredDoc {
    std::uint32_t id = 0;
    std::string reference;  // list position or relative file path
    std::string text;
    std::uint32_t length = 0;  // tokens
};

struct ScoredDoc {
    std::uint32_t doc_id = 0;
    double score = 0.0;
};

struct IndexSummary {
    std::size_t n_indexed = 0;
    std::size_t n_skipped = 0;  // unreadable files (folder mode)
};

// Persistent inverted index: manifest.json + docstore.jsonl + postings.bin.
// Single writer until commit; immutable and read-concurrent afterwards.
class SearchIndex {
public:
    // Creates an empty, uncommitted index directory. Refuses to clobber an
    // existing non-empty path.
    static SearchIndex initialize(const std::string& path);

    // Opens an existing index directory.
    static SearchIndex open(const std::string& path);

    IndexSummary add_documents(const std::vector<std::string>& docs,
                               std::size_t commit_every = 0);
    IndexSummary add_folder(const std::string& folder, std::size_t commit_every = 0);

    void commit();

    // BM25 top-k over committed postings; ties broken by doc_id. Throws
    // DataError when the index is not committed.
    std::vector<ScoredDoc> search(const std::string& query, std::size_t k) const;

    bool committed() const { return committed_; }
    std::size_t n_docs() const { return docs_.size(); }
    double avg_doc_length() const;
    const StoredDoc& doc(std::uint32_t id) const { return docs_[id]; }
    const std::string& path() const { return path_; }

private:
    SearchIndex() = default;
    void flush() const;
    void index_one(const std::string& text, std::string reference);

    std::string path_;
    bool committed_ = false;
    std::vector<StoredDoc> docs_;
    // term -> postings; iteration order = on-disk order (term-sorted)
    std::map<std::string, std::vector<Posting>> postings_;
};

// Convenience wrappers mirroring the one-call indexing flow.
SearchIndex index_from_list(const std::vector<std::string>& docs,
                            const std::string& path, std::size_t commit_every = 0);
SearchIndex index_from_folder(const std::string& folder, const std::string& path,
                              std::size_t commit_every = 0);

// Paragraphs: split on blank lines, drop fragments under 3 tokens, split
// pieces over 200 tokens at the sentence boundary nearest 200.
std::vector<std::string> extract_paragraphs(const std::string& text);

struct SpanCandidate {
    std::size_t begin = 0;  // byte offsets into the context
    std::size_t end = 0;
    double score = 0.0;
};

// Scores candidate answer spans within one context. Spans must be
// substrings of the context.
class Reader {
public:
    virtual ~Reader() = default;
    virtual std::vector<SpanCandidate> score_spans(const std::string& question,
                                                   const std::string& context) const = 0;
};

// Default lexical reader: candidate spans are 1-8 token windows free of
// question terms and within 15 tokens of a question-term match;
// score = coverage(question terms in span +/- 15 tokens) / (1 + mean
// distance to the covered terms). The pipeline multiplies in the
// BM25-normalized document prior.
class LexicalReader : public Reader {
public:
    std::vector<SpanCandidate> score_spans(const std::string& question,
                                           const std::string& context) const override;
};

struct Answer {
    std::string text;
    double confidence = 0.0;
    std::string context;
    std::size_t span_begin = 0;  // byte offsets into context
    std::size_t span_end = 0;
    std::string reference;
    std::uint32_t doc_id = 0;
};

struct AskOptions {
    std::size_t k_docs = 10;
    std::size_t k_answers = 5;
};

// search -> extract_paragraphs -> reader -> merge/sort/prune. Deterministic
// order: (-confidence, doc_id, span_begin, span_end). Only answers with
// confidence > 0 are kept.
std::vector<Answer> ask(const SearchIndex& index, const std::string& question,
                        const Reader& reader, const AskOptions& opts = {});

// Lowercase word unigrams (index-side tokenization).
std::vector<std::string> index_tokens(const std::string& text);

}  // namespace lowml::qa

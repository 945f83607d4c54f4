#include "lowml/qa.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lowml/errors.hpp"
#include "lowml/text.hpp"
#include "weights_io.hpp"

namespace fs = std::filesystem;

namespace lowml::qa {

namespace {

const char* kManifestFile = "manifest.json";
const char* kDocStoreFile = "docstore.jsonl";
const char* kPostingsFile = "postings.bin";

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& s, std::size_t& pos) {
    if (pos + 4 > s.size()) throw DataError("postings.bin: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

}  // namespace

std::vector<std::string> index_tokens(const std::string& text) {
    return word_tokens(text);
}

double SearchIndex::avg_doc_length() const {
    if (docs_.empty()) return 0.0;
    double s = 0.0;
    for (const auto& d : docs_) s += d.length;
    return s / static_cast<double>(docs_.size());
}

SearchIndex SearchIndex::initialize(const std::string& path) {
    fs::path p(path);
    if (fs::exists(p)) {
        if (!fs::is_directory(p) || !fs::is_empty(p))
            throw DataError("refusing to initialize index at non-empty path: " + path);
    } else {
        fs::create_directories(p);
    }
    SearchIndex idx;
    idx.path_ = path;
    idx.committed_ = false;
    idx.flush();
    return idx;
}

void SearchIndex::flush() const {
    nlohmann::json manifest;
    manifest["format_version"] = kIndexFormatVersion;
    manifest["n_docs"] = docs_.size();
    manifest["avgdl"] = avg_doc_length();
    manifest["k1"] = kBm25K1;
    manifest["b"] = kBm25B;
    manifest["committed"] = committed_;
    io::write_file((fs::path(path_) / kManifestFile).string(), manifest.dump(2) + "\n");

    std::string store;
    for (const auto& d : docs_) {
        nlohmann::json j;
        j["id"] = d.id;
        j["reference"] = d.reference;
        j["text"] = d.text;
        j["len"] = d.length;
        store += j.dump();
        store += '\n';
    }
    io::write_file((fs::path(path_) / kDocStoreFile).string(), store);

    // Term-sorted binary postings: u32 term count, then per term
    // u32 term length + bytes, u32 df, df x (u32 doc_id, u32 tf).
    std::string bin;
    put_u32(bin, static_cast<std::uint32_t>(postings_.size()));
    for (const auto& [term, plist] : postings_) {
        put_u32(bin, static_cast<std::uint32_t>(term.size()));
        bin += term;
        put_u32(bin, static_cast<std::uint32_t>(plist.size()));
        for (const auto& post : plist) {
            put_u32(bin, post.doc_id);
            put_u32(bin, post.tf);
        }
    }
    io::write_file((fs::path(path_) / kPostingsFile).string(), bin);
}

SearchIndex SearchIndex::open(const std::string& path) {
    fs::path p(path);
    for (const char* f : {kManifestFile, kDocStoreFile, kPostingsFile})
        if (!fs::exists(p / f)) throw DataError("index missing file: " + std::string(f));

    SearchIndex idx;
    idx.path_ = path;

    nlohmann::json manifest =
        nlohmann::json::parse(io::read_file((p / kManifestFile).string()));
    std::uint32_t version = manifest.at("format_version").get<std::uint32_t>();
    if (version > kIndexFormatVersion)
        throw DataError("index format version " + std::to_string(version) + " unsupported");
    idx.committed_ = manifest.at("committed").get<bool>();

    std::istringstream store(io::read_file((p / kDocStoreFile).string()));
    std::string line;
    while (std::getline(store, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        StoredDoc d;
        d.id = j.at("id").get<std::uint32_t>();
        d.reference = j.at("reference").get<std::string>();
        d.text = j.at("text").get<std::string>();
        d.length = j.at("len").get<std::uint32_t>();
        idx.docs_.push_back(std::move(d));
    }

    std::string bin = io::read_file((p / kPostingsFile).string());
    std::size_t pos = 0;
    std::uint32_t n_terms = get_u32(bin, pos);
    for (std::uint32_t t = 0; t < n_terms; ++t) {
        std::uint32_t len = get_u32(bin, pos);
        if (pos + len > bin.size()) throw DataError("postings.bin: truncated term");
        std::string term = bin.substr(pos, len);
        pos += len;
        std::uint32_t df = get_u32(bin, pos);
        std::vector<Posting> plist(df);
        for (std::uint32_t i = 0; i < df; ++i) {
            plist[i].doc_id = get_u32(bin, pos);
            plist[i].tf = get_u32(bin, pos);
        }
        idx.postings_.emplace(std::move(term), std::move(plist));
    }
    return idx;
}

void SearchIndex::index_one(const std::string& text, std::string reference) {
    StoredDoc d;
    d.id = static_cast<std::uint32_t>(docs_.size());
    d.reference = std::move(reference);
    d.text = text;
    auto toks = index_tokens(text);
    d.length = static_cast<std::uint32_t>(toks.size());

    std::map<std::string, std::uint32_t> tf;
    for (auto& t : toks) ++tf[t];
    for (auto& [term, count] : tf) postings_[term].push_back({d.id, count});
    docs_.push_back(std::move(d));
}

IndexSummary SearchIndex::add_documents(const std::vector<std::string>& docs,
                                        std::size_t commit_every) {
    if (committed_) throw DataError("index already committed: " + path_);
    IndexSummary s;
    for (const auto& text : docs) {
        index_one(text, std::to_string(docs_.size()));
        ++s.n_indexed;
        if (commit_every > 0 && s.n_indexed % commit_every == 0) flush();
    }
    commit();
    return s;
}

IndexSummary SearchIndex::add_folder(const std::string& folder, std::size_t commit_every) {
    if (committed_) throw DataError("index already committed: " + path_);
    fs::path root(folder);
    if (!fs::is_directory(root)) throw DataError("missing folder: " + folder);
    std::vector<std::string> rel_paths;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file())
            rel_paths.push_back(fs::relative(e.path(), root).generic_string());
    std::sort(rel_paths.begin(), rel_paths.end());

    IndexSummary s;
    for (const auto& rel : rel_paths) {
        std::ifstream in(root / rel, std::ios::binary);
        if (!in) { ++s.n_skipped; continue; }
        std::ostringstream ss;
        ss << in.rdbuf();
        if (!in.good() && !in.eof()) { ++s.n_skipped; continue; }
        index_one(ss.str(), rel);
        ++s.n_indexed;
        if (commit_every > 0 && s.n_indexed % commit_every == 0) flush();
    }
    commit();
    return s;
}

void SearchIndex::commit() {
    committed_ = true;
    flush();
}

std::vector<ScoredDoc> SearchIndex::search(const std::string& query, std::size_t k) const {
    if (!committed_) throw DataError("index not committed: " + path_);
    if (k < 1) throw DataError("search: k must be >= 1");
    auto q_tokens = index_tokens(query);
    double n_docs = static_cast<double>(docs_.size());
    double avgdl = avg_doc_length();

    std::map<std::uint32_t, double> scores;  // doc_id -> accumulated BM25
    for (const auto& term : q_tokens) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        double df = static_cast<double>(it->second.size());
        double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        for (const auto& post : it->second) {
            double tf = static_cast<double>(post.tf);
            double len = static_cast<double>(docs_[post.doc_id].length);
            double denom = tf + kBm25K1 * (1.0 - kBm25B + kBm25B * len / avgdl);
            scores[post.doc_id] += idf * tf * (kBm25K1 + 1.0) / denom;
        }
    }

    std::vector<ScoredDoc> out;
    out.reserve(scores.size());
    for (const auto& [id, sc] : scores) out.push_back({id, sc});
    std::sort(out.begin(), out.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

SearchIndex index_from_list(const std::vector<std::string>& docs, const std::string& path,
                            std::size_t commit_every) {
    SearchIndex idx = SearchIndex::open(path);
    idx.add_documents(docs, commit_every);
    return idx;
}

SearchIndex index_from_folder(const std::string& folder, const std::string& path,
                              std::size_t commit_every) {
    SearchIndex idx = SearchIndex::open(path);
    idx.add_folder(folder, commit_every);
    return idx;
}

// ---------------------------------------------------------------------------
// Paragraph extraction

namespace {

constexpr std::size_t kMinParagraphTokens = 3;
constexpr std::size_t kMaxParagraphTokens = 200;

bool blank_line(std::string_view line) {
    for (char c : line)
        if (c != ' ' && c != '\t' && c != '\r') return false;
    return true;
}

// Sentence end: '.', '!' or '?' followed by whitespace or end of text.
std::vector<std::size_t> sentence_ends(const std::string& text) {
    std::vector<std::size_t> ends;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        if (i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\n' ||
            text[i + 1] == '\t' || text[i + 1] == '\r')
            ends.push_back(i + 1);
    }
    if (ends.empty() || ends.back() != text.size()) ends.push_back(text.size());
    return ends;
}

std::string trimmed(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Splits an over-long paragraph at the sentence boundaries nearest
// kMaxParagraphTokens; a sentence-free monster splits at hard token
// boundaries.
void split_long_paragraph(const std::string& para, std::vector<std::string>* out) {
    auto ends = sentence_ends(para);
    std::size_t chunk_begin = 0;
    std::size_t chunk_tokens = 0;
    std::size_t prev_end = 0;
    for (std::size_t s = 0; s < ends.size(); ++s) {
        std::size_t sent_begin = prev_end;
        std::size_t sent_end = ends[s];
        prev_end = sent_end;
        std::size_t sent_tokens =
            word_tokens(std::string_view(para).substr(sent_begin, sent_end - sent_begin)).size();
        if (chunk_tokens > 0 && chunk_tokens + sent_tokens > kMaxParagraphTokens) {
            // Boundary choice nearest the cap: include this sentence iff that
            // lands closer to the cap than stopping short.
            std::size_t with = chunk_tokens + sent_tokens;
            bool include =
                with - kMaxParagraphTokens <= kMaxParagraphTokens - chunk_tokens;
            if (include) {
                out->push_back(trimmed(std::string_view(para).substr(
                    chunk_begin, sent_end - chunk_begin)));
                chunk_begin = sent_end;
                chunk_tokens = 0;
                continue;
            }
            out->push_back(trimmed(
                std::string_view(para).substr(chunk_begin, sent_begin - chunk_begin)));
            chunk_begin = sent_begin;
            chunk_tokens = 0;
        }
        // A single sentence beyond the cap (no usable boundary): hard-split.
        if (sent_tokens > kMaxParagraphTokens && chunk_tokens == 0) {
            auto spans = word_token_spans(
                std::string_view(para).substr(sent_begin, sent_end - sent_begin));
            std::size_t piece_begin = sent_begin;
            std::size_t count = 0;
            for (const auto& ts : spans) {
                ++count;
                if (count == kMaxParagraphTokens) {
                    std::size_t cut = sent_begin + ts.end;
                    out->push_back(trimmed(
                        std::string_view(para).substr(piece_begin, cut - piece_begin)));
                    piece_begin = cut;
                    count = 0;
                }
            }
            chunk_begin = piece_begin;
            chunk_tokens = count;
            continue;
        }
        chunk_tokens += sent_tokens;
    }
    if (chunk_begin < para.size()) {
        std::string tail = trimmed(std::string_view(para).substr(chunk_begin));
        if (!tail.empty()) out->push_back(std::move(tail));
    }
}

}  // namespace

std::vector<std::string> extract_paragraphs(const std::string& text) {
    std::vector<std::string> paras;
    std::string current;
    std::istringstream in(text);
    std::string line;
    auto flush_para = [&]() {
        std::string p = trimmed(current);
        current.clear();
        if (p.empty()) return;
        paras.push_back(std::move(p));
    };
    while (std::getline(in, line)) {
        if (blank_line(line)) flush_para();
        else {
            current += line;
            current += '\n';
        }
    }
    flush_para();

    std::vector<std::string> out;
    for (const auto& p : paras) {
        std::size_t n_tokens = word_tokens(p).size();
        if (n_tokens < kMinParagraphTokens) continue;
        if (n_tokens <= kMaxParagraphTokens) {
            out.push_back(p);
            continue;
        }
        std::vector<std::string> pieces;
        split_long_paragraph(p, &pieces);
        for (auto& piece : pieces) {
            if (word_tokens(piece).size() >= kMinParagraphTokens)
                out.push_back(std::move(piece));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lexical reader

namespace {

constexpr std::size_t kMaxSpanTokens = 8;
constexpr std::size_t kNeighborhood = 15;

}  // namespace

std::vector<SpanCandidate> LexicalReader::score_spans(const std::string& question,
                                                      const std::string& context) const {
    auto q_tokens = index_tokens(question);
    std::set<std::string> q_terms(q_tokens.begin(), q_tokens.end());
    if (q_terms.empty()) return {};

    auto tokens = word_token_spans(context);
    std::size_t n = tokens.size();
    if (n == 0) return {};

    std::vector<bool> is_match(n, false);
    bool any_match = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (q_terms.count(tokens[i].token)) {
            is_match[i] = true;
            any_match = true;
        }
    }
    if (!any_match) return {};

    std::vector<SpanCandidate> out;
    for (std::size_t s = 0; s < n; ++s) {
        if (is_match[s]) continue;
        for (std::size_t e = s + 1; e <= std::min(n, s + kMaxSpanTokens); ++e) {
            if (is_match[e - 1]) break;  // spans never contain question terms

            std::size_t nb_lo = s >= kNeighborhood ? s - kNeighborhood : 0;
            std::size_t nb_hi = std::min(n, e + kNeighborhood);

            // Question-term coverage and mean distance within the +/-15
            // token neighborhood.
            std::map<std::string, std::size_t> term_dist;
            for (std::size_t i = nb_lo; i < nb_hi; ++i) {
                if (!is_match[i]) continue;
                std::size_t dist = i < s ? s - i : i - e + 1;
                auto it = term_dist.find(tokens[i].token);
                if (it == term_dist.end() || dist < it->second)
                    term_dist[tokens[i].token] = dist;
            }
            if (term_dist.empty()) continue;
            double coverage = static_cast<double>(term_dist.size()) /
                              static_cast<double>(q_terms.size());
            double mean_dist = 0.0;
            for (const auto& [t, d] : term_dist) mean_dist += static_cast<double>(d);
            mean_dist /= static_cast<double>(term_dist.size());

            SpanCandidate cand;
            cand.begin = tokens[s].begin;
            cand.end = tokens[e - 1].end;
            cand.score = coverage / (1.0 + mean_dist);
            out.push_back(cand);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// ask

std::vector<Answer> ask(const SearchIndex& index, const std::string& question,
                        const Reader& reader, const AskOptions& opts) {
    auto hits = index.search(question, opts.k_docs);
    if (hits.empty()) return {};
    double max_score = hits.front().score;
    for (const auto& h : hits) max_score = std::max(max_score, h.score);

    std::vector<Answer> all;
    for (const auto& hit : hits) {
        double prior = max_score > 0 ? hit.score / max_score : 0.0;
        const StoredDoc& doc = index.doc(hit.doc_id);
        for (const auto& context : extract_paragraphs(doc.text)) {
            for (const auto& span : reader.score_spans(question, context)) {
                double confidence = span.score * prior;
                if (!(confidence > 0.0)) continue;
                Answer a;
                a.text = context.substr(span.begin, span.end - span.begin);
                a.confidence = confidence;
                a.context = context;
                a.span_begin = span.begin;
                a.span_end = span.end;
                a.reference = doc.reference;
                a.doc_id = doc.id;
                all.push_back(std::move(a));
            }
        }
    }
    std::sort(all.begin(), all.end(), [](const Answer& a, const Answer& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
        if (a.span_begin != b.span_begin) return a.span_begin < b.span_begin;
        return a.span_end < b.span_end;
    });
    if (all.size() > opts.k_answers) all.resize(opts.k_answers);
    return all;
}

}  // namespace lowml::qa

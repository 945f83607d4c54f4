#include "lowml/text.hpp"

#include <algorithm>
#include <cctype>

#include "lowml/errors.hpp"

namespace lowml {

namespace {

// Decodes one UTF-8 codepoint at `i`; returns codepoint and advances `i`.
// Returns -1 on malformed input without advancing past the bad byte.
long decode_cp(std::string_view s, std::size_t& i) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int extra;
    long cp;
    if ((b0 & 0xE0) == 0xC0) { extra = 1; cp = b0 & 0x1F; }
    else if ((b0 & 0xF0) == 0xE0) { extra = 2; cp = b0 & 0x0F; }
    else if ((b0 & 0xF8) == 0xF0) { extra = 3; cp = b0 & 0x07; }
    else return -1;
    for (int k = 1; k <= extra; ++k) {
        if (i + static_cast<std::size_t>(k) >= s.size()) return -1;
        unsigned char b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((b & 0xC0) != 0x80) return -1;
        cp = (cp << 6) | (b & 0x3F);
    }
    // Reject overlong encodings and surrogates.
    if (extra == 1 && cp < 0x80) return -1;
    if (extra == 2 && cp < 0x800) return -1;
    if (extra == 3 && cp < 0x10000) return -1;
    if (cp >= 0xD800 && cp <= 0xDFFF) return -1;
    if (cp > 0x10FFFF) return -1;
    i += static_cast<std::size_t>(extra) + 1;
    return cp;
}

bool is_cjk(long cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) ||    // CJK Unified Ideographs
           (cp >= 0x3400 && cp <= 0x4DBF) ||    // Extension A
           (cp >= 0xF900 && cp <= 0xFAFF) ||    // Compatibility Ideographs
           (cp >= 0x3040 && cp <= 0x309F) ||    // Hiragana
           (cp >= 0x30A0 && cp <= 0x30FF) ||    // Katakana
           (cp >= 0xAC00 && cp <= 0xD7AF) ||    // Hangul syllables
           (cp >= 0x20000 && cp <= 0x2A6DF);    // Extension B
}

bool is_space_cp(long cp) {
    return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' ||
           cp == '\v' || cp == 0xA0 || cp == 0x3000 ||
           (cp >= 0x2000 && cp <= 0x200B);
}

// Word characters: ASCII alphanumerics plus any non-ASCII codepoint outside
// the common punctuation/space blocks.
bool is_word_cp(long cp) {
    if (cp < 0x80)
        return std::isalnum(static_cast<unsigned char>(static_cast<char>(cp))) != 0;
    if (is_space_cp(cp)) return false;
    if (cp >= 0x2000 && cp <= 0x206F) return false;  // general punctuation
    if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
    if (cp >= 0xFF01 && cp <= 0xFF0F) return false;  // fullwidth ASCII punct
    if (cp >= 0xFF1A && cp <= 0xFF20) return false;
    if (cp >= 0xFF3B && cp <= 0xFF40) return false;
    if (cp >= 0xFF5B && cp <= 0xFF65) return false;
    if (cp == 0xB7 || cp == 0xAB || cp == 0xBB) return false;
    return true;
}

void append_cp_lower(std::string& out, std::string_view src, std::size_t begin,
                     std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
        char c = src[i];
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        out.push_back(c);
    }
}

}  // namespace

bool valid_utf8(std::string_view bytes) {
    std::size_t i = 0;
    while (i < bytes.size()) {
        if (decode_cp(bytes, i) < 0) return false;
    }
    return true;
}

DecodedText decode_bytes(std::string_view bytes, const std::string& source) {
    if (bytes.empty()) throw DataError("empty input: " + source);
    if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xEF &&
        static_cast<unsigned char>(bytes[1]) == 0xBB &&
        static_cast<unsigned char>(bytes[2]) == 0xBF) {
        std::string_view rest = bytes.substr(3);
        if (valid_utf8(rest)) return {std::string(rest), "utf-8-bom"};
    }
    if (valid_utf8(bytes)) return {std::string(bytes), "utf-8"};
    // latin-1 fallback: every byte maps to the codepoint of the same value.
    std::string out;
    out.reserve(bytes.size() * 2);
    for (char ch : bytes) {
        unsigned char b = static_cast<unsigned char>(ch);
        if (b < 0x80) {
            out.push_back(ch);
        } else {
            out.push_back(static_cast<char>(0xC0 | (b >> 6)));
            out.push_back(static_cast<char>(0x80 | (b & 0x3F)));
        }
    }
    return {std::move(out), "latin-1"};
}

double cjk_fraction(std::string_view utf8) {
    std::size_t i = 0, total = 0, cjk = 0;
    while (i < utf8.size()) {
        long cp = decode_cp(utf8, i);
        if (cp < 0) { ++i; continue; }
        ++total;
        if (is_cjk(cp)) ++cjk;
    }
    if (total == 0) return 0.0;
    return static_cast<double>(cjk) / static_cast<double>(total);
}

ScriptDetection detect_encoding_and_script(std::string_view bytes,
                                           const std::string& source,
                                           double cjk_threshold) {
    DecodedText d = decode_bytes(bytes, source);
    TokenizerMode mode = cjk_fraction(d.text) > cjk_threshold ? TokenizerMode::CharNgram
                                                              : TokenizerMode::Word;
    return {d.encoding, mode, std::move(d.text)};
}

std::vector<TokenSpan> word_token_spans(std::string_view utf8) {
    std::vector<TokenSpan> out;
    std::size_t i = 0;
    std::size_t tok_begin = 0;
    std::string tok;
    bool in_token = false;
    while (i < utf8.size()) {
        std::size_t start = i;
        long cp = decode_cp(utf8, i);
        if (cp < 0) { ++i; cp = 0; }
        if (cp > 0 && is_word_cp(cp)) {
            if (!in_token) {
                in_token = true;
                tok_begin = start;
                tok.clear();
            }
            append_cp_lower(tok, utf8, start, i);
        } else if (in_token) {
            out.push_back({tok, tok_begin, start});
            in_token = false;
        }
    }
    if (in_token) out.push_back({tok, tok_begin, utf8.size()});
    return out;
}

std::vector<std::string> word_tokens(std::string_view utf8) {
    std::vector<std::string> out;
    for (auto& ts : word_token_spans(utf8)) out.push_back(std::move(ts.token));
    return out;
}

std::vector<std::string> codepoints(std::string_view utf8) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < utf8.size()) {
        std::size_t start = i;
        if (decode_cp(utf8, i) < 0) ++i;
        out.emplace_back(utf8.substr(start, i - start));
    }
    return out;
}

std::vector<std::string> base_tokens(std::string_view utf8, TokenizerMode mode,
                                     std::size_t maxlen) {
    std::vector<std::string> toks;
    if (mode == TokenizerMode::Word) {
        toks = word_tokens(utf8);
    } else {
        std::size_t i = 0;
        while (i < utf8.size()) {
            std::size_t start = i;
            long cp = decode_cp(utf8, i);
            if (cp < 0) { ++i; continue; }
            if (is_space_cp(cp)) continue;
            std::string t;
            append_cp_lower(t, utf8, start, i);
            toks.push_back(std::move(t));
        }
    }
    if (maxlen > 0 && toks.size() > maxlen) toks.resize(maxlen);
    return toks;
}

std::vector<std::string> ngram_tokens(const std::vector<std::string>& base,
                                      int lo, int hi) {
    std::vector<std::string> out;
    for (int n = lo; n <= hi; ++n) {
        if (n <= 0 || base.size() < static_cast<std::size_t>(n)) continue;
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= base.size(); ++i) {
            if (n == 1) {
                out.push_back(base[i]);
                continue;
            }
            std::string g = base[i];
            for (int k = 1; k < n; ++k) {
                g += ' ';
                g += base[i + static_cast<std::size_t>(k)];
            }
            out.push_back(std::move(g));
        }
    }
    return out;
}

}  // namespace lowml

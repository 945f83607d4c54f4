#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lowml {

enum class TokenizerMode { Word, CharNgram };

struct DecodedText {
    std::string text;       // UTF-8, BOM stripped
    std::string encoding;   // "utf-8" | "utf-8-bom" | "latin-1"
};

// Decodes raw bytes: valid UTF-8 passes through (BOM stripped and reported),
// anything else falls back to latin-1. Throws DataError on empty input,
// naming `source`.
DecodedText decode_bytes(std::string_view bytes, const std::string& source);

// Fraction of codepoints in CJK blocks (Han, kana, Hangul), over all
// codepoints of the UTF-8 string.
double cjk_fraction(std::string_view utf8);

struct ScriptDetection {
    std::string encoding;
    TokenizerMode mode;
    std::string text;
};

// Spec op detect_encoding_and_script: decode + dispatch tokenizer by the
// CJK fraction (> threshold => character n-grams).
ScriptDetection detect_encoding_and_script(std::string_view bytes,
                                           const std::string& source,
                                           double cjk_threshold = 0.30);

// Lowercased word tokens. A word char is ASCII alphanumeric or any
// codepoint >= 0x80 that is not in a common Unicode punctuation/space block;
// only ASCII letters are case-folded.
std::vector<std::string> word_tokens(std::string_view utf8);

struct TokenSpan {
    std::string token;      // lowercased
    std::size_t begin = 0;  // byte offsets into the original string
    std::size_t end = 0;
};

// Same segmentation as word_tokens but with byte offsets (QA reader needs
// to cut answer spans out of the original context).
std::vector<TokenSpan> word_token_spans(std::string_view utf8);

// Base tokens for featurization: words (Word mode) or single non-space
// codepoints (CharNgram mode), truncated to maxlen. maxlen = 0 means no cap.
std::vector<std::string> base_tokens(std::string_view utf8, TokenizerMode mode,
                                     std::size_t maxlen);

// Expands base tokens into n-grams joined by ' ' for n in [lo, hi].
std::vector<std::string> ngram_tokens(const std::vector<std::string>& base,
                                      int lo, int hi);

// Splits a UTF-8 string into codepoints (as strings). Invalid sequences
// never occur here: inputs come from decode_bytes.
std::vector<std::string> codepoints(std::string_view utf8);

bool valid_utf8(std::string_view bytes);

}  // namespace lowml

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace noiselab::text {

// UTF-8 <-> codepoints. decode throws Utf8Error on malformed input.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
std::string encode_utf8(char32_t c);

// Letter class covers ASCII plus Latin-1 Supplement and Latin Extended-A
// letters; enough for the English/German corpora this project targets.
bool is_letter(char32_t c);
bool is_space(char32_t c);
// Punctuation for word splitting: ASCII punctuation plus a few common
// Unicode marks (dashes, quotes, ellipsis).
bool is_punct(char32_t c);

char32_t to_lower(char32_t c);

// Normalization used everywhere text enters the models: compose common
// Latin base+combining-mark pairs (NFC for the covered range), lowercase,
// collapse whitespace runs to single spaces, trim. Idempotent.
std::string normalize(std::string_view s);

// Half-open codepoint offsets into the decoded string.
struct Span {
    size_t begin = 0;
    size_t end = 0;
    bool operator==(const Span&) const = default;
};

// Maximal runs of letter-class codepoints. Digits, punctuation, and
// whitespace terminate a word.
std::vector<Span> segment_words(std::u32string_view s);
std::vector<Span> segment_words_utf8(std::string_view s);

// Space-separated fields of a normalized string (no empties for normalized
// input; empty fields preserved otherwise so alignment holds).
std::vector<std::string> split_fields(std::string_view s);

}  // namespace noiselab::text

#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "noiselab/noise.hpp"

namespace noiselab::tok {

// Subword inventory. File format: UTF-8, one token per line, line number =
// id — drop-in compatible with published BERT vocab files.
class Vocab {
public:
    static constexpr const char* kPad = "[PAD]";
    static constexpr const char* kUnk = "[UNK]";
    static constexpr const char* kCls = "[CLS]";
    static constexpr const char* kSep = "[SEP]";
    static constexpr const char* kMask = "[MASK]";
    static constexpr const char* kContinuation = "##";

    static Vocab from_tokens(std::vector<std::string> tokens);
    static Vocab load(const std::string& path);
    void save(const std::string& path) const;

    int id_of(std::string_view token) const;  // -1 when absent
    const std::string& token(int id) const;
    size_t size() const { return tokens_.size(); }

    int pad_id() const { return pad_id_; }
    int unk_id() const { return unk_id_; }
    int cls_id() const { return cls_id_; }
    int sep_id() const { return sep_id_; }
    int mask_id() const { return mask_id_; }
    bool is_special(int id) const;
    const std::vector<int>& non_special_ids() const { return non_special_ids_; }

    // Singleton coverage invariant: every alphabet letter present both as a
    // word-initial token and as a "##" continuation, so in-alphabet text
    // never tokenizes to [UNK].
    void require_alphabet_coverage(const noise::AlphabetSpec& alphabet) const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
    std::vector<int> non_special_ids_;
    int pad_id_ = -1, unk_id_ = -1, cls_id_ = -1, sep_id_ = -1, mask_id_ = -1;
};

// Greedy longest-prefix-match subword segmentation of normalized text.
// Space-delimited fields are split further at punctuation (each punctuation
// codepoint is its own unit); each unit is matched greedily against the
// vocab, continuations carrying the "##" prefix. A unit that cannot be
// matched at some position (or is longer than 100 codepoints) becomes a
// single [UNK].
std::vector<std::string> tokenize(std::string_view normalized_text, const Vocab& vocab);

// Frequency-greedy pair merging over the corpus until target_size tokens
// exist. Seeds the inventory with the five specials, both singleton forms
// of every alphabet letter, and any other single codepoints seen in the
// corpus; then repeatedly merges the most frequent adjacent symbol pair
// (ties broken by earliest first occurrence in corpus order). Stops early
// if no pair occurs twice.
Vocab train_vocab(const std::vector<std::string>& corpus_lines, size_t target_size,
                  const noise::AlphabetSpec& alphabet);

struct WordRange {
    size_t begin = 0;  // token index range [begin, end) into ids
    size_t end = 0;
    bool operator==(const WordRange&) const = default;
};

struct EncodedSequence {
    std::vector<int> ids;
    std::vector<std::string> tokens;     // parallel to ids
    std::vector<WordRange> word_map;     // one entry per space-separated word
};

// [CLS] + tokens + [SEP], truncated to max_positions (head kept, final
// [SEP] always retained). word_map maps each space-separated word of the
// normalized text to the contiguous range of its surviving tokens; fully
// truncated words are dropped from the map.
EncodedSequence encode(std::string_view text, const Vocab& vocab, size_t max_positions);

}  // namespace noiselab::tok

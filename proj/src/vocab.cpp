#include "noiselab/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "noiselab/error.hpp"
#include "noiselab/text.hpp"

namespace noiselab::tok {

namespace {
constexpr size_t kMaxWordCodepoints = 100;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
    Vocab v;
    v.tokens_ = std::move(tokens);
    v.index_.reserve(v.tokens_.size());
    for (size_t i = 0; i < v.tokens_.size(); ++i) {
        if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second)
            throw ConfigError("duplicate vocab token: " + v.tokens_[i]);
    }
    v.pad_id_ = v.id_of(kPad);
    v.unk_id_ = v.id_of(kUnk);
    v.cls_id_ = v.id_of(kCls);
    v.sep_id_ = v.id_of(kSep);
    v.mask_id_ = v.id_of(kMask);
    if (v.pad_id_ < 0 || v.unk_id_ < 0 || v.cls_id_ < 0 || v.sep_id_ < 0 || v.mask_id_ < 0)
        throw ConfigError("vocab must contain [PAD], [UNK], [CLS], [SEP], and [MASK]");
    for (size_t i = 0; i < v.tokens_.size(); ++i)
        if (!v.is_special(static_cast<int>(i))) v.non_special_ids_.push_back(static_cast<int>(i));
    return v;
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocab file: " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    // A single trailing blank line is a file artifact, not a token.
    if (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
    return from_tokens(std::move(tokens));
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write vocab file: " + path);
    for (const auto& t : tokens_) out << t << '\n';
}

int Vocab::id_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? -1 : it->second;
}

const std::string& Vocab::token(int id) const {
    if (id < 0 || static_cast<size_t>(id) >= tokens_.size())
        throw ConfigError("token id out of range: " + std::to_string(id));
    return tokens_[static_cast<size_t>(id)];
}

bool Vocab::is_special(int id) const {
    return id == pad_id_ || id == unk_id_ || id == cls_id_ || id == sep_id_ || id == mask_id_;
}

void Vocab::require_alphabet_coverage(const noise::AlphabetSpec& alphabet) const {
    for (char32_t c : alphabet.letters) {
        const std::string s = text::encode_utf8(c);
        if (id_of(s) < 0 || id_of(std::string(kContinuation) + s) < 0)
            throw ConfigError("vocab lacks singleton coverage for alphabet letter '" + s + "'");
    }
}

namespace {

// Word-internal units: runs of non-space non-punct codepoints, with each
// punctuation codepoint as its own unit.
std::vector<std::u32string> split_units(std::u32string_view field) {
    std::vector<std::u32string> units;
    std::u32string current;
    for (char32_t c : field) {
        if (text::is_punct(c)) {
            if (!current.empty()) units.push_back(std::move(current));
            current.clear();
            units.push_back(std::u32string(1, c));
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) units.push_back(std::move(current));
    return units;
}

// Greedy longest-prefix match of one unit; empty result means [UNK].
std::vector<std::string> match_unit(const std::u32string& unit, const Vocab& vocab) {
    if (unit.size() > kMaxWordCodepoints) return {};
    std::vector<std::string> pieces;
    size_t pos = 0;
    while (pos < unit.size()) {
        size_t len = unit.size() - pos;
        std::string matched;
        while (len > 0) {
            std::string candidate = text::encode_utf8(std::u32string_view(unit).substr(pos, len));
            if (pos > 0) candidate = std::string(Vocab::kContinuation) + candidate;
            if (vocab.id_of(candidate) >= 0) {
                matched = std::move(candidate);
                break;
            }
            --len;
        }
        if (matched.empty()) return {};
        pieces.push_back(std::move(matched));
        pos += len;
    }
    return pieces;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view normalized_text, const Vocab& vocab) {
    std::vector<std::string> out;
    const std::u32string cps = text::decode_utf8(normalized_text);
    size_t i = 0;
    while (i < cps.size()) {
        if (text::is_space(cps[i])) {
            ++i;
            continue;
        }
        size_t begin = i;
        while (i < cps.size() && !text::is_space(cps[i])) ++i;
        for (const auto& unit : split_units(std::u32string_view(cps).substr(begin, i - begin))) {
            auto pieces = match_unit(unit, vocab);
            if (pieces.empty()) {
                out.push_back(Vocab::kUnk);
            } else {
                for (auto& p : pieces) out.push_back(std::move(p));
            }
        }
    }
    return out;
}

namespace {

struct PairKey {
    std::string left, right;
    bool operator<(const PairKey& o) const {
        return left != o.left ? left < o.left : right < o.right;
    }
};

std::string strip_continuation(const std::string& s) {
    constexpr std::string_view cc = Vocab::kContinuation;
    if (s.size() >= cc.size() && std::string_view(s).substr(0, cc.size()) == cc)
        return s.substr(cc.size());
    return s;
}

}  // namespace

Vocab train_vocab(const std::vector<std::string>& corpus_lines, size_t target_size,
                  const noise::AlphabetSpec& alphabet) {
    if (corpus_lines.empty()) throw DataError("vocab training requires a non-empty corpus");
    alphabet.validate();

    // Word frequency table over normalized corpus units, in first-seen order
    // so tie-breaking is reproducible.
    std::vector<std::vector<std::string>> word_symbols;  // symbol sequences
    std::vector<size_t> word_freq;
    std::map<std::u32string, size_t> word_index;
    std::vector<std::u32string> word_order;
    std::set<char32_t> seen_extras;

    for (const auto& line : corpus_lines) {
        const std::u32string cps = text::decode_utf8(text::normalize(line));
        size_t i = 0;
        while (i < cps.size()) {
            if (text::is_space(cps[i])) {
                ++i;
                continue;
            }
            size_t begin = i;
            while (i < cps.size() && !text::is_space(cps[i])) ++i;
            for (const auto& unit : split_units(std::u32string_view(cps).substr(begin, i - begin))) {
                for (char32_t c : unit)
                    if (!alphabet.contains(c)) seen_extras.insert(c);
                auto it = word_index.find(unit);
                if (it == word_index.end()) {
                    word_index.emplace(unit, word_order.size());
                    word_order.push_back(unit);
                    word_freq.push_back(1);
                } else {
                    word_freq[it->second]++;
                }
            }
        }
    }

    // Base inventory: specials, both singleton forms per alphabet letter,
    // then any other codepoints seen (punctuation, digits) sorted.
    std::vector<std::string> tokens = {Vocab::kPad, Vocab::kUnk, Vocab::kCls, Vocab::kSep,
                                       Vocab::kMask};
    for (char32_t c : alphabet.letters) tokens.push_back(text::encode_utf8(c));
    for (char32_t c : alphabet.letters)
        tokens.push_back(std::string(Vocab::kContinuation) + text::encode_utf8(c));
    for (char32_t c : seen_extras) {
        tokens.push_back(text::encode_utf8(c));
        tokens.push_back(std::string(Vocab::kContinuation) + text::encode_utf8(c));
    }

    const size_t min_size = tokens.size();
    if (target_size < min_size)
        throw ConfigError("vocab target_size " + std::to_string(target_size) +
                          " below minimum " + std::to_string(min_size) +
                          " (specials + singleton coverage)");

    word_symbols.reserve(word_order.size());
    for (const auto& unit : word_order) {
        std::vector<std::string> symbols;
        symbols.reserve(unit.size());
        for (size_t k = 0; k < unit.size(); ++k) {
            std::string s = text::encode_utf8(unit[k]);
            symbols.push_back(k == 0 ? s : std::string(Vocab::kContinuation) + s);
        }
        word_symbols.push_back(std::move(symbols));
    }

    std::set<std::string> have(tokens.begin(), tokens.end());
    while (tokens.size() < target_size) {
        // Count adjacent pairs; remember each pair's earliest occurrence.
        std::map<PairKey, size_t> counts;
        std::map<PairKey, std::pair<size_t, size_t>> first_seen;  // (word, position)
        for (size_t w = 0; w < word_symbols.size(); ++w) {
            const auto& syms = word_symbols[w];
            for (size_t k = 0; k + 1 < syms.size(); ++k) {
                PairKey key{syms[k], syms[k + 1]};
                counts[key] += word_freq[w];
                first_seen.emplace(key, std::make_pair(w, k));
            }
        }

        const PairKey* best = nullptr;
        size_t best_count = 1;  // require count >= 2
        std::pair<size_t, size_t> best_seen{~size_t{0}, ~size_t{0}};
        for (const auto& [key, count] : counts) {
            const auto seen = first_seen.at(key);
            if (count > best_count || (count == best_count && best && seen < best_seen)) {
                best = &key;
                best_count = count;
                best_seen = seen;
            }
        }
        if (!best) break;  // nothing repeats; merging further is pointless

        const std::string merged = best->left + strip_continuation(best->right);
        for (auto& syms : word_symbols) {
            for (size_t k = 0; k + 1 < syms.size();) {
                if (syms[k] == best->left && syms[k + 1] == best->right) {
                    syms[k] = merged;
                    syms.erase(syms.begin() + static_cast<std::ptrdiff_t>(k) + 1);
                } else {
                    ++k;
                }
            }
        }
        if (have.insert(merged).second) tokens.push_back(merged);
    }

    Vocab v = Vocab::from_tokens(std::move(tokens));
    v.require_alphabet_coverage(alphabet);
    return v;
}

EncodedSequence encode(std::string_view raw_text, const Vocab& vocab, size_t max_positions) {
    if (max_positions < 2) throw ConfigError("max_positions must be at least 2 ([CLS] and [SEP])");
    const std::string normalized = text::normalize(raw_text);

    EncodedSequence seq;
    seq.ids.push_back(vocab.cls_id());
    seq.tokens.push_back(Vocab::kCls);

    const size_t max_body = max_positions - 2;
    const std::u32string cps = text::decode_utf8(normalized);
    size_t i = 0;
    bool truncated = false;
    while (i < cps.size() && !truncated) {
        if (text::is_space(cps[i])) {
            ++i;
            continue;
        }
        size_t begin = i;
        while (i < cps.size() && !text::is_space(cps[i])) ++i;
        const std::string word = text::encode_utf8(std::u32string_view(cps).substr(begin, i - begin));

        const std::vector<std::string> word_tokens = tokenize(word, vocab);
        WordRange range{seq.ids.size(), seq.ids.size()};
        for (const auto& t : word_tokens) {
            if (seq.ids.size() - 1 >= max_body) {  // -1: [CLS] does not count
                truncated = true;
                break;
            }
            seq.ids.push_back(vocab.id_of(t));
            seq.tokens.push_back(t);
            range.end = seq.ids.size();
        }
        if (range.end > range.begin) seq.word_map.push_back(range);
    }

    seq.ids.push_back(vocab.sep_id());
    seq.tokens.push_back(Vocab::kSep);
    return seq;
}

}  // namespace noiselab::tok

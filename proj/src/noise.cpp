#include "noiselab/noise.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "noiselab/error.hpp"
#include "noiselab/text.hpp"

namespace noiselab::noise {

using text::Span;

AlphabetSpec AlphabetSpec::english() {
    AlphabetSpec a;
    a.language_id = "en";
    for (char32_t c = U'a'; c <= U'z'; ++c) a.letters.push_back(c);
    return a;
}

AlphabetSpec AlphabetSpec::german() {
    AlphabetSpec a;
    a.language_id = "de";
    for (char32_t c = U'a'; c <= U'z'; ++c) a.letters.push_back(c);
    a.letters.push_back(0xE4);  // ä
    a.letters.push_back(0xF6);  // ö
    a.letters.push_back(0xFC);  // ü
    a.letters.push_back(0xDF);  // ß
    return a;
}

AlphabetSpec AlphabetSpec::for_language(std::string_view id) {
    if (id == "en" || id == "english") return english();
    if (id == "de" || id == "german") return german();
    throw ConfigError("unknown alphabet language '" + std::string(id) + "' (expected en or de)");
}

void AlphabetSpec::validate() const {
    if (letters.empty()) throw ConfigError("alphabet must be non-empty");
    std::set<char32_t> seen;
    for (char32_t c : letters) {
        if (!text::is_letter(c)) throw ConfigError("alphabet entry is not a letter");
        if (text::to_lower(c) != c) throw ConfigError("alphabet entries must be lowercase");
        if (!seen.insert(c).second) throw ConfigError("duplicate alphabet entry");
    }
}

bool AlphabetSpec::contains(char32_t c) const {
    return std::find(letters.begin(), letters.end(), c) != letters.end();
}

const char* noise_op_name(NoiseOp op) {
    switch (op) {
        case NoiseOp::insertion: return "insertion";
        case NoiseOp::deletion: return "deletion";
        case NoiseOp::replacement: return "replacement";
        case NoiseOp::swap: return "swap";
    }
    return "?";
}

void NoiseSpec::validate() const {
    if (!(level_p >= 0.0 && level_p <= 1.0))
        throw ConfigError("noise level must lie in [0,1], got " + std::to_string(level_p));
    if (ops.empty()) throw ConfigError("noise op set must be non-empty");
    std::set<NoiseOp> seen;
    for (NoiseOp op : ops) {
        if (!seen.insert(op).second) throw ConfigError("duplicate noise op in spec");
    }
}

std::vector<NoiseOp> NoiseSpec::parse_ops(std::string_view csv) {
    std::vector<NoiseOp> ops;
    std::string item;
    std::stringstream ss{std::string(csv)};
    while (std::getline(ss, item, ',')) {
        if (item == "ins" || item == "insertion") ops.push_back(NoiseOp::insertion);
        else if (item == "del" || item == "deletion") ops.push_back(NoiseOp::deletion);
        else if (item == "rep" || item == "replacement") ops.push_back(NoiseOp::replacement);
        else if (item == "swap") ops.push_back(NoiseOp::swap);
        else throw ConfigError("unknown noise op '" + item + "'");
    }
    return ops;
}

std::string apply_noise(std::string_view input, const NoiseSpec& spec, const AlphabetSpec& alphabet,
                        Rng& rng, NoiseStats* stats) {
    spec.validate();
    alphabet.validate();

    const std::u32string cps = text::decode_utf8(input);
    const std::vector<Span> spans = text::segment_words(cps);

    std::u32string out;
    out.reserve(cps.size() + cps.size() / 8);

    size_t cursor = 0;
    for (const Span& span : spans) {
        // Copy the gap before this word verbatim.
        out.append(cps, cursor, span.begin - cursor);
        cursor = span.end;

        const size_t n = span.end - span.begin;
        std::u32string current(cps, span.begin, n);
        std::vector<char> deleted(n, 0);
        std::vector<std::u32string> inserted(n);

        for (size_t i = 0; i < n; ++i) {
            if (stats) stats->letters_seen++;
            if (rng.next_double() >= spec.level_p) continue;
            const NoiseOp op = spec.ops[rng.next_below(spec.ops.size())];
            if (stats) {
                stats->ops_applied++;
                stats->per_op[static_cast<size_t>(op)]++;
            }
            switch (op) {
                case NoiseOp::insertion:
                    inserted[i].push_back(alphabet.letters[rng.next_below(alphabet.letters.size())]);
                    break;
                case NoiseOp::deletion:
                    deleted[i] = 1;
                    break;
                case NoiseOp::replacement:
                    current[i] = alphabet.letters[rng.next_below(alphabet.letters.size())];
                    break;
                case NoiseOp::swap: {
                    if (n < 2) break;  // nothing to exchange within the word
                    const size_t j = (i + 1 < n) ? i + 1 : i - 1;
                    std::swap(current[i], current[j]);
                    break;
                }
            }
        }

        for (size_t i = 0; i < n; ++i) {
            if (!deleted[i]) out.push_back(current[i]);
            out += inserted[i];
        }
    }
    out.append(cps, cursor, cps.size() - cursor);
    return text::encode_utf8(out);
}

TypoKeyboard TypoKeyboard::qwerty() {
    static constexpr const char* kRows[] = {"qwertyuiop", "asdfghjkl", "zxcvbnm"};
    TypoKeyboard kb;
    for (const char* row : kRows) {
        const size_t len = std::string_view(row).size();
        for (size_t i = 0; i < len; ++i) {
            auto& adj = kb.adjacency[row[i] - 'a'];
            if (i > 0) adj.push_back(row[i - 1]);
            if (i + 1 < len) adj.push_back(row[i + 1]);
        }
    }
    return kb;
}

TypoKeyboard TypoKeyboard::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open keyboard table: " + path);
    TypoKeyboard kb;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string key, rest;
        if (!std::getline(ss, key, '\t') || !std::getline(ss, rest))
            throw IoError("malformed keyboard table line: " + line);
        if (key.size() != 1 || key[0] < 'a' || key[0] > 'z')
            throw IoError("keyboard key must be a single lowercase letter: " + key);
        auto& adj = kb.adjacency[key[0] - 'a'];
        std::stringstream ns(rest);
        std::string neighbor;
        while (std::getline(ns, neighbor, ',')) {
            if (neighbor.size() != 1 || neighbor[0] < 'a' || neighbor[0] > 'z')
                throw IoError("keyboard neighbor must be a single lowercase letter: " + neighbor);
            adj.push_back(neighbor[0]);
        }
    }
    kb.validate();
    return kb;
}

void TypoKeyboard::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write keyboard table: " + path);
    out << "# key<TAB>comma-separated horizontally adjacent keys (left,right)\n";
    for (int i = 0; i < 26; ++i) {
        out << static_cast<char>('a' + i) << '\t';
        for (size_t k = 0; k < adjacency[i].size(); ++k) {
            if (k) out << ',';
            out << adjacency[i][k];
        }
        out << '\n';
    }
}

void TypoKeyboard::validate() const {
    for (int i = 0; i < 26; ++i) {
        const auto& adj = adjacency[i];
        if (adj.empty() || adj.size() > 2)
            throw ConfigError(std::string("key '") + static_cast<char>('a' + i) +
                              "' must have 1 or 2 neighbors");
        for (char n : adj) {
            const auto& back = adjacency[n - 'a'];
            if (std::find(back.begin(), back.end(), static_cast<char>('a' + i)) == back.end())
                throw ConfigError(std::string("keyboard adjacency is not symmetric at '") +
                                  static_cast<char>('a' + i) + "'");
        }
    }
}

const std::vector<char>& TypoKeyboard::neighbors(char lower) const {
    if (lower < 'a' || lower > 'z') throw ConfigError("keyboard lookup outside a-z");
    return adjacency[lower - 'a'];
}

std::string simulate_one_typo_per_word(std::string_view input, const TypoKeyboard& kb, Rng& rng) {
    std::u32string cps = text::decode_utf8(input);
    for (const Span& span : text::segment_words(cps)) {
        std::vector<size_t> candidates;
        for (size_t i = span.begin; i < span.end; ++i) {
            const char32_t lower = text::to_lower(cps[i]);
            if (lower >= U'a' && lower <= U'z') candidates.push_back(i);
        }
        if (candidates.empty()) continue;
        const size_t pos = candidates[rng.next_below(candidates.size())];
        const char key = static_cast<char>(text::to_lower(cps[pos]));
        const auto& adj = kb.neighbors(key);
        cps[pos] = static_cast<char32_t>(adj[rng.next_below(adj.size())]);
    }
    return text::encode_utf8(cps);
}

std::vector<LabeledExample> build_joint_composition(const std::vector<LabeledExample>& dataset,
                                                    const NoiseSpec& spec,
                                                    const AlphabetSpec& alphabet) {
    if (dataset.empty()) throw DataError("joint composition requires a non-empty dataset");
    spec.validate();
    std::vector<LabeledExample> out;
    out.reserve(dataset.size() * 2);
    out.insert(out.end(), dataset.begin(), dataset.end());
    Rng rng(spec.seed);
    for (const auto& ex : dataset) {
        out.push_back({apply_noise(ex.text, spec, alphabet, rng), ex.label});
    }
    return out;
}

}  // namespace noiselab::noise

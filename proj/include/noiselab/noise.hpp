#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "noiselab/rng.hpp"

namespace noiselab::noise {

// Letter inventory used for sampling insertion/replacement characters.
struct AlphabetSpec {
    std::string language_id;
    std::vector<char32_t> letters;  // ordered, unique, lowercase letters

    static AlphabetSpec english();
    static AlphabetSpec german();
    // Accepts "en"/"english" and "de"/"german"; throws ConfigError otherwise.
    static AlphabetSpec for_language(std::string_view id);

    void validate() const;
    bool contains(char32_t c) const;
};

enum class NoiseOp : uint8_t { insertion = 0, deletion = 1, replacement = 2, swap = 3 };

const char* noise_op_name(NoiseOp op);

// Per-letter perturbation policy. Defaults to all four ops, matching the
// uniform-op setting used for every real run; op subsetting exists for
// deterministic tests and the CLI's --ops flag.
struct NoiseSpec {
    double level_p = 0.0;
    std::vector<NoiseOp> ops = {NoiseOp::insertion, NoiseOp::deletion, NoiseOp::replacement,
                                NoiseOp::swap};
    uint64_t seed = 0;

    void validate() const;
    static std::vector<NoiseOp> parse_ops(std::string_view csv);  // "ins,del,rep,swap"
};

struct NoiseStats {
    size_t letters_seen = 0;
    size_t ops_applied = 0;
    std::array<size_t, 4> per_op{};  // indexed by NoiseOp
};

// Character-level noising. For each letter inside a word (maximal letter
// run), independently with probability level_p one op (uniform over
// spec.ops) is applied:
//   insertion:   a uniform-random alphabet letter is inserted right after
//                the position
//   deletion:    the letter is removed
//   replacement: the letter becomes a uniform-random alphabet letter
//   swap:        the letter exchanges with the next letter of the word
//                (with the previous one at word-final position)
// Characters outside words are never touched. Decisions are sampled against
// the original positions left-to-right; edits accumulate in a buffer
// aligned with those positions, so an earlier edit never re-noises.
//
// Draw order per letter (for reproducibility): one uniform for "apply?",
// then one for the op choice, then one for the sampled letter if the op
// needs one.
std::string apply_noise(std::string_view text, const NoiseSpec& spec, const AlphabetSpec& alphabet,
                        Rng& rng, NoiseStats* stats = nullptr);

// QWERTY horizontal adjacency over a-z. The default table lives in
// data/qwerty_adjacency.tsv; qwerty() builds the identical table from the
// three key rows.
struct TypoKeyboard {
    std::array<std::vector<char>, 26> adjacency;

    static TypoKeyboard qwerty();
    static TypoKeyboard load(const std::string& path);
    void save(const std::string& path) const;
    void validate() const;  // every key present, adjacency symmetric
    const std::vector<char>& neighbors(char lower) const;
};

// One typo per word: in every word, one uniformly chosen position whose
// letter is on the keyboard is replaced by a uniformly chosen horizontally
// adjacent key. Words with no keyboard letter are left unchanged.
std::string simulate_one_typo_per_word(std::string_view text, const TypoKeyboard& kb, Rng& rng);

struct LabeledExample {
    std::string text;
    std::string label;
    bool operator==(const LabeledExample&) const = default;
};

// Fine-tuning data layout: the dataset followed by a noised copy of itself,
// labels unchanged, order preserved within each copy. The noised copy is
// sampled once from spec.seed.
std::vector<LabeledExample> build_joint_composition(const std::vector<LabeledExample>& dataset,
                                                    const NoiseSpec& spec,
                                                    const AlphabetSpec& alphabet);

}  // namespace noiselab::noise

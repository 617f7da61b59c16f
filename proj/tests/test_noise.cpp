#include <cmath>
#include <algorithm>
#include <set>
#include <string>

#include "doctest.h"
#include "noiselab/error.hpp"
#include "noiselab/noise.hpp"
#include "noiselab/rng.hpp"
#include "noiselab/text.hpp"

using namespace noiselab;
using namespace noiselab::noise;

namespace {

std::string random_text(Rng& rng) {
    static const std::u32string pool = U"abcdefghij ämnoß  .,!42  uvwxyz ";
    std::u32string s;
    const size_t len = rng.next_below(60);
    for (size_t i = 0; i < len; ++i) s.push_back(pool[rng.next_below(pool.size())]);
    return text::encode_utf8(s);
}

std::string non_letter_skeleton(const std::string& s) {
    std::string out;
    for (char32_t c : text::decode_utf8(s))
        if (!text::is_letter(c)) out += text::encode_utf8(c);
    return out;
}

}  // namespace

TEST_CASE("apply_noise at level 0 is the identity") {
    NoiseSpec spec;
    spec.level_p = 0.0;
    Rng rng(1);
    const std::string s = "colorless green ideas sleep furiously";
    CHECK(apply_noise(s, spec, AlphabetSpec::english(), rng) == s);
}

TEST_CASE("apply_noise deletion at level 1 removes every letter") {
    NoiseSpec spec;
    spec.level_p = 1.0;
    spec.ops = {NoiseOp::deletion};
    Rng rng(3);
    CHECK(apply_noise("ab, cd!", spec, AlphabetSpec::english(), rng) == ", !");
}

TEST_CASE("apply_noise rejects an out-of-range level") {
    NoiseSpec spec;
    spec.level_p = 1.5;
    Rng rng(1);
    CHECK_THROWS_AS(apply_noise("abc", spec, AlphabetSpec::english(), rng), ConfigError);
    spec.level_p = -0.1;
    CHECK_THROWS_AS(apply_noise("abc", spec, AlphabetSpec::english(), rng), ConfigError);
    spec.level_p = 0.5;
    spec.ops.clear();
    CHECK_THROWS_AS(apply_noise("abc", spec, AlphabetSpec::english(), rng), ConfigError);
}

TEST_CASE("apply_noise op incidence converges to the noise level") {
    // Monte-Carlo counter of sampled op events over >= 1e5 letters.
    NoiseSpec spec;
    spec.level_p = 0.05;
    const AlphabetSpec alphabet = AlphabetSpec::english();
    Rng rng(99);
    NoiseStats stats;
    const std::string line = "the quick brown fox jumps over the lazy dog again";
    while (stats.letters_seen < 100000) apply_noise(line, spec, alphabet, rng, &stats);
    const double rate = static_cast<double>(stats.ops_applied) / static_cast<double>(stats.letters_seen);
    CHECK(rate == doctest::Approx(0.05).epsilon(0.2));
    CHECK(std::abs(rate - 0.05) <= 0.01);
}

TEST_CASE("apply_noise ops are uniform over the op set") {
    NoiseSpec spec;
    spec.level_p = 0.5;
    const AlphabetSpec alphabet = AlphabetSpec::english();
    Rng rng(5);
    NoiseStats stats;
    const std::string line = "assorted letters for sampling statistics";
    while (stats.ops_applied < 40000) apply_noise(line, spec, alphabet, rng, &stats);
    for (size_t k = 0; k < 4; ++k) {
        const double frac = static_cast<double>(stats.per_op[k]) / static_cast<double>(stats.ops_applied);
        CHECK(std::abs(frac - 0.25) < 0.02);
    }
}

TEST_CASE("apply_noise never alters non-letters and keeps the space skeleton") {
    const AlphabetSpec alphabet = AlphabetSpec::german();
    Rng meta(42);
    for (int trial = 0; trial < 400; ++trial) {
        const std::string input = random_text(meta);
        NoiseSpec spec;
        spec.level_p = meta.next_double();
        Rng rng(meta.next_u64());
        const std::string output = apply_noise(input, spec, alphabet, rng);
        // Non-letter characters survive bit-for-bit, in order; in particular
        // the space structure (and with it the field count, spaces+1) is
        // preserved.
        auto field_count = [](const std::string& s) {
            return 1 + std::count(s.begin(), s.end(), ' ');
        };
        CHECK(non_letter_skeleton(output) == non_letter_skeleton(input));
        CHECK(field_count(output) == field_count(input));
    }
}

TEST_CASE("apply_noise is deterministic for a fixed seed") {
    NoiseSpec spec;
    spec.level_p = 0.4;
    const AlphabetSpec alphabet = AlphabetSpec::english();
    const std::string input = "colorless green ideas sleep furiously";
    Rng a(1234), b(1234);
    CHECK(apply_noise(input, spec, alphabet, a) == apply_noise(input, spec, alphabet, b));
}

TEST_CASE("apply_noise insertion keeps the leading letter") {
    NoiseSpec spec;
    spec.level_p = 1.0;
    spec.ops = {NoiseOp::insertion};
    Rng rng(17);
    const std::string out = apply_noise("ab", spec, AlphabetSpec::english(), rng);
    REQUIRE(out.size() == 4);
    CHECK(out[0] == 'a');
    CHECK(out[2] == 'b');
}

TEST_CASE("apply_noise swap exchanges word-final letter with the previous one") {
    NoiseSpec spec;
    spec.ops = {NoiseOp::swap};
    Rng rng(2);

    // Only the last letter gets an op: swap falls back to the previous letter.
    spec.level_p = 1.0;
    NoiseSpec last_only = spec;
    // With p=1 every letter swaps in order: "abc" -> swap(0,1) -> "bac",
    // swap(1,2) -> "bca", swap(2,1) [final falls back] -> "bac".
    CHECK(apply_noise("abc", last_only, AlphabetSpec::english(), rng) == "bac");

    // One-letter words cannot swap.
    Rng rng2(2);
    CHECK(apply_noise("a", spec, AlphabetSpec::english(), rng2) == "a");
}

TEST_CASE("qwerty adjacency is complete and symmetric") {
    const TypoKeyboard kb = TypoKeyboard::qwerty();
    kb.validate();
    CHECK(kb.neighbors('a') == std::vector<char>{'s'});
    CHECK(kb.neighbors('s') == std::vector<char>{'a', 'd'});
    CHECK(kb.neighbors('p') == std::vector<char>{'o'});
    CHECK(kb.neighbors('m') == std::vector<char>{'n'});
}

TEST_CASE("shipped qwerty table matches the built-in layout") {
    const TypoKeyboard shipped =
        TypoKeyboard::load(std::string(NOISELAB_SOURCE_DIR) + "/data/qwerty_adjacency.tsv");
    const TypoKeyboard builtin = TypoKeyboard::qwerty();
    for (int i = 0; i < 26; ++i) CHECK(shipped.adjacency[i] == builtin.adjacency[i]);
}

TEST_CASE("one-typo simulation replaces exactly one letter per word") {
    const TypoKeyboard kb = TypoKeyboard::qwerty();

    // 'a' has only the right neighbor 's' on the home row.
    Rng rng(1);
    CHECK(simulate_one_typo_per_word("a", kb, rng) == "s");

    Rng meta(77);
    for (int trial = 0; trial < 300; ++trial) {
        std::string input;
        const int n_words = 1 + static_cast<int>(meta.next_below(6));
        for (int w = 0; w < n_words; ++w) {
            if (w) input += ' ';
            const size_t len = 1 + meta.next_below(9);
            for (size_t i = 0; i < len; ++i)
                input += static_cast<char>('a' + meta.next_below(26));
        }
        Rng rng2(meta.next_u64());
        const std::string output = simulate_one_typo_per_word(input, kb, rng2);
        const auto in_words = text::split_fields(input);
        const auto out_words = text::split_fields(output);
        REQUIRE(in_words.size() == out_words.size());
        for (size_t w = 0; w < in_words.size(); ++w) {
            REQUIRE(in_words[w].size() == out_words[w].size());
            int hamming = 0;
            for (size_t i = 0; i < in_words[w].size(); ++i)
                hamming += in_words[w][i] != out_words[w][i];
            CHECK(hamming == 1);
        }
    }
}

TEST_CASE("one-typo simulation can reproduce the studebt rendering") {
    // "student" with position 5 ('n') replaced by its left neighbor 'b'.
    const TypoKeyboard kb = TypoKeyboard::qwerty();
    bool seen = false;
    for (uint64_t seed = 0; seed < 400 && !seen; ++seed) {
        Rng rng(seed);
        seen = simulate_one_typo_per_word("student", kb, rng) == "studebt";
    }
    CHECK(seen);
}

TEST_CASE("one-typo simulation skips non-keyboard letters") {
    const TypoKeyboard kb = TypoKeyboard::qwerty();
    Rng rng(9);
    // ß is not on the keyboard; the only replaceable position varies but ß stays.
    const std::string out = simulate_one_typo_per_word("ß", kb, rng);
    CHECK(out == "ß");
}

TEST_CASE("joint composition duplicates then noises") {
    const std::vector<LabeledExample> data = {
        {"alpha beta", "1"}, {"gamma delta", "0"}, {"epsilon zeta", "1"}};

    NoiseSpec clean;
    clean.level_p = 0.0;
    auto doubled = build_joint_composition(data, clean, AlphabetSpec::english());
    REQUIRE(doubled.size() == 6);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(doubled[i] == data[i]);
        CHECK(doubled[i + 3] == data[i]);
    }

    NoiseSpec noisy;
    noisy.level_p = 0.4;
    noisy.seed = 11;
    auto composed = build_joint_composition(data, noisy, AlphabetSpec::english());
    REQUIRE(composed.size() == 6);
    const std::vector<std::string> labels = {"1", "0", "1", "1", "0", "1"};
    for (size_t i = 0; i < 6; ++i) CHECK(composed[i].label == labels[i]);

    CHECK_THROWS_AS(build_joint_composition({}, clean, AlphabetSpec::english()), DataError);
}

TEST_CASE("joint composition at 40% perturbs nearly every long example") {
    // Monte Carlo over the noising distribution: examples with >= 10 letters
    // should differ from their originals at least 95% of the time.
    Rng meta(21);
    size_t total = 0;
    size_t changed = 0;
    for (int round = 0; round < 60; ++round) {
        std::vector<LabeledExample> data;
        for (int i = 0; i < 20; ++i) {
            std::string s;
            for (int w = 0; w < 3; ++w) {
                if (w) s += ' ';
                for (int k = 0; k < 4; ++k) s += static_cast<char>('a' + meta.next_below(26));
            }
            data.push_back({s, "x"});
        }
        NoiseSpec spec;
        spec.level_p = 0.4;
        spec.seed = meta.next_u64();
        auto composed = build_joint_composition(data, spec, AlphabetSpec::english());
        for (size_t i = 0; i < data.size(); ++i) {
            ++total;
            changed += composed[data.size() + i].text != data[i].text;
        }
    }
    CHECK(static_cast<double>(changed) / static_cast<double>(total) >= 0.95);
}

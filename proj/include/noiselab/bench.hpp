#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace noiselab::bench {

struct Labeled {
    std::string text;
    std::string label;
};

// Self-contained classification benchmark: sentences are filled-in skeleton
// templates ("the {c} was very {k}") so masked-LM training has real context
// signal, each labeled sentence carries exactly one class keyword (its {k}
// slot), and nonstandard test variants are derived from the clean test split
// by typo simulation and by deterministic orthographic rewrite rules.
struct BenchmarkSpec {
    std::uint64_t seed = 1;
    std::size_t n_train = 64;
    std::size_t n_test = 64;    // per test split, must be even for exact balance
    std::size_t n_corpus = 600; // unlabeled lines for pre-training
    std::size_t min_words = 5;  // bounds on template length, in words
    std::size_t max_words = 10;
    double corpus_keyword_rate = 0.5;  // chance a corpus {k} slot holds a keyword
    std::string class_a = "pos";
    std::string class_b = "neg";
    // templates: whitespace-separated words where {c} draws a content word,
    // {k} is the single keyword slot, and every literal is a function word
    std::vector<std::string> templates;
    std::vector<std::string> function_words;
    std::vector<std::string> content_words;
    std::vector<std::string> class_a_keywords;
    std::vector<std::string> class_b_keywords;
    // ordered substring rewrites, applied per word, never touching spaces
    std::vector<std::pair<std::string, std::string>> dialect_rules;

    void validate() const;
    static BenchmarkSpec defaults(std::uint64_t seed);
};

struct GeneratedBenchmark {
    std::vector<std::string> corpus;
    std::vector<Labeled> train;
    std::vector<Labeled> test_clean;
    std::vector<Labeled> test_typo;
    std::vector<Labeled> test_dialect;
};

// Single-pass, first-match-wins substring rewrite; word count is preserved
// because no rule side contains whitespace.
std::string dialect_rewrite(const std::string& text,
                            const std::vector<std::pair<std::string, std::string>>& rules);

// Recomputes the label of a clean sentence from the keyword pools alone;
// used as an independent oracle over emitted train/test files.
std::string infer_label(const std::string& text, const BenchmarkSpec& spec);

GeneratedBenchmark generate_benchmark(const BenchmarkSpec& spec);

// Writes corpus.txt, train.tsv, test_clean.tsv, test_typo.tsv,
// test_dialect.tsv under out_dir (atomic temp-and-rename per file).
void write_benchmark(const GeneratedBenchmark& b, const std::string& out_dir);

}  // namespace noiselab::bench

#include <filesystem>
#include <unordered_set>

#include "doctest.h"
#include "noiselab/bench.hpp"
#include "noiselab/io.hpp"
#include "noiselab/text.hpp"

using namespace noiselab;
using namespace noiselab::bench;

namespace {

BenchmarkSpec tiny_spec(uint64_t seed) {
    BenchmarkSpec s = BenchmarkSpec::defaults(seed);
    s.n_train = 12;
    s.n_test = 8;
    s.n_corpus = 30;
    return s;
}

size_t word_count(const std::string& s) { return text::split_fields(s).size(); }

}  // namespace

TEST_CASE("benchmark spec validation") {
    CHECK_NOTHROW(BenchmarkSpec::defaults(1).validate());

    BenchmarkSpec odd = tiny_spec(1);
    odd.n_train = 13;
    CHECK_THROWS_AS(odd.validate(), ConfigError);

    BenchmarkSpec empty = tiny_spec(1);
    empty.content_words.clear();
    CHECK_THROWS_AS(empty.validate(), ConfigError);

    BenchmarkSpec spacey = tiny_spec(1);
    spacey.dialect_rules.push_back({"a b", "c"});
    CHECK_THROWS_AS(spacey.validate(), ConfigError);

    BenchmarkSpec dup = tiny_spec(1);
    dup.class_b_keywords.push_back(dup.class_a_keywords[0]);
    CHECK_THROWS_AS(dup.validate(), ConfigError);

    BenchmarkSpec leak = tiny_spec(1);
    leak.content_words.push_back(leak.class_a_keywords[0]);
    CHECK_THROWS_AS(leak.validate(), ConfigError);

    BenchmarkSpec two_k = tiny_spec(1);
    two_k.templates.push_back("the {c} was {k} and {k}");
    CHECK_THROWS_AS(two_k.validate(), ConfigError);

    BenchmarkSpec stray = tiny_spec(1);
    stray.templates.push_back("the {c} was hardly {k}");  // 'hardly' not a function word
    CHECK_THROWS_WITH_AS(stray.validate(), doctest::Contains("hardly"), ConfigError);

    BenchmarkSpec long_t = tiny_spec(1);
    long_t.templates.push_back("the {c} and the {c} and the {c} seemed very {k} now");
    CHECK_THROWS_AS(long_t.validate(), ConfigError);

    BenchmarkSpec no_t = tiny_spec(1);
    no_t.templates.clear();
    CHECK_THROWS_AS(no_t.validate(), ConfigError);
}

TEST_CASE("generated sentences realize a template") {
    const BenchmarkSpec spec = tiny_spec(17);
    const GeneratedBenchmark b = generate_benchmark(spec);
    const std::unordered_set<std::string> content(spec.content_words.begin(),
                                                  spec.content_words.end());
    std::unordered_set<std::string> keywords(spec.class_a_keywords.begin(),
                                             spec.class_a_keywords.end());
    keywords.insert(spec.class_b_keywords.begin(), spec.class_b_keywords.end());

    auto realizes = [&](const std::string& line, bool keyword_slot_free) {
        const auto words = text::split_fields(line);
        for (const auto& t : spec.templates) {
            const auto slots = text::split_fields(t);
            if (slots.size() != words.size()) continue;
            bool ok = true;
            for (size_t i = 0; i < slots.size() && ok; ++i) {
                if (slots[i] == "{c}")
                    ok = content.count(words[i]) != 0;
                else if (slots[i] == "{k}")
                    ok = keywords.count(words[i]) != 0 ||
                         (keyword_slot_free && content.count(words[i]) != 0);
                else
                    ok = words[i] == slots[i];
            }
            if (ok) return true;
        }
        return false;
    };
    for (const auto& e : b.train) CHECK(realizes(e.text, false));
    for (const auto& e : b.test_clean) CHECK(realizes(e.text, false));
    for (const auto& l : b.corpus) CHECK(realizes(l, true));
}

TEST_CASE("dialect rewrite hand oracle") {
    const auto rules = BenchmarkSpec::defaults(1).dialect_rules;
    // derived by hand from the ordered first-match-wins scan
    CHECK(dialect_rewrite("the weather is wonderful today", rules) ==
          "de wiada is wondavol todei");
    CHECK(dialect_rewrite("boring", rules) == "borin");
    CHECK(dialect_rewrite("great", rules) == "griat");
    CHECK(dialect_rewrite("", rules) == "");
    CHECK(dialect_rewrite("xyz", rules) == "xyz");  // no rule applies
}

TEST_CASE("dialect rewrite preserves word count") {
    const BenchmarkSpec spec = tiny_spec(7);
    const GeneratedBenchmark b = generate_benchmark(spec);
    for (const auto& line : b.corpus)
        CHECK(word_count(dialect_rewrite(line, spec.dialect_rules)) == word_count(line));
    for (size_t i = 0; i < b.test_clean.size(); ++i)
        CHECK(word_count(b.test_dialect[i].text) == word_count(b.test_clean[i].text));
}

TEST_CASE("generation is deterministic and seed-sensitive") {
    const BenchmarkSpec spec = tiny_spec(11);
    const GeneratedBenchmark a = generate_benchmark(spec);
    const GeneratedBenchmark b = generate_benchmark(spec);
    CHECK(a.corpus == b.corpus);
    REQUIRE(a.train.size() == b.train.size());
    for (size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].text == b.train[i].text);
        CHECK(a.train[i].label == b.train[i].label);
    }
    for (size_t i = 0; i < a.test_typo.size(); ++i)
        CHECK(a.test_typo[i].text == b.test_typo[i].text);

    const GeneratedBenchmark c = generate_benchmark(tiny_spec(12));
    CHECK(a.corpus != c.corpus);
}

TEST_CASE("splits have the advertised shape") {
    const BenchmarkSpec spec = tiny_spec(3);
    const GeneratedBenchmark b = generate_benchmark(spec);
    CHECK(b.train.size() == spec.n_train);
    CHECK(b.test_clean.size() == spec.n_test);
    CHECK(b.test_typo.size() == spec.n_test);
    CHECK(b.test_dialect.size() == spec.n_test);
    CHECK(b.corpus.size() == spec.n_corpus);

    size_t train_a = 0, test_a = 0;
    for (const auto& e : b.train) train_a += e.label == spec.class_a;
    for (const auto& e : b.test_clean) test_a += e.label == spec.class_a;
    CHECK(train_a == spec.n_train / 2);  // exactly balanced
    CHECK(test_a == spec.n_test / 2);

    for (size_t i = 0; i < spec.n_test; ++i) {
        CHECK(b.test_typo[i].label == b.test_clean[i].label);
        CHECK(b.test_dialect[i].label == b.test_clean[i].label);
        CHECK(b.test_typo[i].text != b.test_clean[i].text);
        CHECK(word_count(b.test_typo[i].text) == word_count(b.test_clean[i].text));
    }
}

TEST_CASE("label oracle recomputes every emitted label") {
    const BenchmarkSpec spec = tiny_spec(5);
    const GeneratedBenchmark b = generate_benchmark(spec);
    for (const auto& e : b.train) CHECK(infer_label(e.text, spec) == e.label);
    for (const auto& e : b.test_clean) CHECK(infer_label(e.text, spec) == e.label);

    CHECK_THROWS_AS(infer_label("the morning train", spec), DataError);
    CHECK_THROWS_AS(infer_label("great and awful", spec), DataError);
}

TEST_CASE("test sets are disjoint from train") {
    const BenchmarkSpec spec = tiny_spec(9);
    const GeneratedBenchmark b = generate_benchmark(spec);
    std::unordered_set<std::string> train_lines;
    for (const auto& e : b.train) train_lines.insert(e.text);
    for (const auto& e : b.test_clean) CHECK(train_lines.count(e.text) == 0);
    for (const auto& e : b.test_typo) CHECK(train_lines.count(e.text) == 0);
    for (const auto& e : b.test_dialect) CHECK(train_lines.count(e.text) == 0);
    for (const auto& l : b.corpus) CHECK(train_lines.count(l) == 0);

    std::unordered_set<std::string> all;
    for (const auto& e : b.train) CHECK(all.insert(e.text).second);
    for (const auto& e : b.test_clean) CHECK(all.insert(e.text).second);
    for (const auto& l : b.corpus) CHECK(all.insert(l).second);
}

TEST_CASE("written files are byte-identical across runs") {
    const std::string dir = std::filesystem::temp_directory_path() / "noiselab_bench_test";
    std::filesystem::remove_all(dir);
    const BenchmarkSpec spec = tiny_spec(21);
    write_benchmark(generate_benchmark(spec), dir);
    const std::string first = io::read_text(dir + "/train.tsv") +
                              io::read_text(dir + "/test_typo.tsv") +
                              io::read_text(dir + "/corpus.txt");
    write_benchmark(generate_benchmark(spec), dir);
    const std::string second = io::read_text(dir + "/train.tsv") +
                               io::read_text(dir + "/test_typo.tsv") +
                               io::read_text(dir + "/corpus.txt");
    CHECK(first == second);
    CHECK(io::read_text(dir + "/train.tsv").starts_with("text\tlabel\n"));
    std::filesystem::remove_all(dir);
}

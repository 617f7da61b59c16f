#include "noiselab/bench.hpp"

#include <algorithm>
#include <unordered_set>

#include "noiselab/io.hpp"
#include "noiselab/noise.hpp"
#include "noiselab/rng.hpp"
#include "noiselab/text.hpp"

namespace noiselab::bench {

namespace {

const std::string& pick(const std::vector<std::string>& pool, Rng& rng) {
    return pool[rng.next_below(pool.size())];
}

std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

void check_pool(const std::vector<std::string>& pool, const char* what) {
    if (pool.empty()) throw ConfigError(std::string(what) + " pool is empty");
    for (const auto& w : pool)
        if (w.empty() || w.find_first_of(" \t\n") != std::string::npos)
            throw ConfigError(std::string(what) + " pool has an empty or multi-word entry");
}

}  // namespace

void BenchmarkSpec::validate() const {
    check_pool(function_words, "function-word");
    check_pool(content_words, "content-word");
    check_pool(class_a_keywords, "class-a keyword");
    check_pool(class_b_keywords, "class-b keyword");
    if (class_a.empty() || class_b.empty() || class_a == class_b)
        throw ConfigError("class names must be distinct and non-empty");
    if (n_train == 0 || n_test == 0 || n_corpus == 0)
        throw ConfigError("benchmark sizes must be positive");
    if (n_train % 2 != 0 || n_test % 2 != 0)
        throw ConfigError("n_train and n_test must be even for exact label balance");
    if (min_words < 3 || max_words < min_words)
        throw ConfigError("need min_words >= 3 and max_words >= min_words");
    if (corpus_keyword_rate < 0.0 || corpus_keyword_rate > 1.0)
        throw ConfigError("corpus_keyword_rate outside [0,1]");
    std::unordered_set<std::string> kw(class_a_keywords.begin(), class_a_keywords.end());
    for (const auto& w : class_b_keywords)
        if (!kw.insert(w).second) throw ConfigError("keyword in both classes: " + w);
    for (const auto& w : function_words)
        if (kw.count(w)) throw ConfigError("keyword also a function word: " + w);
    for (const auto& w : content_words)
        if (kw.count(w)) throw ConfigError("keyword also a content word: " + w);
    if (templates.empty()) throw ConfigError("template list is empty");
    const std::unordered_set<std::string> fn(function_words.begin(), function_words.end());
    for (const auto& t : templates) {
        const auto words = text::split_fields(t);
        if (words.size() < min_words || words.size() > max_words)
            throw ConfigError("template length outside [min_words, max_words]: " + t);
        size_t k_slots = 0;
        for (const auto& w : words) {
            if (w == "{k}") {
                ++k_slots;
            } else if (w != "{c}" && !fn.count(w)) {
                throw ConfigError("template literal '" + w + "' is not a function word: " + t);
            }
        }
        if (k_slots != 1) throw ConfigError("template needs exactly one {k} slot: " + t);
    }
    for (const auto& [from, to] : dialect_rules) {
        if (from.empty()) throw ConfigError("dialect rule with empty source");
        if (from.find_first_of(" \t\n") != std::string::npos ||
            to.find_first_of(" \t\n") != std::string::npos)
            throw ConfigError("dialect rules must not contain whitespace");
    }
}

BenchmarkSpec BenchmarkSpec::defaults(std::uint64_t seed) {
    BenchmarkSpec s;
    s.seed = seed;
    // every body also appears behind each discourse prefix, so skeletons show
    // up at shifted offsets and the encoder cannot marry absolute positions
    const std::vector<std::string> bodies = {"the {c} was very {k}",
                                             "a {c} is quite {k}",
                                             "it was a {k} {c}",
                                             "there was a {k} {c} there",
                                             "the {c} near the {c} was {k}",
                                             "the {c} at the {c} is {k}",
                                             "the {k} {c} was near the {c}",
                                             "a {c} and a {c} seemed {k}",
                                             "the {c} by the {c} is {k} now",
                                             "it is a {k} {c} by the {c}",
                                             "my {c} in the {c} was {k} today",
                                             "the {c} near my {c} seemed {k} too",
                                             "a {c} by the {c} was quite {k} then",
                                             "the {c} and the {c} seemed very {k} now"};
    for (const auto& body : bodies) {
        s.templates.push_back(body);
        for (const char* prefix : {"and", "so", "then", "but", "still", "now"})
            s.templates.push_back(std::string(prefix) + " " + body);
    }
    s.function_words = {"the", "a",  "it",     "is",     "was", "and", "so",
                        "very", "quite", "then", "still",  "but", "rather", "almost",
                        "as",  "while", "there", "now", "too", "just",
                        "near", "at", "seemed", "by", "my", "in", "today", "that"};
    s.content_words = {"film",    "story",  "plot",    "music",   "acting",  "scene",
                       "dinner",  "coffee", "garden",  "river",   "window",  "market",
                       "journey", "letter", "morning", "evening", "road",    "house",
                       "teacher", "student", "doctor", "weather", "meeting", "ticket",
                       "hotel",   "train",  "city",    "island",  "bridge",  "travel"};
    s.class_a_keywords = {"great",  "lovely",    "charming", "delightful",
                          "superb", "wonderful", "brilliant", "pleasant"};
    s.class_b_keywords = {"awful",    "dreadful", "boring",     "terrible",
                          "horrible", "tedious",  "unpleasant", "miserable"};
    s.dialect_rules = {{"igh", "ich"}, {"ful", "vol"}, {"ing", "in"}, {"ea", "ia"},
                       {"ee", "ie"},   {"oo", "ue"},   {"th", "d"},   {"sh", "sch"},
                       {"ou", "au"},   {"ay", "ei"},   {"er", "a"}};
    return s;
}

std::string dialect_rewrite(const std::string& text,
                            const std::vector<std::pair<std::string, std::string>>& rules) {
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        bool hit = false;
        for (const auto& [from, to] : rules) {
            if (!from.empty() && text.compare(i, from.size(), from) == 0) {
                out += to;
                i += from.size();
                hit = true;
                break;
            }
        }
        if (!hit) out += text[i++];
    }
    return out;
}

std::string infer_label(const std::string& text, const BenchmarkSpec& spec) {
    const std::unordered_set<std::string> a(spec.class_a_keywords.begin(),
                                            spec.class_a_keywords.end());
    const std::unordered_set<std::string> b(spec.class_b_keywords.begin(),
                                            spec.class_b_keywords.end());
    size_t hits_a = 0, hits_b = 0;
    for (const auto& w : text::split_fields(text)) {
        hits_a += a.count(w);
        hits_b += b.count(w);
    }
    if (hits_a + hits_b != 1)
        throw DataError("label oracle expects exactly one keyword, found " +
                        std::to_string(hits_a + hits_b) + " in: " + text);
    return hits_a ? spec.class_a : spec.class_b;
}

GeneratedBenchmark generate_benchmark(const BenchmarkSpec& spec) {
    spec.validate();
    Rng gen(derive_seed(spec.seed, "bench.gen"));
    std::unordered_set<std::string> seen;

    // fill one template: {c} slots draw content words, the {k} slot takes
    // kw(); skeleton literals pass through so sentences share rigid context
    auto fill = [&](auto kw) {
        const auto words = text::split_fields(pick(spec.templates, gen));
        std::vector<std::string> out;
        out.reserve(words.size());
        for (const auto& w : words) {
            if (w == "{c}")
                out.push_back(pick(spec.content_words, gen));
            else if (w == "{k}")
                out.push_back(kw());
            else
                out.push_back(w);
        }
        return join(out);
    };
    auto labeled_sentence = [&](bool class_a) {
        return fill([&]() -> std::string {
            return pick(class_a ? spec.class_a_keywords : spec.class_b_keywords, gen);
        });
    };
    auto corpus_sentence = [&]() {
        return fill([&]() -> std::string {
            if (gen.next_double() < spec.corpus_keyword_rate) {
                const size_t k = gen.next_below(spec.class_a_keywords.size() +
                                                spec.class_b_keywords.size());
                return k < spec.class_a_keywords.size()
                           ? spec.class_a_keywords[k]
                           : spec.class_b_keywords[k - spec.class_a_keywords.size()];
            }
            return pick(spec.content_words, gen);
        });
    };
    auto unique = [&](auto make) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            std::string s = make();
            if (seen.insert(s).second) return s;
        }
        throw DataError("word pools too small to generate enough distinct sentences");
    };

    GeneratedBenchmark out;
    for (size_t i = 0; i < spec.n_train; ++i) {
        const bool a = i % 2 == 0;
        out.train.push_back({unique([&] { return labeled_sentence(a); }),
                             a ? spec.class_a : spec.class_b});
    }
    for (size_t i = 0; i < spec.n_test; ++i) {
        const bool a = i % 2 == 0;
        out.test_clean.push_back({unique([&] { return labeled_sentence(a); }),
                                  a ? spec.class_a : spec.class_b});
    }
    for (size_t i = 0; i < spec.n_corpus; ++i)
        out.corpus.push_back(unique(corpus_sentence));

    std::unordered_set<std::string> train_lines;
    for (const auto& e : out.train) train_lines.insert(e.text);

    // derived test variants keep the clean labels and line count
    const noise::TypoKeyboard kb = noise::TypoKeyboard::qwerty();
    Rng typo_rng(derive_seed(spec.seed, "bench.typo"));
    for (const auto& e : out.test_clean) {
        std::string t = noise::simulate_one_typo_per_word(e.text, kb, typo_rng);
        for (int attempt = 0; attempt < 100 && train_lines.count(t); ++attempt)
            t = noise::simulate_one_typo_per_word(e.text, kb, typo_rng);
        if (train_lines.count(t)) throw DataError("typo split collides with training data");
        out.test_typo.push_back({t, e.label});
    }
    for (const auto& e : out.test_clean) {
        std::string d = dialect_rewrite(e.text, spec.dialect_rules);
        if (train_lines.count(d))
            throw DataError("dialect rewrite collides with training data; adjust rules or seed");
        out.test_dialect.push_back({d, e.label});
    }
    return out;
}

void write_benchmark(const GeneratedBenchmark& b, const std::string& out_dir) {
    auto tsv = [](const std::vector<Labeled>& xs) {
        std::string s = "text\tlabel\n";
        for (const auto& e : xs) s += e.text + "\t" + e.label + "\n";
        return s;
    };
    std::string corpus;
    for (const auto& l : b.corpus) corpus += l + "\n";
    io::atomic_write_text(out_dir + "/corpus.txt", corpus);
    io::atomic_write_text(out_dir + "/train.tsv", tsv(b.train));
    io::atomic_write_text(out_dir + "/test_clean.tsv", tsv(b.test_clean));
    io::atomic_write_text(out_dir + "/test_typo.tsv", tsv(b.test_typo));
    io::atomic_write_text(out_dir + "/test_dialect.tsv", tsv(b.test_dialect));
}

}  // namespace noiselab::bench

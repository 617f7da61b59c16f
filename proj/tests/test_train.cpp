#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "noiselab/checkpoint.hpp"
#include "noiselab/train.hpp"

using namespace noiselab;
using namespace noiselab::train;

namespace {

tok::Vocab letters_vocab() {
    std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    for (char c = 'a'; c <= 'z'; ++c) {
        tokens.push_back(std::string(1, c));
        tokens.push_back("##" + std::string(1, c));
    }
    return tok::Vocab::from_tokens(tokens);
}

// small word pool -> deterministic sentence corpus
std::vector<std::string> toy_corpus(size_t n_lines, uint64_t seed) {
    const std::vector<std::string> words = {"the",  "cat",  "sat",  "on",   "mat",  "dog",  "ran",
                                            "fast", "blue", "sky",  "sun",  "rose", "high", "tree",
                                            "bird", "sang", "loud", "wind", "blew", "cold"};
    Rng rng(seed);
    std::vector<std::string> lines;
    for (size_t i = 0; i < n_lines; ++i) {
        const size_t len = 4 + rng.next_below(5);
        std::string line;
        for (size_t w = 0; w < len; ++w) {
            if (w) line += ' ';
            line += words[rng.next_below(words.size())];
        }
        lines.push_back(line);
    }
    return lines;
}

model::ModelConfig smoke_config(size_t vocab_size) {
    model::ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.hidden_dim = 32;
    cfg.n_heads = 4;
    cfg.ff_dim = 64;
    cfg.vocab_size = vocab_size;
    cfg.max_positions = 16;
    cfg.n_segments = 2;
    cfg.dropout_rate = 0.1;
    return cfg;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

}  // namespace

TEST_CASE("masking policy validation") {
    MaskingPolicy p;
    CHECK_NOTHROW(p.validate());
    p.mask_fraction = 0.7;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = MaskingPolicy{};
    p.select_rate = 1.5;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("pad_batch stacks and masks") {
    tok::Vocab v = letters_vocab();
    auto a = tok::encode("ab", v, 16);
    auto b = tok::encode("a b c", v, 16);
    auto batch = pad_batch({a, b}, v.pad_id());
    CHECK(batch.batch == 2);
    CHECK(batch.seq == 5);  // [CLS] a b c [SEP]
    // row 0: [CLS] a ##b [SEP] [PAD]
    CHECK(batch.ids[3] == v.sep_id());
    CHECK(batch.ids[4] == v.pad_id());
    CHECK(batch.mask[3] == 1);
    CHECK(batch.mask[4] == 0);
    CHECK_NOTHROW(batch.validate());
    CHECK_THROWS_AS(pad_batch({}, 0), DataError);
}

TEST_CASE("mask_batch: rate zero leaves everything alone") {
    tok::Vocab v = letters_vocab();
    auto batch = pad_batch({tok::encode("a b c d", v, 16)}, v.pad_id());
    auto ids_before = batch.ids;
    MaskingPolicy p;
    p.select_rate = 0.0;
    Rng rng(7);
    auto labels = mask_batch(batch, p, v, rng);
    CHECK(batch.ids == ids_before);
    for (int l : labels) CHECK(l == ad::kIgnoreIndex);
}

TEST_CASE("mask_batch: monte-carlo fractions and special immunity") {
    tok::Vocab v = letters_vocab();
    Rng fill(11);
    const size_t rows = 800, width = 150;
    model::Batch batch;
    batch.batch = rows;
    batch.seq = width;
    batch.ids.assign(rows * width, 0);
    batch.mask.assign(rows * width, 1);
    const auto& pool = v.non_special_ids();
    for (size_t r = 0; r < rows; ++r) {
        batch.ids[r * width] = v.cls_id();
        for (size_t i = 1; i + 2 < width; ++i)
            batch.ids[r * width + i] = pool[fill.next_below(pool.size())];
        batch.ids[r * width + width - 2] = v.sep_id();
        batch.ids[r * width + width - 1] = v.pad_id();
        batch.mask[r * width + width - 1] = 0;
    }
    auto ids_before = batch.ids;

    MaskStats stats;
    Rng rng(42);
    auto labels = mask_batch(batch, MaskingPolicy{}, v, rng, &stats);

    REQUIRE(stats.eligible >= 100000);
    const double sel = double(stats.selected) / double(stats.eligible);
    CHECK(std::abs(sel - 0.15) <= 0.01);
    const double m8 = double(stats.masked) / double(stats.selected);
    const double r1 = double(stats.randomized) / double(stats.selected);
    const double k1 = double(stats.kept) / double(stats.selected);
    CHECK(std::abs(m8 - 0.80) <= 0.02);
    CHECK(std::abs(r1 - 0.10) <= 0.02);
    CHECK(std::abs(k1 - 0.10) <= 0.02);
    CHECK(stats.masked + stats.randomized + stats.kept == stats.selected);

    size_t special_violations = 0, random_special = 0;
    for (size_t i = 0; i < batch.ids.size(); ++i) {
        const bool was_special = v.is_special(ids_before[i]) || !batch.mask[i];
        if (was_special && (labels[i] != ad::kIgnoreIndex || batch.ids[i] != ids_before[i]))
            ++special_violations;
        if (labels[i] != ad::kIgnoreIndex && batch.ids[i] != v.mask_id() &&
            batch.ids[i] != ids_before[i] && v.is_special(batch.ids[i]))
            ++random_special;  // random replacement drew a special token
    }
    CHECK(special_violations == 0);
    CHECK(random_special == 0);

    // labels hold the original id exactly at selected positions
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != ad::kIgnoreIndex) CHECK(labels[i] == ids_before[i]);
}

TEST_CASE("mask_batch is deterministic and drafts one position when unlucky") {
    tok::Vocab v = letters_vocab();
    auto mk = [&] { return pad_batch({tok::encode("a b c d e f", v, 16)}, v.pad_id()); };
    auto b1 = mk(), b2 = mk();
    Rng r1(5), r2(5);
    auto l1 = mask_batch(b1, MaskingPolicy{}, v, r1);
    auto l2 = mask_batch(b2, MaskingPolicy{}, v, r2);
    CHECK(b1.ids == b2.ids);
    CHECK(l1 == l2);

    // tiny select rate on a short sequence: every batch still gets >= 1 label
    MaskingPolicy tiny;
    tiny.select_rate = 1e-6;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto b = mk();
        Rng r(seed);
        auto labels = mask_batch(b, tiny, v, r);
        size_t n = 0;
        for (int l : labels)
            if (l != ad::kIgnoreIndex) ++n;
        CHECK(n >= 1);
    }
}

TEST_CASE("mlm training run drives the loss down") {
    auto corpus = toy_corpus(400, 123);
    auto v = tok::train_vocab(corpus, 120, noise::AlphabetSpec::english());
    model::ModelF m = model::build_encoder(smoke_config(v.size()), 77);
    model::attach_mlm_head(m, 77);

    PretrainConfig cfg;
    cfg.noise_level = 0.05;
    cfg.lr = 1e-3;  // smoke-test rate; experiment configs use the defaults
    cfg.batch_size = 16;
    cfg.epochs = 3;
    cfg.seed = 9;
    auto result = mlm_train_run(m, corpus, cfg, v);
    REQUIRE(result.epoch_loss.size() == 3);
    CHECK(result.epoch_loss[2] < result.epoch_loss[0]);
    CHECK(result.epoch_loss[2] < std::log(double(v.size())));
    CHECK(result.steps == 3 * 25);

    CHECK_THROWS_AS(mlm_train_run(m, {}, cfg, v), DataError);
    model::ModelF headless = model::strip_mlm_head(m);
    CHECK_THROWS_AS(mlm_train_run(headless, corpus, cfg, v), ConfigError);
}

TEST_CASE("training continues identically after a checkpoint round trip") {
    auto corpus = toy_corpus(120, 321);
    auto v = tok::train_vocab(corpus, 110, noise::AlphabetSpec::english());
    model::ModelF m = model::build_encoder(smoke_config(v.size()), 13);
    model::attach_mlm_head(m, 13);

    PretrainConfig warm;
    warm.epochs = 1;
    warm.batch_size = 16;
    warm.seed = 50;
    mlm_train_run(m, corpus, warm, v);
    model::save_checkpoint(m, "test_train_ckpt.bin");

    PretrainConfig cont = warm;
    cont.seed = 51;
    auto direct = mlm_train_run(m, corpus, cont, v);

    model::ModelF reloaded = model::load_checkpoint("test_train_ckpt.bin");
    auto resumed = mlm_train_run(reloaded, corpus, cont, v);
    CHECK(direct.epoch_loss == resumed.epoch_loss);

    auto ia = m.params.begin();
    auto ib = reloaded.params.begin();
    for (; ia != m.params.end(); ++ia, ++ib) CHECK(ia->value.data == ib->value.data);
    std::remove("test_train_ckpt.bin");
}

TEST_CASE("dataset loading: header, labels, fixed class sets") {
    const std::string path = "test_train_ds.tsv";
    write_file(path, "text\tlabel\ngood day\tpos\nbad day\tneg\nfine day\tpos\n");
    Dataset ds = load_dataset(path);
    REQUIRE(ds.examples.size() == 3);
    CHECK(ds.class_names == (std::vector<std::string>{"neg", "pos"}));
    CHECK(ds.examples[0].label == 1);
    CHECK(ds.examples[1].label == 0);

    Dataset remapped = load_dataset(path, {"pos", "neg"});
    CHECK(remapped.examples[0].label == 0);

    CHECK_THROWS_AS(load_dataset(path, {"pos"}), DataError);   // neg missing
    write_file(path, "wrong\theader\na\tb\n");
    CHECK_THROWS_AS(load_dataset(path), DataError);
    write_file(path, "text\tlabel\nno tab here\n");
    CHECK_THROWS_AS(load_dataset(path), DataError);
    write_file(path, "text\tlabel\n");
    CHECK_THROWS_AS(load_dataset(path), DataError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_dataset("test_train_missing.tsv"), IoError);
}

TEST_CASE("finetune config keeps to the noise grid") {
    FinetuneConfig cfg;
    for (double g : {0.0, 0.1, 0.2, 0.3, 0.4}) {
        cfg.noise_level = g;
        CHECK_NOTHROW(cfg.validate());
    }
    cfg.noise_level = 0.25;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.allow_any_level = true;
    CHECK_NOTHROW(cfg.validate());
    cfg.noise_level = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("finetune separates a keyword task and evaluates deterministically") {
    std::vector<std::string> corpus;
    Dataset train;
    train.class_names = {"neg", "pos"};
    const std::vector<std::string> fillers = {"day",  "sky", "run", "cat", "dog",
                                              "tree", "sun", "rain"};
    Rng rng(55);
    for (size_t i = 0; i < 24; ++i) {
        const bool pos = i % 2 == 0;
        std::string text = pos ? "good" : "bad";
        for (int w = 0; w < 3; ++w) text += " " + fillers[rng.next_below(fillers.size())];
        train.examples.push_back(Example{text, pos ? 1 : 0});
        corpus.push_back(text);
    }
    auto v = tok::train_vocab(corpus, 100, noise::AlphabetSpec::english());
    model::ModelConfig cfg = smoke_config(v.size());
    model::ModelF base = model::build_encoder(cfg, 31);

    FinetuneConfig fcfg;
    fcfg.noise_level = 0.0;
    fcfg.lr = 1e-3;  // smoke-test rate
    fcfg.epochs = 15;
    fcfg.batch_size = 8;
    fcfg.n_trials = 1;
    fcfg.seed = 2;
    auto outcome = finetune_run(base, train, {{"train", train}}, fcfg, v);
    REQUIRE(outcome.per_trial.size() == 1);
    REQUIRE(outcome.per_trial[0].size() == 1);
    CHECK(outcome.per_trial[0][0] >= 0.95);
    CHECK(outcome.summary[0].half_width == 0.0);  // single trial

    // evaluation is deterministic and batch-size independent
    const double once = evaluate(outcome.last_model, train, v);
    CHECK(once == evaluate(outcome.last_model, train, v));
    CHECK(once == evaluate(outcome.last_model, train, v, 5));
    CHECK(once == outcome.per_trial[0][0]);
    CHECK_THROWS_AS(evaluate(outcome.last_model, Dataset{}, v), DataError);

    // constant-output model scores exactly the class balance
    model::ModelF constant = outcome.last_model;
    for (auto& x : constant.params.at("cls.w").value.data) x = 0.0f;
    constant.params.at("cls.b").value.data = {0.0f, 1.0f};
    CHECK(evaluate(constant, train, v) == 0.5);
}

TEST_CASE("confidence intervals use student-t") {
    CHECK(t_critical_975(4) == doctest::Approx(2.776445).epsilon(1e-6));
    CHECK(t_critical_975(1) == doctest::Approx(12.706205).epsilon(1e-6));
    CHECK(t_critical_975(100) == doctest::Approx(1.959964).epsilon(1e-6));
    CHECK_THROWS_AS(t_critical_975(0), ConfigError);

    auto ci = mean_ci({1, 2, 3, 4, 5});
    CHECK(ci.mean == doctest::Approx(3.0));
    CHECK(ci.half_width == doctest::Approx(1.963243).epsilon(1e-5));
    CHECK(ci.n == 5);

    auto same = mean_ci({0.7, 0.7, 0.7});
    CHECK(same.half_width == 0.0);
    CHECK(mean_ci({0.42}).half_width == 0.0);
    CHECK_THROWS_AS(mean_ci({}), DataError);
}

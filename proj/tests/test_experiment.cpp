#include <filesystem>

#include "doctest.h"
#include "noiselab/experiment.hpp"
#include "noiselab/io.hpp"

using namespace noiselab;
using namespace noiselab::experiment;

namespace {

ExperimentPlan micro_plan(uint64_t seed) {
    ExperimentPlan p;
    p.master_seed = seed;
    p.variants = {"plain"};
    p.cpt_no = true;
    p.cpt_yes = false;
    p.levels = {0.0};
    p.with_lora_grid = false;
    p.vocab_size = 120;
    p.model.n_layers = 2;
    p.model.hidden_dim = 16;
    p.model.n_heads = 4;
    p.model.ff_dim = 32;
    p.model.max_positions = 32;
    p.pretrain.noise_level = 0.0;
    p.pretrain.epochs = 1;
    p.pretrain.lr = 1e-3;
    p.cpt.epochs = 1;
    p.finetune.epochs = 1;
    p.finetune.n_trials = 2;
    p.finetune.vary_trial_seed = false;  // identical trials: zero CI by construction
    p.benchmark = bench::BenchmarkSpec::defaults(seed);
    p.benchmark.n_train = 8;
    p.benchmark.n_test = 8;
    p.benchmark.n_corpus = 40;
    return p;
}

}  // namespace

TEST_CASE("variant names parse to placements") {
    CHECK(parse_variant("plain").n_prepend == 0);
    CHECK(parse_variant("plain").n_append == 0);
    CHECK(parse_variant("pre1").n_prepend == 1);
    CHECK(parse_variant("app1").n_append == 1);
    CHECK(parse_variant("pre1app1").n_prepend == 1);
    CHECK(parse_variant("pre1app1").n_append == 1);
    CHECK(parse_variant("app2").n_append == 2);
    CHECK_THROWS_AS(parse_variant("pre3"), ConfigError);
}

TEST_CASE("plan validation") {
    CHECK_NOTHROW(micro_plan(1).validate());

    ExperimentPlan dup = micro_plan(1);
    dup.variants = {"plain", "plain"};
    CHECK_THROWS_AS(dup.validate(), ConfigError);

    ExperimentPlan none = micro_plan(1);
    none.cpt_no = none.cpt_yes = false;
    CHECK_THROWS_AS(none.validate(), ConfigError);

    ExperimentPlan levels = micro_plan(1);
    levels.levels = {0.15};  // off the sanctioned grid
    CHECK_THROWS_AS(levels.validate(), ConfigError);

    ExperimentPlan empty = micro_plan(1);
    empty.levels.clear();
    CHECK_THROWS_AS(empty.validate(), ConfigError);
}

TEST_CASE("plan loads from key-value text") {
    const config::KV kv = config::KV::parse_text(
        "plan.master_seed = 42\n"
        "plan.variants = plain, pre1app1\n"
        "plan.cpt_no = no\n"
        "plan.levels = 0, 0.4\n"
        "plan.with_lora_grid = false\n"
        "plan.vocab_size = 150\n"
        "model.hidden_dim = 32\n"
        "model.n_heads = 4\n"
        "pretrain.epochs = 2\n"
        "cpt.noise_level = 0.05\n"
        "finetune.n_trials = 1\n"
        "bench.n_train = 16\n");
    const ExperimentPlan p = load_plan(kv);
    CHECK(p.master_seed == 42);
    CHECK(p.variants == (std::vector<std::string>{"plain", "pre1app1"}));
    CHECK_FALSE(p.cpt_no);
    CHECK(p.cpt_yes);
    CHECK(p.levels == (std::vector<double>{0.0, 0.4}));
    CHECK(p.vocab_size == 150);
    CHECK(p.model.hidden_dim == 32);
    CHECK(p.pretrain.epochs == 2);
    CHECK(p.pretrain.noise_level == 0.0);  // from-scratch stage defaults to clean text
    CHECK(p.cpt.noise_level == doctest::Approx(0.05));
    CHECK(p.finetune.n_trials == 1);
    CHECK(p.benchmark.n_train == 16);
    CHECK(p.benchmark.seed == 42);  // follows the master seed unless pinned
    CHECK_NOTHROW(kv.require_all_used());

    const config::KV bad = config::KV::parse_text("plan.variannts = plain\n");
    load_plan(bad);
    CHECK_THROWS_WITH_AS(bad.require_all_used(), doctest::Contains("plan.variannts"),
                         ConfigError);
}

TEST_CASE("fingerprint tracks result-relevant fields") {
    const ExperimentPlan a = micro_plan(5);
    CHECK(plan_fingerprint(a) == plan_fingerprint(micro_plan(5)));

    ExperimentPlan b = micro_plan(5);
    b.benchmark.n_train = 10;
    CHECK(plan_fingerprint(a) != plan_fingerprint(b));

    ExperimentPlan c = micro_plan(5);
    c.finetune.lr *= 2;
    CHECK(plan_fingerprint(a) != plan_fingerprint(c));
}

TEST_CASE("single-cell matrix emits a complete, reproducible report") {
    const std::string dir =
        (std::filesystem::temp_directory_path() / "noiselab_matrix_test").string();
    std::filesystem::remove_all(dir);
    const ExperimentPlan plan = micro_plan(33);

    const MatrixResult first = run_matrix(plan, dir);

    // one cell x three eval sets + diagnostics for the single analysis row
    size_t n_acc = 0, n_word = 0, n_cls = 0, n_err = 0;
    for (const auto& r : first.records) {
        const std::string kind = r.at("kind").get<std::string>();
        n_acc += kind == "accuracy";
        n_word += kind == "word_cosine";
        n_cls += kind == "cls_cosine";
        n_err += kind == "cell_error";
    }
    CHECK(n_acc == 3);
    CHECK(n_word == 3);  // emb, L1, L2
    CHECK(n_cls == 1);
    CHECK(n_err == 0);

    for (const auto& r : first.records) {
        if (r.at("kind") != "accuracy") continue;
        CHECK(r.at("mean").get<double>() >= 0.0);
        CHECK(r.at("mean").get<double>() <= 1.0);
        // vary_trial_seed=false repeats one seed: identical trials, zero width
        CHECK(r.at("half_width").get<double>() == 0.0);
        const auto per_trial = r.at("per_trial").get<std::vector<double>>();
        REQUIRE(per_trial.size() == 2);
        CHECK(per_trial[0] == per_trial[1]);
        const auto seeds = r.at("trial_seeds").get<std::vector<uint64_t>>();
        REQUIRE(seeds.size() == 2);
        CHECK(seeds[0] == seeds[1]);
        CHECK(r.at("config_hash").get<std::string>().size() == 16);
        CHECK(r.at("checkpoint_hash").get<std::string>().size() == 16);
    }

    for (const char* f : {"/bench/corpus.txt", "/bench/train.tsv", "/bench/test_clean.tsv",
                          "/bench/test_typo.tsv", "/bench/test_dialect.tsv", "/vocab.txt",
                          "/ckpt/base.ckpt", "/ckpt/plain.raw.ckpt", "/records.jsonl",
                          "/tables.txt"})
        CHECK(std::filesystem::exists(dir + f));

    CHECK(first.tables.find("Table 1") != std::string::npos);
    CHECK(first.tables == io::read_text(dir + "/tables.txt"));

    const std::string records_once = io::read_text(dir + "/records.jsonl");
    const MatrixResult second = run_matrix(plan, dir);
    CHECK(io::read_text(dir + "/records.jsonl") == records_once);
    CHECK(second.tables == first.tables);
    std::filesystem::remove_all(dir);
}

#include "doctest.h"
#include "noiselab/config.hpp"

using namespace noiselab;
using namespace noiselab::config;

TEST_CASE("key-value parsing") {
    const KV kv = KV::parse_text(
        "# comment line\n"
        "a = 1\n"
        "  b.c =  hello world  # trailing comment\n"
        "\n"
        "list = x, y , z\n"
        "a = 2\n");  // later duplicate wins
    CHECK(kv.get_u64("a", 0) == 2);
    CHECK(kv.get_string("b.c", "") == "hello world");
    CHECK(kv.get_list("list", {}) == (std::vector<std::string>{"x", "y", "z"}));
    CHECK(kv.get_string("missing", "dflt") == "dflt");
    CHECK_FALSE(kv.has("missing"));

    CHECK_THROWS_AS(KV::parse_text("no equals sign"), ConfigError);
    CHECK_THROWS_AS(KV::parse_text(" = value"), ConfigError);
}

TEST_CASE("typed getters reject malformed values") {
    const KV kv = KV::parse_text("n = 12x\nf = 1.5.2\nb = maybe\nd = 1,two\nr = a-b\n");
    CHECK_THROWS_WITH_AS(kv.get_u64("n", 0), doctest::Contains("n"), ConfigError);
    CHECK_THROWS_AS(kv.get_double("f", 0.0), ConfigError);
    CHECK_THROWS_AS(kv.get_bool("b", false), ConfigError);
    CHECK_THROWS_AS(kv.get_double_list("d", {}), ConfigError);
    CHECK_THROWS_AS(kv.get_rule_list("r", {}), ConfigError);
}

TEST_CASE("boolean spellings") {
    const KV kv = KV::parse_text("a=true\nb=no\nc=1\nd=off\n");
    CHECK(kv.get_bool("a", false));
    CHECK_FALSE(kv.get_bool("b", true));
    CHECK(kv.get_bool("c", false));
    CHECK_FALSE(kv.get_bool("d", true));
}

TEST_CASE("unknown keys are flagged after loading") {
    const KV kv = KV::parse_text("model.n_layers = 2\nmodle.hidden_dim = 8\n", "test.cfg");
    load_model_config(kv);
    CHECK_THROWS_WITH_AS(kv.require_all_used(), doctest::Contains("modle.hidden_dim"),
                         ConfigError);
}

TEST_CASE("config loaders cover every field") {
    const KV kv = KV::parse_text(
        "model.n_layers = 3\n"
        "model.hidden_dim = 48\n"
        "model.n_heads = 6\n"
        "model.ff_dim = 96\n"
        "model.vocab_size = 500\n"
        "model.max_positions = 32\n"
        "model.n_segments = 2\n"
        "model.dropout_rate = 0.2\n"
        "model.layernorm_eps = 1e-6\n"
        "pretrain.noise_level = 0.07\n"
        "pretrain.lr = 0.002\n"
        "pretrain.weight_decay = 0.02\n"
        "pretrain.batch_size = 4\n"
        "pretrain.epochs = 3\n"
        "pretrain.seed = 9\n"
        "pretrain.language = de\n"
        "pretrain.masking.select_rate = 0.2\n"
        "pretrain.masking.mask_fraction = 0.7\n"
        "pretrain.masking.random_fraction = 0.2\n"
        "pretrain.masking.keep_fraction = 0.1\n"
        "finetune.noise_level = 0.3\n"
        "finetune.joint_composition = no\n"
        "finetune.lr = 0.0005\n"
        "finetune.epochs = 2\n"
        "finetune.n_trials = 3\n"
        "finetune.vary_trial_seed = false\n"
        "finetune.adaptation = lora\n"
        "finetune.lora.rank = 4\n"
        "finetune.lora.alpha = 16\n"
        "noise.level_p = 0.25\n"
        "noise.ops = ins,del\n"
        "bench.n_train = 10\n"
        "bench.templates = the {c} was very {k}, it was a {k} {c}\n"
        "bench.dialect_rules = ab>ba, cd>dc\n");

    const auto mc = load_model_config(kv);
    CHECK(mc.n_layers == 3);
    CHECK(mc.hidden_dim == 48);
    CHECK(mc.n_heads == 6);
    CHECK(mc.ff_dim == 96);
    CHECK(mc.vocab_size == 500);
    CHECK(mc.max_positions == 32);
    CHECK(mc.dropout_rate == doctest::Approx(0.2));
    CHECK(mc.layernorm_eps == doctest::Approx(1e-6));

    const auto pc = load_pretrain_config(kv);
    CHECK(pc.noise_level == doctest::Approx(0.07));
    CHECK(pc.lr == doctest::Approx(0.002));
    CHECK(pc.batch_size == 4);
    CHECK(pc.epochs == 3);
    CHECK(pc.seed == 9);
    CHECK(pc.language == "de");
    CHECK(pc.masking.select_rate == doctest::Approx(0.2));
    CHECK(pc.masking.mask_fraction == doctest::Approx(0.7));

    const auto fc = load_finetune_config(kv);
    CHECK(fc.noise_level == doctest::Approx(0.3));
    CHECK_FALSE(fc.joint_composition);
    CHECK(fc.lr == doctest::Approx(0.0005));
    CHECK(fc.epochs == 2);
    CHECK(fc.n_trials == 3);
    CHECK_FALSE(fc.vary_trial_seed);
    CHECK(fc.adaptation == train::Adaptation::lora);
    CHECK(fc.lora.rank == 4);
    CHECK(fc.lora.alpha == doctest::Approx(16));

    const auto ns = load_noise_spec(kv);
    CHECK(ns.level_p == doctest::Approx(0.25));
    CHECK(ns.ops.size() == 2);

    const auto bs = load_benchmark_spec(kv);
    CHECK(bs.n_train == 10);
    REQUIRE(bs.templates.size() == 2);
    CHECK(bs.templates[1] == "it was a {k} {c}");
    REQUIRE(bs.dialect_rules.size() == 2);
    CHECK(bs.dialect_rules[0] == (std::pair<std::string, std::string>{"ab", "ba"}));

    // untouched values fall back to struct defaults
    const KV empty = KV::parse_text("");
    CHECK(load_model_config(empty).hidden_dim == model::ModelConfig{}.hidden_dim);
    CHECK(load_finetune_config(empty).adaptation == train::Adaptation::full);
    CHECK(load_pretrain_config(empty).noise_level == doctest::Approx(0.05));
}

TEST_CASE("loaders run the underlying validators") {
    const KV kv = KV::parse_text("model.n_heads = 5\n");  // 64 % 5 != 0
    CHECK_THROWS_AS(load_model_config(kv), ConfigError);
    const KV kv2 = KV::parse_text("finetune.noise_level = 0.15\n");  // off-grid
    CHECK_THROWS_AS(load_finetune_config(kv2), ConfigError);
    const KV kv3 = KV::parse_text("finetune.adaptation = half\n");
    CHECK_THROWS_AS(load_finetune_config(kv3), ConfigError);
}

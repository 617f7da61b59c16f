#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "noiselab/analysis.hpp"
#include "noiselab/bench.hpp"
#include "noiselab/checkpoint.hpp"
#include "noiselab/config.hpp"
#include "noiselab/experiment.hpp"
#include "noiselab/io.hpp"
#include "noiselab/model.hpp"
#include "noiselab/noise.hpp"
#include "noiselab/report.hpp"
#include "noiselab/rng.hpp"
#include "noiselab/train.hpp"
#include "noiselab/vocab.hpp"

namespace nl = noiselab;

namespace {

nl::config::KV load_kv(const std::string& path) {
    return path.empty() ? nl::config::KV{} : nl::config::KV::parse_file(path);
}

std::vector<std::string> texts_of(const nl::train::Dataset& ds) {
    std::vector<std::string> out;
    for (const auto& e : ds.examples) out.push_back(e.text);
    return out;
}

void print_records(const std::vector<nl::report::Record>& records, const std::string& path) {
    if (path.empty())
        for (const auto& r : records) std::cout << r.dump() << "\n";
    else
        nl::report::write_jsonl(records, path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noiselab: noise-robust masked language modeling laboratory"};
    app.require_subcommand(1);
    app.fallthrough();  // let --seed/--out-dir appear after the subcommand too

    std::uint64_t seed = 1;
    std::string out_dir = "out";
    app.add_option("--seed", seed, "master seed (default 1)");
    app.add_option("--out-dir", out_dir, "artifact directory (default ./out)");

    // --- text utilities ---
    double noise_level = 0.1;
    std::string alphabet_id = "en", ops_csv;
    auto* cmd_noise = app.add_subcommand("noise", "noise stdin to stdout, one line per example");
    cmd_noise->add_option("--level", noise_level, "per-letter noise probability")->required();
    cmd_noise->add_option("--alphabet", alphabet_id, "en|de (default en)");
    cmd_noise->add_option("--ops", ops_csv, "subset of ins,del,rep,swap (default all)");
    cmd_noise->callback([&] {
        nl::noise::NoiseSpec spec;
        spec.level_p = noise_level;
        if (!ops_csv.empty()) spec.ops = nl::noise::NoiseSpec::parse_ops(ops_csv);
        spec.seed = seed;
        spec.validate();
        const auto alphabet = nl::noise::AlphabetSpec::for_language(alphabet_id);
        nl::Rng rng(spec.seed);
        std::string line;
        while (std::getline(std::cin, line))
            std::cout << nl::noise::apply_noise(line, spec, alphabet, rng) << "\n";
    });

    auto* cmd_typo = app.add_subcommand("typo", "one keyboard typo per word, stdin to stdout");
    cmd_typo->callback([&] {
        const auto kb = nl::noise::TypoKeyboard::qwerty();
        nl::Rng rng(seed);
        std::string line;
        while (std::getline(std::cin, line))
            std::cout << nl::noise::simulate_one_typo_per_word(line, kb, rng) << "\n";
    });

    // --- vocabulary ---
    std::size_t vocab_target = 300;
    std::string corpus_path, vocab_out, vocab_path;
    auto* cmd_tv = app.add_subcommand("train-vocab", "train a subword inventory from a corpus");
    cmd_tv->add_option("--size", vocab_target, "target inventory size (default 300)");
    cmd_tv->add_option("--alphabet", alphabet_id, "en|de (default en)");
    cmd_tv->add_option("--out", vocab_out, "output path (default <out-dir>/vocab.txt)");
    cmd_tv->add_option("corpus", corpus_path, "one sentence per line")->required();
    cmd_tv->callback([&] {
        const auto corpus = nl::io::read_lines(corpus_path);
        const auto v = nl::tok::train_vocab(corpus, vocab_target,
                                            nl::noise::AlphabetSpec::for_language(alphabet_id));
        const std::string path = vocab_out.empty() ? out_dir + "/vocab.txt" : vocab_out;
        v.save(path);
        std::cout << "vocab: " << v.size() << " tokens -> " << path << "\n";
    });

    auto* cmd_tok = app.add_subcommand("tokenize", "greedy-match tokenize stdin to stdout");
    cmd_tok->add_option("--vocab", vocab_path, "vocab file")->required();
    cmd_tok->callback([&] {
        const auto v = nl::tok::Vocab::load(vocab_path);
        std::string line;
        while (std::getline(std::cin, line)) {
            const auto enc = nl::tok::encode(line, v, 1u << 20);
            std::string joined;
            for (size_t i = 1; i + 1 < enc.tokens.size(); ++i) {
                if (i > 1) joined += ' ';
                joined += enc.tokens[i];
            }
            std::cout << joined << "\n";
        }
    });

    // --- benchmark ---
    std::string config_path;
    auto* cmd_bench = app.add_subcommand("generate-benchmark",
                                         "emit corpus + train/test splits under <out-dir>/bench");
    cmd_bench->add_option("--config", config_path, "key=value config file (bench.* keys)");
    cmd_bench->callback([&] {
        auto kv = load_kv(config_path);
        auto spec = nl::config::load_benchmark_spec(kv);
        if (!kv.has("bench.seed")) spec.seed = seed;
        const auto data = nl::bench::generate_benchmark(spec);
        nl::bench::write_benchmark(data, out_dir + "/bench");
        std::cout << "benchmark: " << data.corpus.size() << " corpus lines, " << data.train.size()
                  << " train, " << data.test_clean.size() << " per test set -> " << out_dir
                  << "/bench\n";
    });

    // --- training stages ---
    std::string ckpt_path, ckpt_out, train_tsv, data_tsv;
    auto* cmd_pre = app.add_subcommand("pretrain", "masked-LM pre-training from scratch");
    cmd_pre->add_option("--config", config_path, "model.* and pretrain.* keys");
    cmd_pre->add_option("--corpus", corpus_path, "default <out-dir>/bench/corpus.txt");
    cmd_pre->add_option("--vocab", vocab_path, "default <out-dir>/vocab.txt");
    cmd_pre->add_option("--out", ckpt_out, "default <out-dir>/ckpt/base.ckpt");
    cmd_pre->callback([&] {
        auto kv = load_kv(config_path);
        const auto v = nl::tok::Vocab::load(vocab_path.empty() ? out_dir + "/vocab.txt" : vocab_path);
        auto cfg = nl::config::load_model_config(kv);
        cfg.vocab_size = v.size();
        auto pc = nl::config::load_pretrain_config(kv);
        pc.noise_level = kv.get_double("pretrain.noise_level", 0.0);  // clean by default
        pc.seed = nl::derive_seed(seed, "pretrain");
        const auto corpus =
            nl::io::read_lines(corpus_path.empty() ? out_dir + "/bench/corpus.txt" : corpus_path);
        auto m = nl::model::build_encoder(cfg, nl::derive_seed(seed, "init"));
        nl::model::attach_mlm_head(m, nl::derive_seed(seed, "init"));
        const auto run = nl::train::mlm_train_run(m, corpus, pc, v);
        const std::string path = ckpt_out.empty() ? out_dir + "/ckpt/base.ckpt" : ckpt_out;
        nl::model::save_checkpoint(m, path);
        std::cout << "pretrain: " << run.steps << " steps, epoch loss";
        for (double l : run.epoch_loss) std::cout << " " << l;
        std::cout << " -> " << path << "\n";
    });

    std::string variant = "pre1app1";
    auto* cmd_surgery = app.add_subcommand("surgery", "wrap a checkpoint in fresh layers");
    cmd_surgery->add_option("--ckpt", ckpt_path, "input checkpoint")->required();
    cmd_surgery->add_option("--variant", variant, "plain|pre1|app1|pre1app1|app2");
    cmd_surgery->add_option("--out", ckpt_out, "default <out-dir>/ckpt/<variant>.raw.ckpt");
    cmd_surgery->callback([&] {
        const auto vs = nl::experiment::parse_variant(variant);
        auto m = nl::model::load_checkpoint(ckpt_path);
        const std::string path =
            ckpt_out.empty() ? out_dir + "/ckpt/" + variant + ".raw.ckpt" : ckpt_out;
        if (vs.n_prepend == 0 && vs.n_append == 0) {
            nl::model::save_checkpoint(m, path);
        } else {
            nl::model::SandwichSpec spec{vs.n_prepend, vs.n_append,
                                         nl::derive_seed(seed, "surgery." + variant)};
            nl::model::save_checkpoint(nl::model::surgery(m, spec), path);
        }
        std::cout << "surgery: " << variant << " -> " << path << "\n";
    });

    double level_override = -1.0;
    auto* cmd_cpt = app.add_subcommand("cpt", "continued pre-training on noised text");
    cmd_cpt->add_option("--ckpt", ckpt_path, "input checkpoint")->required();
    cmd_cpt->add_option("--config", config_path, "cpt.* keys");
    cmd_cpt->add_option("--corpus", corpus_path, "default <out-dir>/bench/corpus.txt");
    cmd_cpt->add_option("--vocab", vocab_path, "default <out-dir>/vocab.txt");
    cmd_cpt->add_option("--noise-level", level_override, "override cpt.noise_level");
    cmd_cpt->add_option("--out", ckpt_out, "output checkpoint")->required();
    cmd_cpt->callback([&] {
        auto kv = load_kv(config_path);
        const auto v = nl::tok::Vocab::load(vocab_path.empty() ? out_dir + "/vocab.txt" : vocab_path);
        auto cc = nl::config::load_pretrain_config(kv, "cpt.");
        if (level_override >= 0) cc.noise_level = level_override;
        cc.seed = nl::derive_seed(seed, "cpt");
        const auto corpus =
            nl::io::read_lines(corpus_path.empty() ? out_dir + "/bench/corpus.txt" : corpus_path);
        auto m = nl::model::load_checkpoint(ckpt_path, v.size());
        const auto run = nl::train::mlm_train_run(m, corpus, cc, v);
        nl::model::save_checkpoint(m, ckpt_out);
        std::cout << "cpt: " << run.steps << " steps, epoch loss";
        for (double l : run.epoch_loss) std::cout << " " << l;
        std::cout << " -> " << ckpt_out << "\n";
    });

    std::size_t trials_override = 0;
    std::vector<std::string> eval_specs;
    std::string records_out, model_out;
    auto* cmd_ft = app.add_subcommand("finetune", "multi-trial classifier fine-tuning");
    cmd_ft->add_option("--ckpt", ckpt_path, "input checkpoint")->required();
    cmd_ft->add_option("--config", config_path, "finetune.* keys");
    cmd_ft->add_option("--train", train_tsv, "default <out-dir>/bench/train.tsv");
    cmd_ft->add_option("--eval", eval_specs, "name=path TSVs (default bench test sets)");
    cmd_ft->add_option("--vocab", vocab_path, "default <out-dir>/vocab.txt");
    cmd_ft->add_option("--trials", trials_override, "override finetune.n_trials");
    cmd_ft->add_option("--noise-level", level_override, "override finetune.noise_level");
    cmd_ft->add_option("--records", records_out, "write accuracy records here (default stdout)");
    cmd_ft->add_option("--save-model", model_out, "save the final trial's model");
    cmd_ft->callback([&] {
        auto kv = load_kv(config_path);
        const auto v = nl::tok::Vocab::load(vocab_path.empty() ? out_dir + "/vocab.txt" : vocab_path);
        auto fc = nl::config::load_finetune_config(kv);
        if (trials_override > 0) fc.n_trials = trials_override;
        if (level_override >= 0) fc.noise_level = level_override;
        fc.seed = seed;
        fc.validate();
        const auto train_ds = nl::train::load_dataset(
            train_tsv.empty() ? out_dir + "/bench/train.tsv" : train_tsv);
        std::vector<nl::train::EvalSet> sets;
        if (eval_specs.empty())
            for (const char* name : {"clean", "typo", "dialect"})
                sets.push_back({name, nl::train::load_dataset(
                                          out_dir + "/bench/test_" + name + ".tsv",
                                          train_ds.class_names)});
        else
            for (const auto& spec : eval_specs) {
                const auto eq = spec.find('=');
                if (eq == std::string::npos)
                    throw nl::ConfigError("--eval expects name=path, got: " + spec);
                sets.push_back({spec.substr(0, eq),
                                nl::train::load_dataset(spec.substr(eq + 1),
                                                        train_ds.class_names)});
            }
        const auto m = nl::model::load_checkpoint(ckpt_path, v.size());
        const auto outcome = nl::train::finetune_run(m, train_ds, sets, fc, v);
        std::vector<nl::report::Record> records;
        for (size_t s = 0; s < outcome.set_names.size(); ++s) {
            nl::report::Record r;
            r["kind"] = "accuracy";
            r["eval_set"] = outcome.set_names[s];
            r["level"] = fc.noise_level;
            r["mean"] = outcome.summary[s].mean;
            r["half_width"] = outcome.summary[s].half_width;
            r["n_trials"] = outcome.summary[s].n;
            r["per_trial"] = outcome.per_trial[s];
            records.push_back(std::move(r));
            std::cerr << outcome.set_names[s] << ": " << outcome.summary[s].mean << " ± "
                      << outcome.summary[s].half_width << "\n";
        }
        print_records(records, records_out);
        if (!model_out.empty()) nl::model::save_checkpoint(outcome.last_model, model_out);
    });

    auto* cmd_eval = app.add_subcommand("eval", "accuracy of a fine-tuned checkpoint on a TSV");
    cmd_eval->add_option("--ckpt", ckpt_path, "fine-tuned checkpoint")->required();
    cmd_eval->add_option("--data", data_tsv, "TSV with text<TAB>label")->required();
    cmd_eval->add_option("--vocab", vocab_path, "default <out-dir>/vocab.txt");
    cmd_eval->callback([&] {
        const auto v = nl::tok::Vocab::load(vocab_path.empty() ? out_dir + "/vocab.txt" : vocab_path);
        const auto m = nl::model::load_checkpoint(ckpt_path, v.size());
        const auto ds = nl::train::load_dataset(data_tsv);
        std::cout << nl::train::evaluate(m, ds, v) << "\n";
    });

    // --- embedding-space diagnostics ---
    auto* cmd_an = app.add_subcommand("analyze", "embedding-space cosine diagnostics");
    cmd_an->require_subcommand(1);
    std::string clean_path, noised_path, pairs_path, tap = "";
    auto* cmd_wc = cmd_an->add_subcommand("word-cosine",
                                          "mean word-level cosine between aligned line files");
    cmd_wc->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
    cmd_wc->add_option("--clean", clean_path, "clean text, one line per example")->required();
    cmd_wc->add_option("--noised", noised_path, "aligned noised text")->required();
    cmd_wc->add_option("--vocab", vocab_path, "default <out-dir>/vocab.txt");
    cmd_wc->add_option("--tap", tap, "layer tap (default: all taps)");
    cmd_wc->add_option("--records", records_out, "write records here (default stdout)");
    cmd_wc->callback([&] {
        const auto v = nl::tok::Vocab::load(vocab_path.empty() ? out_dir + "/vocab.txt" : vocab_path);
        const auto m = nl::model::load_checkpoint(ckpt_path, v.size());
        const auto clean = nl::io::read_lines(clean_path);
        const auto noised = nl::io::read_lines(noised_path);
        std::vector<nl::report::Record> records;
        const auto rep = nl::analysis::layer_report({{ckpt_path, &m}}, clean, noised, v);
        for (size_t c = 0; c < rep.taps.size(); ++c) {
            if (!rep.rows[0].cells[c].present) continue;
            if (!tap.empty() && rep.taps[c] != tap) continue;
            nl::report::Record r;
            r["kind"] = "word_cosine";
            r["model"] = ckpt_path;
            r["tap"] = rep.taps[c];
            r["value"] = rep.rows[0].cells[c].value;
            r["pairs"] = rep.rows[0].cells[c].pairs;
            records.push_back(std::move(r));
        }
        if (!tap.empty() && records.empty())
            records.push_back({{"kind", "word_cosine"},
                               {"model", ckpt_path},
                               {"tap", tap},
                               {"value", nl::analysis::word_cosine(m, clean, noised, tap, v)}});
        print_records(records, records_out);
        std::cerr << rep.render();
    });

    auto* cmd_cc = cmd_an->add_subcommand("cls-cosine",
                                          "first-position cosine over a parallel TSV");
    cmd_cc->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
    cmd_cc->add_option("--pairs", pairs_path, "TSV: standard<TAB>variant per line")->required();
    cmd_cc->add_option("--vocab", vocab_path, "default <out-dir>/vocab.txt");
    cmd_cc->add_option("--tap", tap, "layer tap (default top)");
    cmd_cc->add_option("--records", records_out, "write records here (default stdout)");
    cmd_cc->callback([&] {
        const auto v = nl::tok::Vocab::load(vocab_path.empty() ? out_dir + "/vocab.txt" : vocab_path);
        const auto m = nl::model::load_checkpoint(ckpt_path, v.size());
        std::vector<std::string> left, right;
        for (const auto& line : nl::io::read_lines(pairs_path)) {
            if (line.empty() || line == "standard\tdialect") continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw nl::DataError("parallel file needs standard<TAB>variant: " + line);
            left.push_back(line.substr(0, tab));
            right.push_back(line.substr(tab + 1));
        }
        const std::string use_tap = tap.empty() ? "top" : tap;
        nl::analysis::CosineDiagnostics diag;
        const double value = nl::analysis::cls_cosine(m, left, right, use_tap, v, &diag);
        nl::report::Record r{{"kind", "cls_cosine"}, {"model", ckpt_path},  {"tap", use_tap},
                             {"value", value},       {"pairs", diag.pairs}};
        print_records({r}, records_out);
        std::cerr << "cls_cosine[" << use_tap << "] = " << value << " over " << diag.pairs
                  << " pairs\n";
    });

    // --- orchestration ---
    auto* cmd_matrix = app.add_subcommand("run-matrix", "full experiment grid from a config file");
    cmd_matrix->add_option("--config", config_path, "plan config (key=value)")->required();
    cmd_matrix->callback([&] {
        auto kv = nl::config::KV::parse_file(config_path);
        auto plan = nl::experiment::load_plan(kv);
        kv.require_all_used();
        if (app.count("--seed")) plan.master_seed = seed;
        const auto result = nl::experiment::run_matrix(plan, out_dir);
        std::cout << result.tables;
        std::cerr << "records: " << result.records.size() << " -> " << out_dir
                  << "/records.jsonl\n";
    });

    std::string records_path;
    auto* cmd_report = app.add_subcommand("report", "re-render tables from a records file");
    cmd_report->add_option("--records", records_path, "default <out-dir>/records.jsonl");
    cmd_report->callback([&] {
        const std::string path = records_path.empty() ? out_dir + "/records.jsonl" : records_path;
        const auto records = nl::report::read_jsonl(path);
        const std::string tables = nl::report::render_tables(records);
        nl::io::atomic_write_text(out_dir + "/tables.txt", tables);
        std::cout << tables;
    });

    try {
        CLI11_PARSE(app, argc, argv);
    } catch (const nl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include "noiselab/experiment.hpp"

#include <atomic>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "noiselab/analysis.hpp"
#include "noiselab/checkpoint.hpp"
#include "noiselab/io.hpp"
#include "noiselab/rng.hpp"

namespace noiselab::experiment {

namespace {

std::string level_tag(double level) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "L%.2f", level);
    return buf;
}

struct CellPlan {
    std::string variant;
    bool cpt = false;
    double level = 0.0;
    train::Adaptation adaptation = train::Adaptation::full;

    std::string label() const {
        return std::string("cell.") +
               (adaptation == train::Adaptation::lora ? "lora." : "full.") + variant +
               (cpt ? ".cpt." : ".raw.") + level_tag(level);
    }
};

size_t thread_count() {
    if (const char* env = std::getenv("NOISELAB_THREADS")) {
        const long n = std::atol(env);
        if (n > 1) return static_cast<size_t>(n);
    }
    return 1;
}

}  // namespace

VariantSpec parse_variant(const std::string& name) {
    if (name == "plain") return {name, 0, 0};
    if (name == "pre1") return {name, 1, 0};
    if (name == "app1") return {name, 0, 1};
    if (name == "pre1app1") return {name, 1, 1};
    if (name == "app2") return {name, 0, 2};
    throw ConfigError("unknown variant '" + name +
                      "' (have: plain, pre1, app1, pre1app1, app2)");
}

void ExperimentPlan::validate() const {
    if (variants.empty()) throw ConfigError("plan: variant set is empty");
    for (const auto& v : variants) parse_variant(v);
    for (size_t i = 0; i < variants.size(); ++i)
        for (size_t j = i + 1; j < variants.size(); ++j)
            if (variants[i] == variants[j]) throw ConfigError("plan: duplicate variant " + variants[i]);
    if (levels.empty()) throw ConfigError("plan: noise-level set is empty");
    if (!cpt_no && !cpt_yes) throw ConfigError("plan: no cpt mode enabled");
    if (vocab_size < 10) throw ConfigError("plan: vocab_size too small");
    model.validate();
    pretrain.validate();
    cpt.validate();
    {
        train::FinetuneConfig probe = finetune;  // template is checked per level
        for (double l : levels) {
            probe.noise_level = l;
            probe.validate();
        }
    }
    benchmark.validate();
}

ExperimentPlan load_plan(const config::KV& kv) {
    ExperimentPlan p;
    p.master_seed = kv.get_u64("plan.master_seed", p.master_seed);
    p.variants = kv.get_list("plan.variants", p.variants);
    p.cpt_no = kv.get_bool("plan.cpt_no", p.cpt_no);
    p.cpt_yes = kv.get_bool("plan.cpt_yes", p.cpt_yes);
    p.levels = kv.get_double_list("plan.levels", p.levels);
    p.with_lora_grid = kv.get_bool("plan.with_lora_grid", p.with_lora_grid);
    p.vocab_size = kv.get_size("plan.vocab_size", p.vocab_size);
    p.model = config::load_model_config(kv, "model.");
    p.pretrain = config::load_pretrain_config(kv, "pretrain.");
    p.pretrain.noise_level = kv.get_double("pretrain.noise_level", 0.0);  // clean by default
    p.cpt = config::load_pretrain_config(kv, "cpt.");
    p.finetune = config::load_finetune_config(kv, "finetune.");
    p.benchmark = config::load_benchmark_spec(kv, "bench.");
    p.benchmark.seed = kv.get_u64("bench.seed", p.master_seed);
    p.validate();
    return p;
}

std::string plan_fingerprint(const ExperimentPlan& p) {
    std::ostringstream ss;
    ss << "master_seed=" << p.master_seed << "\n";
    ss << "variants=";
    for (const auto& v : p.variants) ss << v << ",";
    ss << "\ncpt_no=" << p.cpt_no << " cpt_yes=" << p.cpt_yes << "\nlevels=";
    for (double l : p.levels) ss << l << ",";
    ss << "\nwith_lora_grid=" << p.with_lora_grid << " vocab_size=" << p.vocab_size << "\n";
    const auto& m = p.model;
    ss << "model=" << m.n_layers << "/" << m.hidden_dim << "/" << m.n_heads << "/" << m.ff_dim
       << "/" << m.vocab_size << "/" << m.max_positions << "/" << m.n_segments << "/"
       << m.dropout_rate << "/" << m.layernorm_eps << "\n";
    auto pt = [&](const char* tag, const train::PretrainConfig& c) {
        ss << tag << "=" << c.noise_level << "/" << c.lr << "/" << c.weight_decay << "/"
           << c.batch_size << "/" << c.epochs << "/" << c.language << "/" << c.masking.select_rate
           << "/" << c.masking.mask_fraction << "/" << c.masking.random_fraction << "/"
           << c.masking.keep_fraction << "\n";
    };
    pt("pretrain", p.pretrain);
    pt("cpt", p.cpt);
    const auto& f = p.finetune;
    ss << "finetune=" << f.joint_composition << "/" << f.lr << "/" << f.weight_decay << "/"
       << f.batch_size << "/" << f.epochs << "/" << f.n_trials << "/" << f.vary_trial_seed << "/"
       << f.language << "/lora" << f.lora.rank << "a" << f.lora.alpha << "\n";
    const auto& b = p.benchmark;
    ss << "bench=" << b.seed << "/" << b.n_train << "/" << b.n_test << "/" << b.n_corpus << "/"
       << b.min_words << "/" << b.max_words << "/" << b.corpus_keyword_rate << "/" << b.class_a
       << "/" << b.class_b << "\nbench_pools=";
    for (const auto& w : b.templates) ss << w << "|";
    ss << ";";
    for (const auto& w : b.function_words) ss << w << ",";
    ss << ";";
    for (const auto& w : b.content_words) ss << w << ",";
    ss << ";";
    for (const auto& w : b.class_a_keywords) ss << w << ",";
    ss << ";";
    for (const auto& w : b.class_b_keywords) ss << w << ",";
    ss << ";";
    for (const auto& [from, to] : b.dialect_rules) ss << from << ">" << to << ",";
    ss << "\n";
    return ss.str();
}

MatrixResult run_matrix(const ExperimentPlan& plan, const std::string& out_dir) {
    plan.validate();
    const MatrixPaths paths{out_dir};
    const uint64_t master = plan.master_seed;
    const std::string fingerprint = plan_fingerprint(plan);

    // stage 1: benchmark files
    const bench::GeneratedBenchmark data = bench::generate_benchmark(plan.benchmark);
    bench::write_benchmark(data, paths.bench_dir());

    // stage 2: subword vocabulary from the unlabeled corpus
    const noise::AlphabetSpec alphabet = noise::AlphabetSpec::for_language(plan.pretrain.language);
    tok::Vocab vocab = tok::train_vocab(data.corpus, plan.vocab_size, alphabet);
    vocab.save(paths.vocab());

    model::ModelConfig cfg = plan.model;
    cfg.vocab_size = vocab.size();  // the trained inventory decides

    // stage 3: from-scratch MLM pre-training of the plain stack
    model::ModelF base = model::build_encoder(cfg, derive_seed(master, "init"));
    model::attach_mlm_head(base, derive_seed(master, "init"));
    {
        train::PretrainConfig pc = plan.pretrain;
        pc.seed = derive_seed(master, "pretrain");
        train::mlm_train_run(base, data.corpus, pc, vocab);
    }
    model::save_checkpoint(base, paths.base_ckpt());

    // stage 4: layer surgery per variant
    for (const auto& name : plan.variants) {
        const VariantSpec vs = parse_variant(name);
        if (vs.n_prepend == 0 && vs.n_append == 0) {
            model::save_checkpoint(base, paths.raw_ckpt(name));
        } else {
            model::SandwichSpec spec{vs.n_prepend, vs.n_append,
                                     derive_seed(master, "surgery." + name)};
            model::save_checkpoint(model::surgery(base, spec), paths.raw_ckpt(name));
        }
    }

    // stage 5: continued pre-training on noised text
    if (plan.cpt_yes) {
        for (const auto& name : plan.variants) {
            model::ModelF m = model::load_checkpoint(paths.raw_ckpt(name), vocab.size());
            train::PretrainConfig cc = plan.cpt;
            cc.seed = derive_seed(master, "cpt." + name);
            train::mlm_train_run(m, data.corpus, cc, vocab);
            model::save_checkpoint(m, paths.cpt_ckpt(name));
        }
    }

    // stage 6: datasets (class ids fixed by the training split)
    const train::Dataset train_ds = train::load_dataset(paths.train_tsv());
    const std::vector<std::string> set_names = {"clean", "typo", "dialect"};
    std::vector<train::EvalSet> eval_sets;
    for (const auto& s : set_names)
        eval_sets.push_back({s, train::load_dataset(paths.test_tsv(s), train_ds.class_names)});

    // stage 7: fine-tuning grid; one slot per cell so assembly order is
    // independent of scheduling
    std::vector<CellPlan> cells;
    auto push_grid = [&](const std::vector<std::string>& variants, train::Adaptation mode) {
        for (int cpt = 0; cpt < 2; ++cpt) {
            if ((cpt == 0 && !plan.cpt_no) || (cpt == 1 && !plan.cpt_yes)) continue;
            for (const auto& v : variants)
                for (double level : plan.levels) cells.push_back({v, cpt == 1, level, mode});
        }
    };
    push_grid(plan.variants, plan.finetune.adaptation);
    if (plan.with_lora_grid && plan.finetune.adaptation == train::Adaptation::full)
        push_grid({"plain"}, train::Adaptation::lora);

    std::vector<std::vector<report::Record>> slots(cells.size());
    auto run_cell = [&](size_t idx) {
        const CellPlan& c = cells[idx];
        const std::string ckpt = c.cpt ? paths.cpt_ckpt(c.variant) : paths.raw_ckpt(c.variant);
        const uint64_t cell_seed = derive_seed(master, c.label());
        const std::string config_hash = report::hex64(fnv1a64(fingerprint + c.label()));
        const std::string ckpt_hash = report::hex64(report::file_hash(ckpt));
        const char* mode = c.adaptation == train::Adaptation::lora ? "lora" : "full";

        train::FinetuneConfig fc = plan.finetune;
        fc.noise_level = c.level;
        fc.adaptation = c.adaptation;
        fc.seed = cell_seed;

        std::vector<uint64_t> trial_seeds;
        for (size_t t = 0; t < fc.n_trials; ++t)
            trial_seeds.push_back(derive_seed(cell_seed, "trial", fc.vary_trial_seed ? t : 0));

        std::vector<report::Record>& out = slots[idx];
        try {
            const model::ModelF m = model::load_checkpoint(ckpt, vocab.size());
            const train::FinetuneOutcome outcome =
                train::finetune_run(m, train_ds, eval_sets, fc, vocab);
            for (size_t s = 0; s < outcome.set_names.size(); ++s) {
                report::Record r;
                r["kind"] = "accuracy";
                r["variant"] = c.variant;
                r["cpt"] = c.cpt;
                r["adaptation"] = mode;
                r["level"] = c.level;
                r["eval_set"] = outcome.set_names[s];
                r["mean"] = outcome.summary[s].mean;
                r["half_width"] = outcome.summary[s].half_width;
                r["n_trials"] = outcome.summary[s].n;
                r["per_trial"] = outcome.per_trial[s];
                r["trial_seeds"] = trial_seeds;
                r["config_hash"] = config_hash;
                r["checkpoint_hash"] = ckpt_hash;
                out.push_back(std::move(r));
            }
        } catch (const std::exception& e) {
            report::Record r;
            r["kind"] = "cell_error";
            r["variant"] = c.variant;
            r["cpt"] = c.cpt;
            r["adaptation"] = mode;
            r["level"] = c.level;
            r["eval_sets"] = set_names;
            r["error"] = e.what();
            r["trial_seeds"] = trial_seeds;
            r["config_hash"] = config_hash;
            r["checkpoint_hash"] = ckpt_hash;
            out.push_back(std::move(r));
        }
    };

    const size_t n_threads = std::min(thread_count(), cells.size() ? cells.size() : size_t(1));
    if (n_threads <= 1) {
        for (size_t i = 0; i < cells.size(); ++i) run_cell(i);
    } else {
        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) run_cell(i);
        };
        std::vector<std::thread> pool;
        for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    MatrixResult result;
    for (auto& slot : slots)
        for (auto& r : slot) result.records.push_back(std::move(r));

    // stage 8: embedding-space diagnostics on the un-fine-tuned models
    {
        std::vector<std::string> clean, typo, dialect;
        for (const auto& e : data.test_clean) clean.push_back(e.text);
        for (const auto& e : data.test_typo) typo.push_back(e.text);
        for (const auto& e : data.test_dialect) dialect.push_back(e.text);

        struct RowModel {
            std::string variant;
            bool cpt;
            std::string path;
        };
        std::vector<RowModel> rows;
        if (plan.cpt_no) rows.push_back({"plain", false, paths.raw_ckpt("plain")});
        if (plan.cpt_yes)
            for (const auto& name : plan.variants)
                rows.push_back({name, true, paths.cpt_ckpt(name)});

        std::vector<model::ModelF> models;
        for (const auto& rm : rows) models.push_back(model::load_checkpoint(rm.path, vocab.size()));

        std::vector<analysis::NamedModel> named;
        for (size_t i = 0; i < rows.size(); ++i)
            named.push_back({rows[i].variant + (rows[i].cpt ? "+cpt" : ""), &models[i]});
        const analysis::LayerReport word_rep = analysis::layer_report(named, clean, typo, vocab);

        for (size_t i = 0; i < rows.size(); ++i) {
            const std::string config_hash =
                report::hex64(fnv1a64(fingerprint + "analysis." + named[i].id));
            const std::string ckpt_hash = report::hex64(report::file_hash(rows[i].path));
            for (size_t c = 0; c < word_rep.taps.size(); ++c) {
                const analysis::ReportCell& cell = word_rep.rows[i].cells[c];
                if (!cell.present) continue;
                report::Record r;
                r["kind"] = "word_cosine";
                r["variant"] = rows[i].variant;
                r["cpt"] = rows[i].cpt;
                r["tap"] = word_rep.taps[c];
                r["value"] = cell.value;
                r["pairs"] = cell.pairs;
                r["seed"] = master;
                r["config_hash"] = config_hash;
                r["checkpoint_hash"] = ckpt_hash;
                result.records.push_back(std::move(r));
            }
            analysis::CosineDiagnostics diag;
            const double cls = analysis::cls_cosine(models[i], clean, dialect, "top", vocab, &diag);
            report::Record r;
            r["kind"] = "cls_cosine";
            r["variant"] = rows[i].variant;
            r["cpt"] = rows[i].cpt;
            r["eval_set"] = "dialect";
            r["tap"] = "top";
            r["value"] = cls;
            r["pairs"] = diag.pairs;
            r["seed"] = master;
            r["config_hash"] = config_hash;
            r["checkpoint_hash"] = ckpt_hash;
            result.records.push_back(std::move(r));
        }
    }

    report::write_jsonl(result.records, paths.records());
    result.tables = report::render_tables(result.records);
    io::atomic_write_text(paths.tables(), result.tables);
    return result;
}

}  // namespace noiselab::experiment

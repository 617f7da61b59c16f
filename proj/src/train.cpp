#include "noiselab/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "noiselab/optim.hpp"

namespace noiselab::train {

void MaskingPolicy::validate() const {
    if (select_rate < 0.0 || select_rate > 1.0)
        throw ConfigError("masking: select_rate must be in [0,1]");
    for (double f : {mask_fraction, random_fraction, keep_fraction})
        if (f < 0.0 || f > 1.0) throw ConfigError("masking: fractions must be in [0,1]");
    if (std::abs(mask_fraction + random_fraction + keep_fraction - 1.0) > 1e-9)
        throw ConfigError("masking: fractions must sum to 1");
}

model::Batch pad_batch(const std::vector<tok::EncodedSequence>& seqs, int pad_id) {
    if (seqs.empty()) throw DataError("pad_batch: empty batch");
    size_t width = 0;
    for (const auto& s : seqs) width = std::max(width, s.ids.size());
    model::Batch b;
    b.batch = seqs.size();
    b.seq = width;
    b.ids.assign(b.batch * width, pad_id);
    b.mask.assign(b.batch * width, 0);
    for (size_t r = 0; r < seqs.size(); ++r)
        for (size_t i = 0; i < seqs[r].ids.size(); ++i) {
            b.ids[r * width + i] = seqs[r].ids[i];
            b.mask[r * width + i] = 1;
        }
    return b;
}

std::vector<int> mask_batch(model::Batch& batch, const MaskingPolicy& policy, const tok::Vocab& v,
                            Rng& rng, MaskStats* stats) {
    policy.validate();
    batch.validate();
    std::vector<int> labels(batch.ids.size(), ad::kIgnoreIndex);
    MaskStats local;
    const auto& pool = v.non_special_ids();

    auto corrupt = [&](size_t i) {
        labels[i] = batch.ids[i];
        ++local.selected;
        const double r = rng.next_double();
        if (r < policy.mask_fraction) {
            batch.ids[i] = v.mask_id();
            ++local.masked;
        } else if (r < policy.mask_fraction + policy.random_fraction) {
            batch.ids[i] = pool[rng.next_below(pool.size())];
            ++local.randomized;
        } else {
            ++local.kept;
        }
    };

    std::vector<size_t> eligible;
    for (size_t i = 0; i < batch.ids.size(); ++i) {
        if (!batch.mask[i] || v.is_special(batch.ids[i])) continue;
        eligible.push_back(i);
        ++local.eligible;
        if (rng.next_double() < policy.select_rate) corrupt(i);
    }
    // an all-ignored batch has no defined loss; draft one position
    if (local.selected == 0 && policy.select_rate > 0.0 && !eligible.empty())
        corrupt(eligible[rng.next_below(eligible.size())]);

    if (stats) {
        stats->eligible += local.eligible;
        stats->selected += local.selected;
        stats->masked += local.masked;
        stats->randomized += local.randomized;
        stats->kept += local.kept;
    }
    return labels;
}

void PretrainConfig::validate() const {
    if (noise_level < 0.0 || noise_level > 1.0)
        throw ConfigError("pretrain: noise_level must be in [0,1]");
    if (batch_size < 1 || epochs < 1) throw ConfigError("pretrain: batch_size and epochs >= 1");
    if (lr <= 0.0) throw ConfigError("pretrain: lr must be > 0");
    masking.validate();
}

MlmRunResult mlm_train_run(model::ModelF& m, const std::vector<std::string>& corpus,
                           const PretrainConfig& cfg, const tok::Vocab& v) {
    cfg.validate();
    if (corpus.empty()) throw DataError("mlm_train_run: empty corpus");
    if (!m.has_mlm_head) throw ConfigError("mlm_train_run: model has no MLM head");
    if (m.config.vocab_size != v.size())
        throw ConfigError("mlm_train_run: model vocab size " + std::to_string(m.config.vocab_size) +
                          " != vocab " + std::to_string(v.size()));

    const auto alphabet = noise::AlphabetSpec::for_language(cfg.language);
    ad::AdamWConfig oc;
    oc.lr = cfg.lr;
    oc.weight_decay = cfg.weight_decay;
    ad::AdamW<float> opt(oc);

    MlmRunResult result;
    size_t global_step = 0;
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        noise::NoiseSpec nspec;
        nspec.level_p = cfg.noise_level;
        Rng noise_rng(derive_seed(cfg.seed, "mlm.noise", epoch));
        std::vector<tok::EncodedSequence> encoded;
        encoded.reserve(corpus.size());
        for (const auto& line : corpus)
            encoded.push_back(
                tok::encode(noise::apply_noise(line, nspec, alphabet, noise_rng), v,
                            m.config.max_positions));

        std::vector<size_t> order(encoded.size());
        std::iota(order.begin(), order.end(), 0);
        Rng order_rng(derive_seed(cfg.seed, "mlm.order", epoch));
        order_rng.shuffle(order);

        Rng mask_rng(derive_seed(cfg.seed, "mlm.mask", epoch));
        double loss_sum = 0.0;
        size_t batches = 0;
        for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
            const size_t n = std::min(cfg.batch_size, order.size() - at);
            std::vector<tok::EncodedSequence> group;
            group.reserve(n);
            for (size_t k = 0; k < n; ++k) group.push_back(encoded[order[at + k]]);
            model::Batch batch = pad_batch(group, v.pad_id());
            std::vector<int> labels = mask_batch(batch, cfg.masking, v, mask_rng);

            ad::Tape<float> tape;
            auto bm = model::bind(tape, m);
            model::ForwardOptions opts;
            opts.training = true;
            opts.dropout_seed = derive_seed(cfg.seed, "mlm.drop", global_step);
            auto states = model::encoder_forward(bm, batch, opts);
            auto loss = model::mlm_loss(bm, states.flat_final, labels);
            loss_sum += loss.value().data[0];
            ++batches;
            tape.backward(loss);
            opt.step(m.params, bm.grads());
            ++global_step;
        }
        result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    }
    result.steps = global_step;
    return result;
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

Dataset parse_dataset(const std::string& path, const std::vector<std::string>* fixed_classes) {
    auto lines = read_lines(path);
    if (lines.empty() || lines[0] != "text\tlabel")
        throw DataError("dataset " + path + ": missing 'text<TAB>label' header");
    Dataset ds;
    std::vector<std::string> raw_labels;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const size_t tab = lines[i].find('\t');
        if (tab == std::string::npos)
            throw DataError("dataset " + path + " line " + std::to_string(i + 1) + ": no tab");
        ds.examples.push_back(Example{lines[i].substr(0, tab), -1});
        raw_labels.push_back(lines[i].substr(tab + 1));
    }
    if (ds.examples.empty()) throw DataError("dataset " + path + ": no examples");

    if (fixed_classes) {
        ds.class_names = *fixed_classes;
    } else {
        ds.class_names = raw_labels;
        std::sort(ds.class_names.begin(), ds.class_names.end());
        ds.class_names.erase(std::unique(ds.class_names.begin(), ds.class_names.end()),
                             ds.class_names.end());
    }
    for (size_t i = 0; i < raw_labels.size(); ++i) {
        auto it = std::find(ds.class_names.begin(), ds.class_names.end(), raw_labels[i]);
        if (it == ds.class_names.end())
            throw DataError("dataset " + path + ": label '" + raw_labels[i] +
                            "' not in the expected class set");
        ds.examples[i].label = static_cast<int>(it - ds.class_names.begin());
    }
    return ds;
}

}  // namespace

Dataset load_dataset(const std::string& path) { return parse_dataset(path, nullptr); }
Dataset load_dataset(const std::string& path, const std::vector<std::string>& class_names) {
    return parse_dataset(path, &class_names);
}

void FinetuneConfig::validate() const {
    if (noise_level < 0.0 || noise_level > 1.0)
        throw ConfigError("finetune: noise_level must be in [0,1]");
    if (!allow_any_level) {
        bool on_grid = false;
        for (double g : {0.0, 0.1, 0.2, 0.3, 0.4})
            if (std::abs(noise_level - g) < 1e-9) on_grid = true;
        if (!on_grid)
            throw ConfigError("finetune: noise_level " + std::to_string(noise_level) +
                              " off the {0,0.1,0.2,0.3,0.4} grid (use the any-level override)");
    }
    if (batch_size < 1 || epochs < 1 || n_trials < 1)
        throw ConfigError("finetune: batch_size, epochs, n_trials >= 1");
    if (lr <= 0.0) throw ConfigError("finetune: lr must be > 0");
    if (adaptation == Adaptation::lora) lora.validate();
}

model::ModelF finetune_trial(const model::ModelF& base, const Dataset& train,
                             const FinetuneConfig& cfg, uint64_t trial_seed, const tok::Vocab& v) {
    cfg.validate();
    if (train.examples.empty()) throw DataError("finetune_trial: empty training set");
    if (train.class_names.size() < 2) throw DataError("finetune_trial: need >= 2 classes");

    model::ModelF m = model::strip_mlm_head(base);
    if (cfg.adaptation == Adaptation::lora) m = model::apply_lora(m, cfg.lora, trial_seed);
    model::attach_classifier(m, train.class_names.size(), trial_seed);

    // fixed training set for the whole run: original + one noised copy
    std::vector<noise::LabeledExample> data;
    data.reserve(train.examples.size());
    for (const auto& e : train.examples)
        data.push_back(noise::LabeledExample{e.text, std::to_string(e.label)});
    if (cfg.joint_composition) {
        noise::NoiseSpec nspec;
        nspec.level_p = cfg.noise_level;
        nspec.seed = derive_seed(trial_seed, "ft.noise");
        data = noise::build_joint_composition(data, nspec, noise::AlphabetSpec::for_language(cfg.language));
    }
    std::vector<tok::EncodedSequence> encoded;
    std::vector<int> labels;
    encoded.reserve(data.size());
    for (const auto& e : data) {
        encoded.push_back(tok::encode(e.text, v, m.config.max_positions));
        labels.push_back(std::stoi(e.label));
    }

    ad::AdamWConfig oc;
    oc.lr = cfg.lr;
    oc.weight_decay = cfg.weight_decay;
    ad::AdamW<float> opt(oc);
    size_t global_step = 0;
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> order(encoded.size());
        std::iota(order.begin(), order.end(), 0);
        Rng order_rng(derive_seed(trial_seed, "ft.order", epoch));
        order_rng.shuffle(order);
        for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
            const size_t n = std::min(cfg.batch_size, order.size() - at);
            std::vector<tok::EncodedSequence> group;
            std::vector<int> batch_labels;
            for (size_t k = 0; k < n; ++k) {
                group.push_back(encoded[order[at + k]]);
                batch_labels.push_back(labels[order[at + k]]);
            }
            model::Batch batch = pad_batch(group, v.pad_id());

            ad::Tape<float> tape;
            auto bm = model::bind(tape, m);
            model::ForwardOptions opts;
            opts.training = true;
            opts.dropout_seed = derive_seed(trial_seed, "ft.drop", global_step);
            auto states = model::encoder_forward(bm, batch, opts);
            auto loss = model::classify_loss(bm, states, batch_labels);
            tape.backward(loss);
            opt.step(m.params, bm.grads());
            ++global_step;
        }
    }
    return m;
}

double evaluate(const model::ModelF& m, const Dataset& ds, const tok::Vocab& v,
                size_t eval_batch) {
    if (ds.examples.empty()) throw DataError("evaluate: empty dataset");
    if (m.n_classes == 0) throw ConfigError("evaluate: model has no classifier");
    for (const auto& e : ds.examples)
        if (e.label < 0 || static_cast<size_t>(e.label) >= m.n_classes)
            throw DataError("evaluate: label " + std::to_string(e.label) + " outside model's " +
                            std::to_string(m.n_classes) + " classes");

    size_t correct = 0;
    for (size_t at = 0; at < ds.examples.size(); at += eval_batch) {
        const size_t n = std::min(eval_batch, ds.examples.size() - at);
        std::vector<tok::EncodedSequence> group;
        group.reserve(n);
        for (size_t k = 0; k < n; ++k)
            group.push_back(tok::encode(ds.examples[at + k].text, v, m.config.max_positions));
        model::Batch batch = pad_batch(group, v.pad_id());

        ad::Tape<float> tape;
        auto bm = model::bind(tape, m);
        auto states = model::encoder_forward(bm, batch);
        const auto logits = model::classifier_logits(bm, states).value();
        for (size_t row = 0; row < n; ++row) {
            size_t best = 0;
            for (size_t c = 1; c < m.n_classes; ++c)
                if (logits.data[row * m.n_classes + c] > logits.data[row * m.n_classes + best])
                    best = c;
            if (best == static_cast<size_t>(ds.examples[at + row].label)) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(ds.examples.size());
}

double t_critical_975(size_t dof) {
    static const double table[] = {12.706205, 4.302653, 3.182446, 2.776445, 2.570582, 2.446912,
                                   2.364624,  2.306004, 2.262157, 2.228139, 2.200985, 2.178813,
                                   2.160369,  2.144787, 2.131450, 2.119905, 2.109816, 2.100922,
                                   2.093024,  2.085963, 2.079614, 2.073873, 2.068658, 2.063899,
                                   2.059539,  2.055529, 2.051831, 2.048407, 2.045230, 2.042272};
    if (dof == 0) throw ConfigError("t_critical_975: dof must be >= 1");
    if (dof <= 30) return table[dof - 1];
    return 1.959964;  // normal limit
}

MeanCI mean_ci(const std::vector<double>& xs) {
    if (xs.empty()) throw DataError("mean_ci: no samples");
    MeanCI out;
    out.n = xs.size();
    out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() == 1) return out;
    if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs[0]; })) {
        out.mean = xs[0];  // identical trials: zero width, no rounding residue
        return out;
    }
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    const double s = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    out.half_width = t_critical_975(xs.size() - 1) * s / std::sqrt(static_cast<double>(xs.size()));
    return out;
}

FinetuneOutcome finetune_run(const model::ModelF& base, const Dataset& train,
                             const std::vector<EvalSet>& eval_sets, const FinetuneConfig& cfg,
                             const tok::Vocab& v) {
    cfg.validate();
    FinetuneOutcome out;
    for (const auto& s : eval_sets) out.set_names.push_back(s.name);
    out.per_trial.assign(eval_sets.size(), {});

    for (size_t trial = 0; trial < cfg.n_trials; ++trial) {
        const uint64_t trial_seed = derive_seed(cfg.seed, "trial", cfg.vary_trial_seed ? trial : 0);
        model::ModelF m = finetune_trial(base, train, cfg, trial_seed, v);
        for (size_t s = 0; s < eval_sets.size(); ++s)
            out.per_trial[s].push_back(evaluate(m, eval_sets[s].data, v));
        if (trial + 1 == cfg.n_trials) out.last_model = std::move(m);
    }
    for (const auto& xs : out.per_trial) out.summary.push_back(mean_ci(xs));
    return out;
}

}  // namespace noiselab::train

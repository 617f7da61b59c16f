#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noiselab/model.hpp"
#include "noiselab/noise.hpp"
#include "noiselab/vocab.hpp"

namespace noiselab::train {

// MLM corruption policy: select_rate of eligible positions get a label; of
// those, mask_fraction become [MASK], random_fraction a random non-special
// token, keep_fraction stay as they are.
struct MaskingPolicy {
    double select_rate = 0.15;
    double mask_fraction = 0.8;
    double random_fraction = 0.1;
    double keep_fraction = 0.1;

    void validate() const;  // fractions sum to 1; rates within [0,1]
};

struct MaskStats {
    size_t eligible = 0;
    size_t selected = 0;
    size_t masked = 0;
    size_t randomized = 0;
    size_t kept = 0;
};

// Stacks encoded sequences into one padded batch (attention mask 0 on pads).
model::Batch pad_batch(const std::vector<tok::EncodedSequence>& seqs, int pad_id);

// In-place MLM corruption of batch.ids. Returns labels aligned to ids:
// original id at selected positions, ignore index elsewhere. Special tokens
// and padding are never selected. If chance selects nothing in the whole
// batch (and select_rate > 0), one eligible position is drafted so the loss
// stays defined.
std::vector<int> mask_batch(model::Batch& batch, const MaskingPolicy& policy, const tok::Vocab& v,
                            Rng& rng, MaskStats* stats = nullptr);

struct PretrainConfig {
    double noise_level = 0.05;
    double lr = 1e-4;
    double weight_decay = 0.01;
    size_t batch_size = 8;
    size_t epochs = 5;
    uint64_t seed = 0;
    std::string language = "en";
    MaskingPolicy masking;

    void validate() const;
};

struct MlmRunResult {
    std::vector<double> epoch_loss;  // mean batch loss per epoch
    size_t steps = 0;
};

// MLM training pass over the corpus (one sentence per line): every epoch the
// corpus is independently re-noised at cfg.noise_level, encoded, shuffled,
// and trained with AdamW. Serves both from-scratch pretraining (level 0 or
// not) and continued pre-training of a loaded checkpoint. Mutates m.
MlmRunResult mlm_train_run(model::ModelF& m, const std::vector<std::string>& corpus,
                           const PretrainConfig& cfg, const tok::Vocab& v);

// ---- classification fine-tuning ----

struct Example {
    std::string text;
    int label = -1;
};

struct Dataset {
    std::vector<Example> examples;
    std::vector<std::string> class_names;  // sorted; position = label id
};

// TSV with header "text<TAB>label". The two-argument form maps labels by the
// given class list (train-set order) and rejects labels outside it.
Dataset load_dataset(const std::string& path);
Dataset load_dataset(const std::string& path, const std::vector<std::string>& class_names);

enum class Adaptation { full, lora };

struct FinetuneConfig {
    double noise_level = 0.0;  // grid {0,0.1,0.2,0.3,0.4} unless allow_any_level
    bool allow_any_level = false;
    bool joint_composition = true;  // original data + one noised copy
    double lr = 1e-5;
    double weight_decay = 0.01;
    size_t batch_size = 8;
    size_t epochs = 10;
    size_t n_trials = 5;
    bool vary_trial_seed = true;  // false repeats one seed: identical trials, zero CI
    uint64_t seed = 0;
    std::string language = "en";
    Adaptation adaptation = Adaptation::full;
    model::LoRASpec lora;  // used when adaptation == lora

    void validate() const;
};

// One fine-tuning trial: strips any MLM head, applies LoRA when configured,
// attaches a freshly initialized classifier (per-trial seed), builds the
// joint-composition training set (noised copy sampled once, fixed across
// epochs), and trains with AdamW at cfg.lr.
model::ModelF finetune_trial(const model::ModelF& base, const Dataset& train,
                             const FinetuneConfig& cfg, uint64_t trial_seed, const tok::Vocab& v);

// Deterministic accuracy (dropout off): fraction of argmax-correct rows.
double evaluate(const model::ModelF& m, const Dataset& ds, const tok::Vocab& v,
                size_t eval_batch = 32);

// 95% confidence interval, Student-t with n-1 dof.
struct MeanCI {
    double mean = 0.0;
    double half_width = 0.0;
    size_t n = 0;
};
double t_critical_975(size_t dof);
MeanCI mean_ci(const std::vector<double>& xs);

struct EvalSet {
    std::string name;
    Dataset data;
};

struct FinetuneOutcome {
    std::vector<std::string> set_names;
    std::vector<std::vector<double>> per_trial;  // [set][trial] accuracy
    std::vector<MeanCI> summary;                 // per set
    model::ModelF last_model;                    // trained model of the final trial
};

// n_trials independent fine-tunes (per-trial derived seeds vary the head
// init, data order, and the noised copy), each evaluated on every set.
FinetuneOutcome finetune_run(const model::ModelF& base, const Dataset& train,
                             const std::vector<EvalSet>& eval_sets, const FinetuneConfig& cfg,
                             const tok::Vocab& v);

}  // namespace noiselab::train

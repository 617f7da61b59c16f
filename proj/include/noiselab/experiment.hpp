#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noiselab/bench.hpp"
#include "noiselab/config.hpp"
#include "noiselab/model.hpp"
#include "noiselab/report.hpp"
#include "noiselab/train.hpp"
#include "noiselab/vocab.hpp"

namespace noiselab::experiment {

// Stack variants named by their fresh-layer placement.
struct VariantSpec {
    std::string name;
    std::size_t n_prepend = 0;
    std::size_t n_append = 0;
};
// plain | pre1 | app1 | pre1app1 | app2
VariantSpec parse_variant(const std::string& name);

struct ExperimentPlan {
    std::uint64_t master_seed = 1;
    std::vector<std::string> variants = {"plain", "pre1", "app1", "pre1app1", "app2"};
    bool cpt_no = true;   // include rows without continued pre-training
    bool cpt_yes = true;  // include rows with it
    std::vector<double> levels = {0.0, 0.1, 0.2, 0.3, 0.4};
    bool with_lora_grid = true;  // low-rank grid on the plain variant
    std::size_t vocab_size = 300;
    model::ModelConfig model;
    train::PretrainConfig pretrain;  // from-scratch stage (defaults to clean text)
    train::PretrainConfig cpt;       // continued stage on noised text
    train::FinetuneConfig finetune;  // per-cell template; level and seed set per cell
    bench::BenchmarkSpec benchmark;

    void validate() const;
};

// Reads plan.* keys plus the nested config types from a parsed key=value
// file; unread keys can be rejected afterwards via kv.require_all_used().
ExperimentPlan load_plan(const config::KV& kv);

// Canonical serialization of every field that influences results; hashed
// into each record's config_hash.
std::string plan_fingerprint(const ExperimentPlan& plan);

// Artifact layout under an output directory.
struct MatrixPaths {
    std::string root;
    std::string bench_dir() const { return root + "/bench"; }
    std::string corpus() const { return bench_dir() + "/corpus.txt"; }
    std::string train_tsv() const { return bench_dir() + "/train.tsv"; }
    std::string test_tsv(const std::string& set) const {
        return bench_dir() + "/test_" + set + ".tsv";
    }
    std::string vocab() const { return root + "/vocab.txt"; }
    std::string base_ckpt() const { return root + "/ckpt/base.ckpt"; }
    std::string raw_ckpt(const std::string& variant) const {
        return root + "/ckpt/" + variant + ".raw.ckpt";
    }
    std::string cpt_ckpt(const std::string& variant) const {
        return root + "/ckpt/" + variant + ".cpt.ckpt";
    }
    std::string records() const { return root + "/records.jsonl"; }
    std::string tables() const { return root + "/tables.txt"; }
};

struct MatrixResult {
    std::vector<report::Record> records;
    std::string tables;
};

// Full pipeline: benchmark generation, vocabulary training, from-scratch
// pre-training, layer surgery per variant, continued pre-training on noised
// text, the (variant x cpt x level) fine-tuning grid with n_trials each, the
// optional low-rank grid, and the embedding-space diagnostics; emits
// records.jsonl and tables.txt under out_dir. Honors NOISELAB_THREADS for
// concurrent cells (default 1; results are identical either way because each
// cell derives its own rng streams and assembly follows cell order).
// A failed trial aborts only its cell, recorded as a cell_error.
MatrixResult run_matrix(const ExperimentPlan& plan, const std::string& out_dir);

}  // namespace noiselab::experiment

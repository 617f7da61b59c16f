#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "noiselab/bench.hpp"
#include "noiselab/model.hpp"
#include "noiselab/train.hpp"

namespace noiselab::config {

// "key = value" file: one pair per line, '#' starts a comment, blank lines
// ignored. Values keep interior spaces; lists are comma-separated. Later
// duplicates override earlier ones.
class KV {
public:
    static KV parse_text(const std::string& text, const std::string& origin = "<string>");
    static KV parse_file(const std::string& path);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::vector<std::string> get_list(const std::string& key,
                                      const std::vector<std::string>& fallback) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;
    // "from>to" pairs, comma separated
    std::vector<std::pair<std::string, std::string>> get_rule_list(
        const std::string& key, const std::vector<std::pair<std::string, std::string>>& fallback) const;

    // throws ConfigError listing keys that were never read (typo guard)
    void require_all_used() const;
    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
    std::string origin_;
    mutable std::set<std::string> used_;
};

// Loaders for every library config type; each reads "<prefix><field>" keys
// and falls back to the type's defaults.
model::ModelConfig load_model_config(const KV& kv, const std::string& prefix = "model.");
train::MaskingPolicy load_masking_policy(const KV& kv, const std::string& prefix = "masking.");
train::PretrainConfig load_pretrain_config(const KV& kv, const std::string& prefix = "pretrain.");
model::LoRASpec load_lora_spec(const KV& kv, const std::string& prefix = "lora.");
train::FinetuneConfig load_finetune_config(const KV& kv, const std::string& prefix = "finetune.");
noise::NoiseSpec load_noise_spec(const KV& kv, const std::string& prefix = "noise.");
bench::BenchmarkSpec load_benchmark_spec(const KV& kv, const std::string& prefix = "bench.");

}  // namespace noiselab::config

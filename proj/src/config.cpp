#include "noiselab/config.hpp"

#include <cstdlib>
#include <sstream>

#include "noiselab/error.hpp"
#include "noiselab/io.hpp"

namespace noiselab::config {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

KV KV::parse_text(const std::string& text, const std::string& origin) {
    KV kv;
    kv.origin_ = origin;
    std::istringstream ss(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got: " + line);
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        kv.kv_[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

KV KV::parse_file(const std::string& path) { return parse_text(io::read_text(path), path); }

bool KV::has(const std::string& key) const { return kv_.count(key) != 0; }

std::string KV::get_string(const std::string& key, const std::string& fallback) const {
    used_.insert(key);
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

bool KV::get_bool(const std::string& key, bool fallback) const {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got: " + v);
}

std::uint64_t KV::get_u64(const std::string& key, std::uint64_t fallback) const {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        size_t pos = 0;
        const std::uint64_t v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an unsigned integer, got: " + it->second);
    }
}

std::size_t KV::get_size(const std::string& key, std::size_t fallback) const {
    return static_cast<std::size_t>(get_u64(key, fallback));
}

double KV::get_double(const std::string& key, double fallback) const {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got: " + it->second);
    }
}

std::vector<std::string> KV::get_list(const std::string& key,
                                      const std::vector<std::string>& fallback) const {
    used_.insert(key);
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : split_csv(it->second);
}

std::vector<double> KV::get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<double> out;
    for (const auto& item : split_csv(it->second)) {
        try {
            size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw ConfigError(key + ": expected numbers, got: " + item);
        }
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> KV::get_rule_list(
    const std::string& key,
    const std::vector<std::pair<std::string, std::string>>& fallback) const {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& item : split_csv(it->second)) {
        const size_t gt = item.find('>');
        if (gt == std::string::npos)
            throw ConfigError(key + ": expected 'from>to' pairs, got: " + item);
        out.emplace_back(trim(item.substr(0, gt)), trim(item.substr(gt + 1)));
    }
    return out;
}

void KV::require_all_used() const {
    std::string unknown;
    for (const auto& [k, v] : kv_)
        if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
    if (!unknown.empty())
        throw ConfigError(origin_ + ": unknown config keys: " + unknown);
}

model::ModelConfig load_model_config(const KV& kv, const std::string& p) {
    model::ModelConfig c;
    c.n_layers = kv.get_size(p + "n_layers", c.n_layers);
    c.hidden_dim = kv.get_size(p + "hidden_dim", c.hidden_dim);
    c.n_heads = kv.get_size(p + "n_heads", c.n_heads);
    c.ff_dim = kv.get_size(p + "ff_dim", c.ff_dim);
    c.vocab_size = kv.get_size(p + "vocab_size", c.vocab_size);
    c.max_positions = kv.get_size(p + "max_positions", c.max_positions);
    c.n_segments = kv.get_size(p + "n_segments", c.n_segments);
    c.dropout_rate = kv.get_double(p + "dropout_rate", c.dropout_rate);
    c.layernorm_eps = kv.get_double(p + "layernorm_eps", c.layernorm_eps);
    c.validate();
    return c;
}

train::MaskingPolicy load_masking_policy(const KV& kv, const std::string& p) {
    train::MaskingPolicy m;
    m.select_rate = kv.get_double(p + "select_rate", m.select_rate);
    m.mask_fraction = kv.get_double(p + "mask_fraction", m.mask_fraction);
    m.random_fraction = kv.get_double(p + "random_fraction", m.random_fraction);
    m.keep_fraction = kv.get_double(p + "keep_fraction", m.keep_fraction);
    m.validate();
    return m;
}

train::PretrainConfig load_pretrain_config(const KV& kv, const std::string& p) {
    train::PretrainConfig c;
    c.noise_level = kv.get_double(p + "noise_level", c.noise_level);
    c.lr = kv.get_double(p + "lr", c.lr);
    c.weight_decay = kv.get_double(p + "weight_decay", c.weight_decay);
    c.batch_size = kv.get_size(p + "batch_size", c.batch_size);
    c.epochs = kv.get_size(p + "epochs", c.epochs);
    c.seed = kv.get_u64(p + "seed", c.seed);
    c.language = kv.get_string(p + "language", c.language);
    c.masking = load_masking_policy(kv, p + "masking.");
    c.validate();
    return c;
}

model::LoRASpec load_lora_spec(const KV& kv, const std::string& p) {
    model::LoRASpec s;
    s.rank = kv.get_size(p + "rank", s.rank);
    s.alpha = kv.get_double(p + "alpha", s.alpha);
    s.validate();
    return s;
}

train::FinetuneConfig load_finetune_config(const KV& kv, const std::string& p) {
    train::FinetuneConfig c;
    c.noise_level = kv.get_double(p + "noise_level", c.noise_level);
    c.allow_any_level = kv.get_bool(p + "allow_any_level", c.allow_any_level);
    c.joint_composition = kv.get_bool(p + "joint_composition", c.joint_composition);
    c.lr = kv.get_double(p + "lr", c.lr);
    c.weight_decay = kv.get_double(p + "weight_decay", c.weight_decay);
    c.batch_size = kv.get_size(p + "batch_size", c.batch_size);
    c.epochs = kv.get_size(p + "epochs", c.epochs);
    c.n_trials = kv.get_size(p + "n_trials", c.n_trials);
    c.vary_trial_seed = kv.get_bool(p + "vary_trial_seed", c.vary_trial_seed);
    c.seed = kv.get_u64(p + "seed", c.seed);
    c.language = kv.get_string(p + "language", c.language);
    const std::string mode = kv.get_string(p + "adaptation", "full");
    if (mode == "full")
        c.adaptation = train::Adaptation::full;
    else if (mode == "lora")
        c.adaptation = train::Adaptation::lora;
    else
        throw ConfigError(p + "adaptation: expected full|lora, got: " + mode);
    c.lora = load_lora_spec(kv, p + "lora.");
    c.validate();
    return c;
}

noise::NoiseSpec load_noise_spec(const KV& kv, const std::string& p) {
    noise::NoiseSpec s;
    s.level_p = kv.get_double(p + "level_p", s.level_p);
    if (kv.has(p + "ops")) s.ops = noise::NoiseSpec::parse_ops(kv.get_string(p + "ops", ""));
    s.seed = kv.get_u64(p + "seed", s.seed);
    s.validate();
    return s;
}

bench::BenchmarkSpec load_benchmark_spec(const KV& kv, const std::string& p) {
    bench::BenchmarkSpec s = bench::BenchmarkSpec::defaults(kv.get_u64(p + "seed", 1));
    s.n_train = kv.get_size(p + "n_train", s.n_train);
    s.n_test = kv.get_size(p + "n_test", s.n_test);
    s.n_corpus = kv.get_size(p + "n_corpus", s.n_corpus);
    s.min_words = kv.get_size(p + "min_words", s.min_words);
    s.max_words = kv.get_size(p + "max_words", s.max_words);
    s.corpus_keyword_rate = kv.get_double(p + "corpus_keyword_rate", s.corpus_keyword_rate);
    s.class_a = kv.get_string(p + "class_a", s.class_a);
    s.class_b = kv.get_string(p + "class_b", s.class_b);
    s.templates = kv.get_list(p + "templates", s.templates);
    s.function_words = kv.get_list(p + "function_words", s.function_words);
    s.content_words = kv.get_list(p + "content_words", s.content_words);
    s.class_a_keywords = kv.get_list(p + "class_a_keywords", s.class_a_keywords);
    s.class_b_keywords = kv.get_list(p + "class_b_keywords", s.class_b_keywords);
    s.dialect_rules = kv.get_rule_list(p + "dialect_rules", s.dialect_rules);
    s.validate();
    return s;
}

}  // namespace noiselab::config

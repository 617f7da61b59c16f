#include "noiselab/model.hpp"

#include <algorithm>

namespace noiselab::model {

void ModelConfig::validate() const {
    if (n_layers < 1 || hidden_dim < 1 || n_heads < 1 || ff_dim < 1 || vocab_size < 1 ||
        max_positions < 1 || n_segments < 1)
        throw ConfigError("model config: all dims must be >= 1");
    if (hidden_dim % n_heads != 0)
        throw ConfigError("model config: hidden_dim " + std::to_string(hidden_dim) +
                          " not divisible by n_heads " + std::to_string(n_heads));
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("model config: dropout_rate must be in [0,1)");
    if (layernorm_eps <= 0.0) throw ConfigError("model config: layernorm_eps must be > 0");
}

void SandwichSpec::validate() const {
    if (n_prepend > 2 || n_append > 2)
        throw ConfigError("sandwich spec: at most 2 layers per side, got " +
                          std::to_string(n_prepend) + "/" + std::to_string(n_append));
}

std::string variant_name(const SandwichSpec& spec) {
    if (spec.n_prepend == 0 && spec.n_append == 0) return "plain";
    if (spec.n_prepend == 1 && spec.n_append == 0) return "pre1";
    if (spec.n_prepend == 0 && spec.n_append == 1) return "app1";
    if (spec.n_prepend == 1 && spec.n_append == 1) return "pre1app1";
    if (spec.n_prepend == 0 && spec.n_append == 2) return "app2";
    return "pre" + std::to_string(spec.n_prepend) + "app" + std::to_string(spec.n_append);
}

void LoRASpec::validate() const {
    if (rank < 1) throw ConfigError("lora spec: rank must be >= 1");
    if (alpha < 0.0) throw ConfigError("lora spec: alpha must be >= 0 (0 = rank)");
}

namespace {

constexpr double kInitStd = 0.02;
constexpr double kInitCutoff = 2.0;  // resample outside +/- 2 sigma

ad::Tensor<float> trunc_normal(std::vector<size_t> shape, Rng& rng) {
    ad::Tensor<float> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<float>(rng.truncated_normal(kInitStd, kInitCutoff));
    return t;
}

// One post-LN encoder layer; the single init path shared by build_encoder
// and surgery so fresh sandwich layers follow the original scheme exactly.
void add_encoder_layer(ad::ParameterStore<float>& params, const std::string& prefix,
                       const ModelConfig& cfg, Rng& rng) {
    const size_t h = cfg.hidden_dim, ff = cfg.ff_dim;
    const std::string at = prefix + ".attn", fn = prefix + ".ffn";
    for (const char* which : {"q", "k", "v", "o"}) {
        params.add(at + ".w" + which, trunc_normal({h, h}, rng));
        params.add(at + ".b" + which, ad::Tensor<float>({h}));
    }
    params.add(at + ".ln.gamma", ad::Tensor<float>({h}, 1.0f));
    params.add(at + ".ln.beta", ad::Tensor<float>({h}));
    params.add(fn + ".w1", trunc_normal({h, ff}, rng));
    params.add(fn + ".b1", ad::Tensor<float>({ff}));
    params.add(fn + ".w2", trunc_normal({ff, h}, rng));
    params.add(fn + ".b2", ad::Tensor<float>({h}));
    params.add(fn + ".ln.gamma", ad::Tensor<float>({h}, 1.0f));
    params.add(fn + ".ln.beta", ad::Tensor<float>({h}));
}

}  // namespace

ModelF build_encoder(const ModelConfig& config, uint64_t seed) {
    config.validate();
    ModelF m;
    m.config = config;

    Rng embed_rng(derive_seed(seed, "embed"));
    const size_t h = config.hidden_dim;
    m.params.add("embed.tok", trunc_normal({config.vocab_size, h}, embed_rng));
    m.params.add("embed.pos", trunc_normal({config.max_positions, h}, embed_rng));
    m.params.add("embed.seg", trunc_normal({config.n_segments, h}, embed_rng));
    m.params.add("embed.ln.gamma", ad::Tensor<float>({h}, 1.0f));
    m.params.add("embed.ln.beta", ad::Tensor<float>({h}));

    for (size_t i = 0; i < config.n_layers; ++i) {
        const std::string prefix = "orig." + std::to_string(i);
        Rng layer_rng(derive_seed(seed, "layer", i));
        add_encoder_layer(m.params, prefix, config, layer_rng);
        m.layers.push_back(LayerInfo{prefix, "L" + std::to_string(i + 1)});
    }
    return m;
}

void attach_mlm_head(ModelF& m, uint64_t seed) {
    if (m.has_mlm_head) throw ConfigError("attach_mlm_head: model already has one");
    const size_t h = m.config.hidden_dim;
    Rng rng(derive_seed(seed, "mlm"));
    m.params.add("mlm.dense.w", trunc_normal({h, h}, rng));
    m.params.add("mlm.dense.b", ad::Tensor<float>({h}));
    m.params.add("mlm.ln.gamma", ad::Tensor<float>({h}, 1.0f));
    m.params.add("mlm.ln.beta", ad::Tensor<float>({h}));
    m.params.add("mlm.bias", ad::Tensor<float>({m.config.vocab_size}));
    m.has_mlm_head = true;
}

void attach_classifier(ModelF& m, size_t n_classes, uint64_t seed) {
    if (m.n_classes != 0) throw ConfigError("attach_classifier: model already has one");
    if (n_classes < 2) throw ConfigError("attach_classifier: need at least 2 classes");
    Rng rng(derive_seed(seed, "cls"));
    m.params.add("cls.w", trunc_normal({m.config.hidden_dim, n_classes}, rng));
    m.params.add("cls.b", ad::Tensor<float>({n_classes}));
    m.n_classes = n_classes;
}

ModelF strip_mlm_head(const ModelF& m) {
    ModelF out;
    out.config = m.config;
    out.sandwich = m.sandwich;
    out.layers = m.layers;
    out.n_classes = m.n_classes;
    out.has_lora = m.has_lora;
    out.lora = m.lora;
    for (const auto& p : m.params)
        if (p.name.rfind("mlm.", 0) != 0) out.params.add(p.name, p.value, p.trainable);
    return out;
}

ModelF surgery(const ModelF& base, const SandwichSpec& spec) {
    spec.validate();
    ModelF out;
    out.config = base.config;
    out.sandwich = SandwichSpec{base.sandwich.n_prepend + spec.n_prepend,
                                base.sandwich.n_append + spec.n_append, spec.init_seed};
    out.has_mlm_head = base.has_mlm_head;
    out.n_classes = base.n_classes;
    out.has_lora = base.has_lora;
    out.lora = base.lora;
    for (const auto& p : base.params) out.params.add(p.name, p.value, p.trainable);

    size_t pre_count = 0, post_count = 0;
    for (const auto& l : base.layers) {
        if (l.prefix.rfind("pre.", 0) == 0) ++pre_count;
        if (l.prefix.rfind("post.", 0) == 0) ++post_count;
    }

    // New prepends go below everything; new appends above everything. Each
    // fresh slot draws from its own derived stream, so building (1,1) in one
    // call or via (1,0) then (0,1) yields bitwise-identical weights.
    std::vector<LayerInfo> pre_layers;
    for (size_t k = 0; k < spec.n_prepend; ++k) {
        const size_t slot = pre_count + k;
        const std::string prefix = "pre." + std::to_string(slot);
        Rng rng(derive_seed(spec.init_seed, "pre", slot));
        add_encoder_layer(out.params, prefix, out.config, rng);
        pre_layers.push_back(LayerInfo{prefix, ""});
    }
    // stack order: later-added prepends sit lower
    std::reverse(pre_layers.begin(), pre_layers.end());
    std::vector<LayerInfo> old_pre, body;
    for (const auto& l : base.layers)
        (l.prefix.rfind("pre.", 0) == 0 ? old_pre : body).push_back(l);
    out.layers = pre_layers;
    out.layers.insert(out.layers.end(), old_pre.begin(), old_pre.end());
    out.layers.insert(out.layers.end(), body.begin(), body.end());
    for (size_t k = 0; k < spec.n_append; ++k) {
        const size_t slot = post_count + k;
        const std::string prefix = "post." + std::to_string(slot);
        Rng rng(derive_seed(spec.init_seed, "post", slot));
        add_encoder_layer(out.params, prefix, out.config, rng);
        out.layers.push_back(LayerInfo{prefix, ""});
    }

    // Relabel sandwich slots from final positions: the prepend adjacent to
    // the originals is L0 (anything below it L0b); appends are LF then LF2.
    size_t total_pre = 0, seen_pre = 0, seen_post = 0;
    for (const auto& l : out.layers)
        if (l.prefix.rfind("pre.", 0) == 0) ++total_pre;
    for (auto& l : out.layers) {
        if (l.prefix.rfind("pre.", 0) == 0)
            l.label = (++seen_pre == total_pre) ? "L0" : "L0b";
        else if (l.prefix.rfind("post.", 0) == 0)
            l.label = (++seen_post == 1) ? "LF" : "LF2";
    }
    return out;
}

ModelF apply_lora(const ModelF& base, const LoRASpec& spec, uint64_t seed) {
    spec.validate();
    ModelF out;
    out.config = base.config;
    out.sandwich = base.sandwich;
    out.layers = base.layers;
    out.has_mlm_head = base.has_mlm_head;
    out.n_classes = base.n_classes;
    out.has_lora = true;
    out.lora = spec;

    // Base weights all freeze; only adapters and the classifier head train.
    for (const auto& p : base.params) {
        const bool head = p.name.rfind("cls.", 0) == 0;
        out.params.add(p.name, p.value, head);
    }
    const size_t h = out.config.hidden_dim, r = spec.rank;
    for (size_t i = 0; i < out.layers.size(); ++i) {
        const std::string at = out.layers[i].prefix + ".attn";
        for (const char* which : {"q", "k", "v", "o"}) {
            Rng rng(derive_seed(seed, std::string("lora.") + which, i));
            const std::string target = at + ".w" + which;
            out.params.add(target + ".lora_a", trunc_normal({r, h}, rng), true);
            out.params.add(target + ".lora_b", ad::Tensor<float>({h, r}), true);
        }
    }
    return out;
}

size_t encoder_param_count(const ModelConfig& cfg, size_t total_layers) {
    const size_t h = cfg.hidden_dim, ff = cfg.ff_dim;
    const size_t embeddings = (cfg.vocab_size + cfg.max_positions + cfg.n_segments) * h + 2 * h;
    const size_t per_layer = 4 * h * h + 4 * h  // attention projections + biases
                             + 2 * h * ff + h + ff  // FFN weights + biases
                             + 4 * h;               // two layernorms
    return embeddings + total_layers * per_layer;
}

size_t lora_trainable_count(const ModelConfig& cfg, size_t total_layers, const LoRASpec& spec,
                            size_t n_classes) {
    const size_t h = cfg.hidden_dim;
    const size_t adapters = total_layers * 4 * spec.rank * (h + h);
    const size_t head = n_classes ? h * n_classes + n_classes : 0;
    return adapters + head;
}

}  // namespace noiselab::model

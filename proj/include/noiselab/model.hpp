#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "noiselab/autodiff.hpp"
#include "noiselab/error.hpp"
#include "noiselab/params.hpp"
#include "noiselab/rng.hpp"
#include "noiselab/tensor.hpp"

namespace noiselab::model {

struct ModelConfig {
    size_t n_layers = 4;
    size_t hidden_dim = 64;
    size_t n_heads = 4;
    size_t ff_dim = 128;
    size_t vocab_size = 2000;
    size_t max_positions = 64;
    size_t n_segments = 2;
    double dropout_rate = 0.1;
    double layernorm_eps = 1e-12;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// Stack surgery: freshly initialized encoder layers around the original
// stack. Paper-scale variants use (0,0), (1,0), (0,1), (1,1), (0,2);
// anything up to 2/2 is accepted for ablation.
struct SandwichSpec {
    size_t n_prepend = 0;
    size_t n_append = 0;
    uint64_t init_seed = 0;

    void validate() const;
    bool operator==(const SandwichSpec&) const = default;
};

// Short structural name for reports: plain, pre1, app1, pre1app1, app2.
std::string variant_name(const SandwichSpec& spec);

// Low-rank adapters on the four attention projections of every layer.
struct LoRASpec {
    size_t rank = 8;
    double alpha = 0.0;  // 0 = default to rank (scaling 1)

    double scaling() const { return (alpha <= 0.0 ? static_cast<double>(rank) : alpha) /
                                    static_cast<double>(rank); }
    void validate() const;
    bool operator==(const LoRASpec&) const = default;
};

// One encoder layer's identity in the stack: parameter prefix (records
// provenance: orig.*, pre.*, post.*) and human label (L1..LN originals,
// L0 prepended, LF/LF2 appended) used by the analysis taps.
struct LayerInfo {
    std::string prefix;
    std::string label;
    bool operator==(const LayerInfo&) const = default;
};

template <typename T>
struct Model {
    ModelConfig config;            // original build config (n_layers = original depth)
    SandwichSpec sandwich;         // (0,0) until surgery
    std::vector<LayerInfo> layers; // bottom to top; the stack's source of truth
    ad::ParameterStore<T> params;
    bool has_mlm_head = false;
    size_t n_classes = 0;          // 0 = no classifier head
    bool has_lora = false;
    LoRASpec lora;

    size_t depth() const { return layers.size(); }
};

using ModelF = Model<float>;

// ---- construction (float storage; cast_model for f64 verification) ----

ModelF build_encoder(const ModelConfig& config, uint64_t seed);
void attach_mlm_head(ModelF& model, uint64_t seed);
void attach_classifier(ModelF& model, size_t n_classes, uint64_t seed);
ModelF strip_mlm_head(const ModelF& model);

ModelF surgery(const ModelF& base, const SandwichSpec& spec);
ModelF apply_lora(const ModelF& base, const LoRASpec& spec, uint64_t seed);

// Closed-form encoder weight count (embeddings + layers; heads excluded).
size_t encoder_param_count(const ModelConfig& config, size_t total_layers);
// Closed-form trainable count after LoRA: adapters + classifier head.
size_t lora_trainable_count(const ModelConfig& config, size_t total_layers, const LoRASpec& spec,
                            size_t n_classes);

template <typename U>
Model<U> cast_model(const ModelF& m) {
    Model<U> out;
    out.config = m.config;
    out.sandwich = m.sandwich;
    out.layers = m.layers;
    out.params = m.params.template cast<U>();
    out.has_mlm_head = m.has_mlm_head;
    out.n_classes = m.n_classes;
    out.has_lora = m.has_lora;
    out.lora = m.lora;
    return out;
}

// ---- forward ----

// Padded, tokenized batch. mask: 1 = real token, 0 = padding.
struct Batch {
    size_t batch = 0;
    size_t seq = 0;
    std::vector<int> ids;        // batch*seq
    std::vector<uint8_t> mask;   // batch*seq
    std::vector<int> segments;   // batch*seq; empty = all zeros

    void validate() const {
        if (batch * seq != ids.size() || ids.size() != mask.size() ||
            (!segments.empty() && segments.size() != ids.size()))
            throw ShapeError("batch: inconsistent field sizes for " + std::to_string(batch) + "x" +
                             std::to_string(seq));
    }
};

struct ForwardOptions {
    bool training = false;    // enables dropout
    uint64_t dropout_seed = 0;  // per-step stream; ops consume it in creation order
};

// Model parameters registered as leaves on one tape. Rebind per step.
template <typename T>
struct BoundModel {
    const Model<T>* model = nullptr;
    ad::Tape<T>* tape = nullptr;
    std::unordered_map<std::string, ad::Var<T>> vars;

    ad::Var<T> var(const std::string& name) const {
        auto it = vars.find(name);
        if (it == vars.end()) throw ConfigError("model parameter not bound: " + name);
        return it->second;
    }
    bool bound(const std::string& name) const { return vars.count(name) != 0; }

    // Gradients of trainable parameters after tape.backward.
    ad::GradMap<T> grads() const {
        ad::GradMap<T> out;
        for (const auto& p : model->params)
            if (p.trainable) out.emplace(p.name, var(p.name).grad());
        return out;
    }
};

template <typename T>
BoundModel<T> bind(ad::Tape<T>& tape, const Model<T>& m) {
    BoundModel<T> bm;
    bm.model = &m;
    bm.tape = &tape;
    for (const auto& p : m.params) bm.vars.emplace(p.name, tape.input(p.value, p.trainable));
    return bm;
}

template <typename T>
struct EncoderStates {
    std::vector<ad::Var<T>> hidden;     // depth+1 entries of [B,S,H]; [0] = embedding block
    std::vector<ad::Var<T>> attention;  // per layer, [B*heads, S, S] post-softmax rows
    ad::Var<T> flat_final;              // [B*S, H], convenience for the heads
};

namespace detail {

// x [N,H] -> x*W + b for parameters <prefix>.{w,b}; adds the LoRA path
// x*B*A scaled by alpha/r when adapters are present (B=0 at init keeps the
// output bitwise equal to the base projection).
template <typename T>
ad::Var<T> linear(BoundModel<T>& bm, const std::string& w_name, const std::string& b_name,
                  ad::Var<T> x) {
    auto out = ad::add(ad::matmul(x, bm.var(w_name)), bm.var(b_name));
    const std::string a_name = w_name + ".lora_a", b2_name = w_name + ".lora_b";
    if (bm.model->has_lora && bm.bound(a_name)) {
        auto delta = ad::matmul(ad::matmul(x, bm.var(b2_name)), bm.var(a_name));
        out = ad::add(out, ad::scale(delta, static_cast<T>(bm.model->lora.scaling())));
    }
    return out;
}

}  // namespace detail

// BERT-style post-LN encoder pass exposing all hidden states (the analysis
// taps) and the per-layer attention rows.
template <typename T>
EncoderStates<T> encoder_forward(BoundModel<T>& bm, const Batch& batch,
                                 const ForwardOptions& opts = {}) {
    batch.validate();
    const Model<T>& m = *bm.model;
    const ModelConfig& cfg = m.config;
    const size_t b_dim = batch.batch, s_dim = batch.seq, h = cfg.hidden_dim;
    const size_t heads = cfg.n_heads, dh = h / heads, n = b_dim * s_dim;
    if (s_dim > cfg.max_positions)
        throw ShapeError("encoder_forward: sequence length " + std::to_string(s_dim) +
                         " exceeds max_positions " + std::to_string(cfg.max_positions));
    ad::Tape<T>& tape = *bm.tape;
    Rng drop_rng(derive_seed(opts.dropout_seed, "dropout"));
    const double p = opts.training ? cfg.dropout_rate : 0.0;
    const T eps = static_cast<T>(cfg.layernorm_eps);

    std::vector<int> positions(n), segments(n, 0);
    for (size_t i = 0; i < n; ++i) positions[i] = static_cast<int>(i % s_dim);
    if (!batch.segments.empty()) segments = batch.segments;

    auto x = ad::add(ad::add(ad::embedding_gather(bm.var("embed.tok"), batch.ids),
                             ad::embedding_gather(bm.var("embed.pos"), positions)),
                     ad::embedding_gather(bm.var("embed.seg"), segments));
    x = ad::layer_norm(x, bm.var("embed.ln.gamma"), bm.var("embed.ln.beta"), eps);
    x = ad::dropout(x, p, drop_rng, opts.training);

    EncoderStates<T> states;
    states.hidden.push_back(ad::reshape(x, {b_dim, s_dim, h}));

    for (const auto& layer : m.layers) {
        const std::string at = layer.prefix + ".attn";
        auto project = [&](const char* which) {
            auto proj = detail::linear(bm, at + ".w" + which, at + ".b" + which, x);
            // [N,H] -> [B,S,heads,dh] -> [B,heads,S,dh] -> [B*heads,S,dh]
            return ad::reshape(
                ad::transpose(ad::reshape(proj, {b_dim, s_dim, heads, dh}), {0, 2, 1, 3}),
                {b_dim * heads, s_dim, dh});
        };
        auto q = project("q");
        auto k = project("k");
        auto v = project("v");

        auto scores = ad::scale(ad::matmul(q, ad::transpose(k, {0, 2, 1})),
                                static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh))));
        scores = ad::add_key_mask(scores, batch.mask, heads);
        auto probs = ad::softmax(scores, 2);
        states.attention.push_back(probs);
        probs = ad::dropout(probs, p, drop_rng, opts.training);

        auto ctx = ad::reshape(
            ad::transpose(ad::reshape(ad::matmul(probs, v), {b_dim, heads, s_dim, dh}),
                          {0, 2, 1, 3}),
            {n, h});
        auto attn_out = detail::linear(bm, at + ".wo", at + ".bo", ctx);
        attn_out = ad::dropout(attn_out, p, drop_rng, opts.training);
        x = ad::layer_norm(ad::add(x, attn_out), bm.var(at + ".ln.gamma"), bm.var(at + ".ln.beta"),
                           eps);

        const std::string ff = layer.prefix + ".ffn";
        auto inner = ad::gelu(ad::add(ad::matmul(x, bm.var(ff + ".w1")), bm.var(ff + ".b1")));
        auto ff_out = ad::add(ad::matmul(inner, bm.var(ff + ".w2")), bm.var(ff + ".b2"));
        ff_out = ad::dropout(ff_out, p, drop_rng, opts.training);
        x = ad::layer_norm(ad::add(x, ff_out), bm.var(ff + ".ln.gamma"), bm.var(ff + ".ln.beta"),
                           eps);

        states.hidden.push_back(ad::reshape(x, {b_dim, s_dim, h}));
    }
    states.flat_final = x;
    return states;
}

// MLM head: dense(h->h) + gelu + layernorm + decoder tied to the token
// embedding table, plus a free output bias. Returns [N, vocab] logits.
template <typename T>
ad::Var<T> mlm_logits(BoundModel<T>& bm, ad::Var<T> flat_hidden) {
    if (!bm.model->has_mlm_head) throw ConfigError("mlm_logits: model has no MLM head");
    const T eps = static_cast<T>(bm.model->config.layernorm_eps);
    auto z = ad::gelu(ad::add(ad::matmul(flat_hidden, bm.var("mlm.dense.w")), bm.var("mlm.dense.b")));
    z = ad::layer_norm(z, bm.var("mlm.ln.gamma"), bm.var("mlm.ln.beta"), eps);
    auto logits = ad::matmul(z, ad::transpose(bm.var("embed.tok"), {1, 0}));
    return ad::add(logits, bm.var("mlm.bias"));
}

// Mean cross-entropy over positions whose label is not the ignore index.
template <typename T>
ad::Var<T> mlm_loss(BoundModel<T>& bm, ad::Var<T> flat_hidden, const std::vector<int>& labels) {
    return ad::cross_entropy_with_logits(mlm_logits(bm, flat_hidden), labels);
}

// Classifier head: single linear map on the final hidden state at the
// sequence-initial classification token (position 0).
template <typename T>
ad::Var<T> classifier_logits(BoundModel<T>& bm, const EncoderStates<T>& states) {
    if (bm.model->n_classes == 0) throw ConfigError("classifier_logits: model has no classifier");
    auto cls = ad::select_axis1(states.hidden.back(), 0);  // [B,H]
    return ad::add(ad::matmul(cls, bm.var("cls.w")), bm.var("cls.b"));
}

template <typename T>
ad::Var<T> classify_loss(BoundModel<T>& bm, const EncoderStates<T>& states,
                         const std::vector<int>& labels) {
    for (int l : labels)
        if (l < 0 || static_cast<size_t>(l) >= bm.model->n_classes)
            throw DataError("classify_loss: label " + std::to_string(l) + " outside [0," +
                            std::to_string(bm.model->n_classes) + ")");
    return ad::cross_entropy_with_logits(classifier_logits(bm, states), labels);
}

}  // namespace noiselab::model

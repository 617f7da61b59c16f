#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "noiselab/model.hpp"
#include "noiselab/vocab.hpp"

namespace noiselab::analysis {

// Layer taps index the encoder's hidden-state list (0 = embedding block,
// i+1 = output of stack layer i). Labels: "emb"/"embedding", provenance
// labels from the stack (L0b, L0, L1.., LF, LF2), plus "bottom"/"top"
// aliases for the first/last layer outputs.
size_t resolve_tap(const model::ModelF& m, std::string_view label);
bool has_tap(const model::ModelF& m, std::string_view label);
// Canonical column order for this model: "emb" then stack labels bottom-up.
std::vector<std::string> tap_labels(const model::ModelF& m);

// Canonical column order for layer taps: emb, L0b, L0, L1..Ln, LF, LF2.
int tap_order_key(const std::string& label);

struct CosineDiagnostics {
    size_t pairs = 0;                // pairs that entered the mean
    size_t skipped_zero_norm = 0;    // guard: hidden state below 1e-12 norm
    size_t skipped_truncated = 0;    // words lost to max_positions truncation
};

// Mean word-level cosine between aligned clean/noised lines: each word's
// vector is the mean of its tokens' hidden states at the tap; pairs align
// positionally over space-separated words. Dropout off.
double word_cosine(const model::ModelF& m, const std::vector<std::string>& clean,
                   const std::vector<std::string>& noised, std::string_view tap,
                   const tok::Vocab& v, CosineDiagnostics* diag = nullptr);

// Mean cosine of the sequence-initial classification token's hidden state
// at the tap across aligned line pairs (standard vs dialect).
double cls_cosine(const model::ModelF& m, const std::vector<std::string>& a,
                  const std::vector<std::string>& b, std::string_view tap, const tok::Vocab& v,
                  CosineDiagnostics* diag = nullptr);

struct ReportCell {
    bool present = false;
    double value = 0.0;
    size_t pairs = 0;
};

struct LayerReportRow {
    std::string model_id;
    std::vector<ReportCell> cells;  // parallel to LayerReport::taps
};

struct LayerReport {
    std::vector<std::string> taps;
    std::vector<LayerReportRow> rows;
    std::string render() const;  // text table; absent taps as an em-dash
};

struct NamedModel {
    std::string id;
    const model::ModelF* m = nullptr;
};

// One row per model, one column per tap in the union of all models' taps;
// cells = word_cosine at that tap, absent taps left blank.
LayerReport layer_report(const std::vector<NamedModel>& models,
                         const std::vector<std::string>& clean,
                         const std::vector<std::string>& noised, const tok::Vocab& v);

}  // namespace noiselab::analysis

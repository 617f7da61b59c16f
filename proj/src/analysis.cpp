#include "noiselab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "noiselab/text.hpp"

namespace noiselab::analysis {

namespace {

constexpr double kZeroNorm = 1e-12;
constexpr const char* kEmDash = "—";

// cosine over float states, accumulated in double
double cosine(const float* a, const float* b, size_t n, bool& zero) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < n; ++i) {
        dot += double(a[i]) * double(b[i]);
        na += double(a[i]) * double(a[i]);
        nb += double(b[i]) * double(b[i]);
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    zero = na < kZeroNorm || nb < kZeroNorm;
    return zero ? 0.0 : dot / (na * nb);
}

size_t word_count(const std::string& s) { return text::split_fields(text::normalize(s)).size(); }

struct TapAccum {
    double sum = 0.0;
    size_t count = 0;
};

// One forward per line pair (row 0 = left, row 1 = right); extract either
// per-word mean vectors or the classification-token vector at every tap.
void accumulate_pairs(const model::ModelF& m, const std::vector<std::string>& left,
                      const std::vector<std::string>& right, const std::vector<size_t>& taps,
                      const tok::Vocab& v, bool per_word, std::vector<TapAccum>& acc,
                      CosineDiagnostics* diag) {
    if (left.size() != right.size())
        throw DataError("cosine analysis: " + std::to_string(left.size()) + " vs " +
                        std::to_string(right.size()) + " lines");
    if (left.empty()) throw DataError("cosine analysis: no line pairs");

    const size_t h = m.config.hidden_dim;
    std::vector<double> va(h), vb(h);
    for (size_t line = 0; line < left.size(); ++line) {
        auto ea = tok::encode(left[line], v, m.config.max_positions);
        auto eb = tok::encode(right[line], v, m.config.max_positions);
        if (per_word) {
            const size_t wa = word_count(left[line]), wb = word_count(right[line]);
            if (wa != wb)
                throw DataError("cosine analysis line " + std::to_string(line + 1) + ": " +
                                std::to_string(wa) + " vs " + std::to_string(wb) + " words");
        }

        const size_t width = std::max(ea.ids.size(), eb.ids.size());
        model::Batch batch;
        batch.batch = 2;
        batch.seq = width;
        batch.ids.assign(2 * width, v.pad_id());
        batch.mask.assign(2 * width, 0);
        for (size_t i = 0; i < ea.ids.size(); ++i) {
            batch.ids[i] = ea.ids[i];
            batch.mask[i] = 1;
        }
        for (size_t i = 0; i < eb.ids.size(); ++i) {
            batch.ids[width + i] = eb.ids[i];
            batch.mask[width + i] = 1;
        }

        ad::Tape<float> tape;
        auto bm = model::bind(tape, m);
        auto states = model::encoder_forward(bm, batch);

        for (size_t t = 0; t < taps.size(); ++t) {
            const auto& hidden = states.hidden[taps[t]].value();  // [2, width, h]
            auto word_vec = [&](const tok::WordRange& r, size_t row, std::vector<double>& out) {
                std::fill(out.begin(), out.end(), 0.0);
                for (size_t tok_i = r.begin; tok_i < r.end; ++tok_i)
                    for (size_t j = 0; j < h; ++j)
                        out[j] += hidden.data[(row * width + tok_i) * h + j];
                const double inv = 1.0 / double(r.end - r.begin);
                for (size_t j = 0; j < h; ++j) out[j] *= inv;
            };
            auto push = [&](const std::vector<double>& x, const std::vector<double>& y) {
                double dot = 0, nx = 0, ny = 0;
                for (size_t j = 0; j < h; ++j) {
                    dot += x[j] * y[j];
                    nx += x[j] * x[j];
                    ny += y[j] * y[j];
                }
                nx = std::sqrt(nx);
                ny = std::sqrt(ny);
                if (nx < kZeroNorm || ny < kZeroNorm) {
                    if (diag && t == 0) ++diag->skipped_zero_norm;
                    return;
                }
                acc[t].sum += dot / (nx * ny);
                ++acc[t].count;
                if (diag && t == 0) ++diag->pairs;
            };

            if (per_word) {
                const size_t usable = std::min(ea.word_map.size(), eb.word_map.size());
                if (diag && t == 0)
                    diag->skipped_truncated += word_count(left[line]) - usable;
                for (size_t w = 0; w < usable; ++w) {
                    word_vec(ea.word_map[w], 0, va);
                    word_vec(eb.word_map[w], 1, vb);
                    push(va, vb);
                }
            } else {
                bool zero = false;
                const double c = cosine(&hidden.data[0], &hidden.data[width * h], h, zero);
                if (zero) {
                    if (diag && t == 0) ++diag->skipped_zero_norm;
                } else {
                    acc[t].sum += c;
                    ++acc[t].count;
                    if (diag && t == 0) ++diag->pairs;
                }
            }
        }
    }
}

double single_tap(const model::ModelF& m, const std::vector<std::string>& a,
                  const std::vector<std::string>& b, std::string_view tap, const tok::Vocab& v,
                  bool per_word, CosineDiagnostics* diag) {
    std::vector<TapAccum> acc(1);
    accumulate_pairs(m, a, b, {resolve_tap(m, tap)}, v, per_word, acc, diag);
    if (acc[0].count == 0) throw DataError("cosine analysis: no comparable pairs survived");
    return acc[0].sum / double(acc[0].count);
}

size_t display_width(const std::string& s) { return text::decode_utf8(s).size(); }

std::string pad_to(const std::string& s, size_t width) {
    std::string out = s;
    for (size_t i = display_width(s); i < width; ++i) out += ' ';
    return out;
}

}  // namespace

int tap_order_key(const std::string& label) {
    if (label == "emb") return -1000;
    if (label == "L0b") return -2;
    if (label == "L0") return -1;
    if (label == "LF") return 1000;
    if (label == "LF2") return 1001;
    if (label.size() > 1 && label[0] == 'L') return std::atoi(label.c_str() + 1);
    return 500;  // unknown labels sort between originals and appends
}

size_t resolve_tap(const model::ModelF& m, std::string_view label) {
    if (label == "emb" || label == "embedding") return 0;
    if (label == "bottom") return 1;
    if (label == "top") return m.depth();
    for (size_t i = 0; i < m.layers.size(); ++i)
        if (m.layers[i].label == label) return i + 1;
    std::string known = "emb";
    for (const auto& l : m.layers) known += ", " + l.label;
    throw ConfigError("unknown layer tap '" + std::string(label) + "' (have: " + known + ")");
}

bool has_tap(const model::ModelF& m, std::string_view label) {
    if (label == "emb" || label == "embedding" || label == "bottom" || label == "top") return true;
    for (const auto& l : m.layers)
        if (l.label == label) return true;
    return false;
}

std::vector<std::string> tap_labels(const model::ModelF& m) {
    std::vector<std::string> out = {"emb"};
    for (const auto& l : m.layers) out.push_back(l.label);
    return out;
}

double word_cosine(const model::ModelF& m, const std::vector<std::string>& clean,
                   const std::vector<std::string>& noised, std::string_view tap,
                   const tok::Vocab& v, CosineDiagnostics* diag) {
    return single_tap(m, clean, noised, tap, v, true, diag);
}

double cls_cosine(const model::ModelF& m, const std::vector<std::string>& a,
                  const std::vector<std::string>& b, std::string_view tap, const tok::Vocab& v,
                  CosineDiagnostics* diag) {
    return single_tap(m, a, b, tap, v, false, diag);
}

std::string LayerReport::render() const {
    std::vector<size_t> widths(taps.size() + 1, 5);
    widths[0] = std::max<size_t>(widths[0], display_width("model"));
    for (const auto& r : rows) widths[0] = std::max(widths[0], display_width(r.model_id));
    for (size_t c = 0; c < taps.size(); ++c)
        widths[c + 1] = std::max(widths[c + 1], display_width(taps[c]));

    auto cell_text = [](const ReportCell& cell) {
        if (!cell.present) return std::string(kEmDash);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", cell.value);
        return std::string(buf);
    };
    for (const auto& r : rows)
        for (size_t c = 0; c < r.cells.size(); ++c)
            widths[c + 1] = std::max(widths[c + 1], display_width(cell_text(r.cells[c])));

    std::string out = pad_to("model", widths[0]);
    for (size_t c = 0; c < taps.size(); ++c) out += "  " + pad_to(taps[c], widths[c + 1]);
    out += '\n';
    for (const auto& r : rows) {
        out += pad_to(r.model_id, widths[0]);
        for (size_t c = 0; c < r.cells.size(); ++c)
            out += "  " + pad_to(cell_text(r.cells[c]), widths[c + 1]);
        out += '\n';
    }
    return out;
}

LayerReport layer_report(const std::vector<NamedModel>& models,
                         const std::vector<std::string>& clean,
                         const std::vector<std::string>& noised, const tok::Vocab& v) {
    LayerReport report;
    std::map<int, std::string> ordered;
    for (const auto& nm : models)
        for (const auto& label : tap_labels(*nm.m)) ordered.emplace(tap_order_key(label), label);
    for (const auto& [key, label] : ordered) report.taps.push_back(label);

    for (const auto& nm : models) {
        LayerReportRow row;
        row.model_id = nm.id;
        row.cells.resize(report.taps.size());

        std::vector<size_t> indices;
        std::vector<size_t> columns;
        for (size_t c = 0; c < report.taps.size(); ++c)
            if (has_tap(*nm.m, report.taps[c]) &&
                (report.taps[c] == "emb" || report.taps[c][0] == 'L')) {
                indices.push_back(resolve_tap(*nm.m, report.taps[c]));
                columns.push_back(c);
            }
        std::vector<TapAccum> acc(indices.size());
        accumulate_pairs(*nm.m, clean, noised, indices, v, true, acc, nullptr);
        for (size_t k = 0; k < columns.size(); ++k) {
            auto& cell = row.cells[columns[k]];
            if (acc[k].count == 0) continue;
            cell.present = true;
            cell.value = acc[k].sum / double(acc[k].count);
            cell.pairs = acc[k].count;
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace noiselab::analysis

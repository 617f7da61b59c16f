#include "noiselab/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "noiselab/analysis.hpp"
#include "noiselab/error.hpp"
#include "noiselab/io.hpp"
#include "noiselab/rng.hpp"
#include "noiselab/text.hpp"

namespace noiselab::report {

namespace {

constexpr const char* kDash = "—";

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string level_head(double level) { return fmt("%g%%", level * 100.0); }

std::string acc_cell(double mean, double half_width) {
    return fmt("%.1f", mean * 100.0) + "±" + fmt("%.1f", half_width * 100.0);
}

size_t display_width(const std::string& s) { return text::decode_utf8(s).size(); }

// rows[0] is the header; columns are padded to their widest entry
std::string render_grid(const std::string& title, const std::vector<std::vector<std::string>>& rows,
                        const std::string& footnote) {
    std::string out = title + "\n";
    if (rows.size() <= 1) {
        out += "(no records)\n";
        if (!footnote.empty()) out += footnote + "\n";
        return out + "\n";
    }
    std::vector<size_t> width;
    for (const auto& row : rows)
        for (size_t c = 0; c < row.size(); ++c) {
            if (c >= width.size()) width.push_back(0);
            width[c] = std::max(width[c], display_width(row[c]));
        }
    for (const auto& row : rows) {
        std::string line;
        for (size_t c = 0; c < row.size(); ++c) {
            if (c) line += "  ";
            line += row[c];
            if (c + 1 < row.size())
                line.append(width[c] - display_width(row[c]), ' ');
        }
        out += line + "\n";
    }
    if (!footnote.empty()) out += footnote + "\n";
    return out + "\n";
}

std::string get_str(const Record& r, const char* key) { return r.at(key).get<std::string>(); }

struct RowKey {
    std::string head;  // first column (variant or eval set)
    bool cpt = false;
};

// accuracy-style table: rows keyed by (head, cpt) in first-seen order,
// columns by noise level ascending
std::string accuracy_table(const std::string& title, const std::vector<Record>& records,
                           const std::string& adaptation, const std::string& eval_set,
                           const char* head_name, const char* head_key) {
    std::vector<RowKey> row_order;
    std::set<double> levels;
    std::map<std::pair<std::string, bool>, std::map<double, std::string>> cells;
    auto row_slot = [&](const std::string& head, bool cpt) -> std::map<double, std::string>& {
        const auto key = std::make_pair(head, cpt);
        if (!cells.count(key)) row_order.push_back({head, cpt});
        return cells[key];
    };
    for (const auto& r : records) {
        const std::string kind = get_str(r, "kind");
        if (kind != "accuracy" && kind != "cell_error") continue;
        if (get_str(r, "adaptation") != adaptation) continue;
        const double level = r.at("level").get<double>();
        const bool cpt = r.at("cpt").get<bool>();
        if (kind == "cell_error") {
            // an aborted cell shows FAIL on every eval set it would have fed
            levels.insert(level);
            if (std::string(head_key) == "variant") {
                row_slot(get_str(r, "variant"), cpt)[level] = "FAIL";
            } else {
                for (const auto& s : r.at("eval_sets"))
                    row_slot(s.get<std::string>(), cpt)[level] = "FAIL";
            }
            continue;
        }
        if (get_str(r, "eval_set") != eval_set && std::string(head_key) == "variant") continue;
        levels.insert(level);
        const std::string head = get_str(r, head_key);
        row_slot(head, cpt)[level] =
            acc_cell(r.at("mean").get<double>(), r.at("half_width").get<double>());
    }
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header = {head_name, "cpt"};
    for (double l : levels) header.push_back(level_head(l));
    grid.push_back(header);
    for (const auto& rk : row_order) {
        std::vector<std::string> row = {rk.head, rk.cpt ? "yes" : "no"};
        const auto& by_level = cells[{rk.head, rk.cpt}];
        for (double l : levels) {
            auto it = by_level.find(l);
            row.push_back(it == by_level.end() ? kDash : it->second);
        }
        grid.push_back(row);
    }
    return render_grid(title, grid,
                       "cells: mean accuracy % ± 95% CI (Student-t, n-1 dof) across trials; "
                       "per-cell provenance in the records file");
}

std::string cosine_table(const std::string& title, const std::vector<Record>& records,
                         const std::string& kind, const char* col_key,
                         const std::string& footnote) {
    std::vector<RowKey> row_order;
    std::map<std::pair<std::string, bool>, std::map<std::string, std::string>> cells;
    std::vector<std::string> col_order;
    for (const auto& r : records) {
        if (get_str(r, "kind") != kind) continue;
        const std::string variant = get_str(r, "variant");
        const bool cpt = r.at("cpt").get<bool>();
        const std::string col = get_str(r, col_key);
        const auto key = std::make_pair(variant, cpt);
        if (!cells.count(key)) row_order.push_back({variant, cpt});
        if (std::find(col_order.begin(), col_order.end(), col) == col_order.end())
            col_order.push_back(col);
        cells[key][col] = fmt("%.3f", r.at("value").get<double>());
    }
    if (std::string(col_key) == "tap")
        std::sort(col_order.begin(), col_order.end(), [](const auto& a, const auto& b) {
            return analysis::tap_order_key(a) < analysis::tap_order_key(b);
        });
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header = {"model", "cpt"};
    header.insert(header.end(), col_order.begin(), col_order.end());
    grid.push_back(header);
    for (const auto& rk : row_order) {
        std::vector<std::string> row = {rk.head, rk.cpt ? "yes" : "no"};
        const auto& by_col = cells[{rk.head, rk.cpt}];
        for (const auto& c : col_order) {
            auto it = by_col.find(c);
            row.push_back(it == by_col.end() ? kDash : it->second);
        }
        grid.push_back(row);
    }
    return render_grid(title, grid, footnote);
}

}  // namespace

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t file_hash(const std::string& path) { return fnv1a64(io::read_text(path)); }

void write_jsonl(const std::vector<Record>& records, const std::string& path) {
    std::string out;
    for (const auto& r : records) out += r.dump() + "\n";
    io::atomic_write_text(path, out);
}

std::vector<Record> read_jsonl(const std::string& path) {
    std::vector<Record> out;
    const auto lines = io::read_lines(path);
    for (size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        try {
            out.push_back(Record::parse(lines[i]));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(i + 1) + ": bad record: " + e.what());
        }
    }
    return out;
}

std::string render_tables(const std::vector<Record>& records) {
    std::string out;
    out += accuracy_table("Table 1 — accuracy on the typo test set (full fine-tuning)", records,
                          "full", "typo", "model", "variant");
    out += accuracy_table("Table 2 — accuracy on the dialect test set (full fine-tuning)", records,
                          "full", "dialect", "model", "variant");
    out += accuracy_table("Table 3 — accuracy on the clean test set (full fine-tuning)", records,
                          "full", "clean", "model", "variant");
    out += accuracy_table("Table 4 — accuracy under low-rank adaptation (base model)", records,
                          "lora", "", "eval set", "eval_set");
    out += cosine_table("Table 5 — word-level cosine between clean and typo encodings, by tap",
                        records, "word_cosine", "tap",
                        "taps are labeled by layer provenance: original layers keep their index; "
                        "fresh bottom layers are L0/L0b, fresh top layers LF/LF2");
    out += cosine_table("Table 6 — first-position cosine between clean and variant test sets "
                        "(top tap)",
                        records, "cls_cosine", "eval_set", "");
    return out;
}

}  // namespace noiselab::report

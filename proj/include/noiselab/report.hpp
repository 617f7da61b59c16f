#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace noiselab::report {

// Machine-readable experiment records, one JSON object per line. Kinds:
//   accuracy    — one fine-tuned cell on one eval set: variant, cpt,
//                 adaptation, level, eval_set, mean, half_width, n_trials,
//                 per_trial, trial_seeds, config_hash, checkpoint_hash
//   cell_error  — a cell whose trials failed: same identity keys + error
//   word_cosine — variant, cpt, tap, value, pairs, seed, hashes
//   cls_cosine  — variant, cpt, eval_set, tap, value, pairs, seed, hashes
using Record = nlohmann::json;

std::string hex64(std::uint64_t v);
std::uint64_t file_hash(const std::string& path);  // fnv1a64 over the bytes

void write_jsonl(const std::vector<Record>& records, const std::string& path);
std::vector<Record> read_jsonl(const std::string& path);

// Renders the rolled-up text tables:
//   1  accuracy, typo test        (rows variant x cpt, cols noise levels)
//   2  accuracy, dialect test     (same shape)
//   3  accuracy, clean test       (same shape)
//   4  accuracy under low-rank adaptation (rows eval set x cpt)
//   5  word-level cosine by layer tap (rows model, cols taps)
//   6  sentence-level cosine, first position (rows model, cols eval sets)
// Cells are mean ± 95% CI (Student-t, n-1 dof); dashes mark absent cells and
// FAIL marks aborted ones.
std::string render_tables(const std::vector<Record>& records);

}  // namespace noiselab::report

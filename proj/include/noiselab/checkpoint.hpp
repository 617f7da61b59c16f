#pragma once

#include <string>

#include "noiselab/model.hpp"

namespace noiselab::model {

// Binary model checkpoint: magic + version + JSON manifest (config, stack
// layout, head flags, per-parameter name/shape/trainable/offset) followed by
// the raw little-endian f32 payload. Round trips are bit-exact.
void save_checkpoint(const ModelF& m, const std::string& path);
ModelF load_checkpoint(const std::string& path);

// Loads and verifies the checkpoint was built for a vocabulary of the given
// size; mismatches throw CheckpointError naming both sizes.
ModelF load_checkpoint(const std::string& path, size_t expect_vocab_size);

}  // namespace noiselab::model

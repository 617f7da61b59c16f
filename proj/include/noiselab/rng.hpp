#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace noiselab {

// Deterministic, platform-stable random stream (xoshiro256** seeded via
// splitmix64). std::mt19937 + std distributions are avoided because the
// distribution algorithms are implementation-defined; every draw here is
// specified bit-for-bit so experiments replay exactly.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double next_double();

    // Uniform in [0, n). n must be > 0. Unbiased via rejection.
    uint64_t next_below(uint64_t n);

    // Standard normal, Box-Muller with cached spare.
    double normal();

    // Normal(0, stddev) with resampling outside +/- cutoff*stddev.
    double truncated_normal(double stddev, double cutoff);

    // Fisher-Yates, identical order for identical seeds.
    template <class T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (size_t i = v.size() - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(next_below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Stable seed derivation: independent streams for (master, label) and
// (master, label, index). Used for per-cell / per-epoch / per-trial streams.
uint64_t derive_seed(uint64_t master, std::string_view label);
uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index);

// FNV-1a over raw bytes; used for config/checkpoint provenance hashes.
uint64_t fnv1a64(std::string_view bytes);

}  // namespace noiselab

#include "noiselab/rng.hpp"

#include <cmath>
#include <numbers>

#include "noiselab/error.hpp"

namespace noiselab {

namespace {

uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& s : state_) s = splitmix64(sm);
}

uint64_t Rng::next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

uint64_t Rng::next_below(uint64_t n) {
    if (n == 0) throw Error("Rng::next_below: n must be positive");
    // Rejection from the top to stay unbiased.
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
        uint64_t r = next_u64();
        if (r >= threshold) return r % n;
    }
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u clamped away from 0 so log() stays finite.
    double u = next_double();
    if (u <= 0.0) u = 0x1.0p-53;
    double v = next_double();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double theta = 2.0 * std::numbers::pi * v;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

double Rng::truncated_normal(double stddev, double cutoff) {
    for (;;) {
        double z = normal();
        if (z >= -cutoff && z <= cutoff) return z * stddev;
    }
}

uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t derive_seed(uint64_t master, std::string_view label) {
    uint64_t mix = fnv1a64(label) ^ master;
    uint64_t sm = mix;
    return splitmix64(sm);
}

uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index) {
    uint64_t mix = derive_seed(master, label) ^ (0x9e3779b97f4a7c15ull * (index + 1));
    uint64_t sm = mix;
    return splitmix64(sm);
}

}  // namespace noiselab

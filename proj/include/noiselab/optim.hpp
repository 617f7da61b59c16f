#pragma once

#include <cmath>
#include <string>
#include <unordered_map>

#include "noiselab/error.hpp"
#include "noiselab/params.hpp"
#include "noiselab/tensor.hpp"

namespace noiselab::ad {

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// One AdamW update for a single weight. Decoupled weight decay multiplies
// the parameter by (1 - lr*wd) before the moment update:
//   theta <- theta*(1 - lr*wd) - lr * m_hat / (sqrt(v_hat) + eps)
// Kept as a free function so tests can pin the formula at full precision.
template <typename S>
void adamw_update(S& theta, S grad, S& m, S& v, long step, const AdamWConfig& cfg) {
    theta *= S(1) - S(cfg.lr) * S(cfg.weight_decay);
    m = S(cfg.beta1) * m + (S(1) - S(cfg.beta1)) * grad;
    v = S(cfg.beta2) * v + (S(1) - S(cfg.beta2)) * grad * grad;
    const S m_hat = m / (S(1) - S(std::pow(cfg.beta1, static_cast<double>(step))));
    const S v_hat = v / (S(1) - S(std::pow(cfg.beta2, static_cast<double>(step))));
    theta -= S(cfg.lr) * m_hat / (std::sqrt(v_hat) + S(cfg.eps));
}

// AdamW over a parameter store. State (first/second moments, step count) is
// keyed by parameter name and kept in the storage precision. Frozen
// parameters and parameters without a gradient entry are left untouched.
template <typename T>
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

    const AdamWConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

    void step(ParameterStore<T>& params, const GradMap<T>& grads) {
        ++step_count_;
        for (auto& p : params) {
            if (!p.trainable) continue;
            auto git = grads.find(p.name);
            if (git == grads.end()) continue;
            const Tensor<T>& g = git->second;
            if (!g.same_shape(p.value))
                throw ShapeError("adamw: gradient shape " + g.shape_str() + " vs parameter " +
                                 p.value.shape_str() + " for " + p.name);
            Moments& mom = state_[p.name];
            if (mom.m.numel() == 0) {
                mom.m = Tensor<T>(p.value.shape);
                mom.v = Tensor<T>(p.value.shape);
            }
            ++mom.step;  // bias correction runs on the parameter's own clock
            for (size_t i = 0; i < p.value.numel(); ++i)
                adamw_update(p.value[i], g[i], mom.m[i], mom.v[i], mom.step, cfg_);
        }
    }

    long step_count() const { return step_count_; }

private:
    struct Moments {
        Tensor<T> m, v;
        long step = 0;
    };
    AdamWConfig cfg_;
    std::unordered_map<std::string, Moments> state_;
    long step_count_ = 0;
};

}  // namespace noiselab::ad

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "noiselab/error.hpp"
#include "noiselab/tensor.hpp"

namespace noiselab::ad {

// Named weight with a trainable flag. Frozen parameters (trainable=false)
// are skipped entirely by the optimizer and stay bitwise intact.
template <typename T>
struct Parameter {
    std::string name;  // dotted path, e.g. "orig.layer.3.attn.wq"
    Tensor<T> value;
    bool trainable = true;
};

// Ordered collection of uniquely named parameters. Order is insertion
// order, which fixes checkpoint layout and optimizer iteration order.
template <typename T>
class ParameterStore {
public:
    Parameter<T>& add(std::string name, Tensor<T> value, bool trainable = true) {
        if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
        index_.emplace(name, params_.size());
        params_.push_back(Parameter<T>{std::move(name), std::move(value), trainable});
        return params_.back();
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    Parameter<T>& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
        return params_[it->second];
    }
    const Parameter<T>& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
        return params_[it->second];
    }

    size_t size() const { return params_.size(); }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    size_t total_weights() const {
        size_t n = 0;
        for (const auto& p : params_) n += p.value.numel();
        return n;
    }
    size_t trainable_weights() const {
        size_t n = 0;
        for (const auto& p : params_)
            if (p.trainable) n += p.value.numel();
        return n;
    }

    template <typename U>
    ParameterStore<U> cast() const {
        ParameterStore<U> out;
        for (const auto& p : params_) out.add(p.name, p.value.template cast<U>(), p.trainable);
        return out;
    }

private:
    std::vector<Parameter<T>> params_;
    std::unordered_map<std::string, size_t> index_;
};

// Gradients keyed by parameter name; filled from tape leaves after backward.
template <typename T>
using GradMap = std::unordered_map<std::string, Tensor<T>>;

}  // namespace noiselab::ad

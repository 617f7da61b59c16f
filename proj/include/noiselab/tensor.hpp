#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "noiselab/error.hpp"

namespace noiselab::ad {

// Dense row-major tensor. Pure storage: gradient bookkeeping lives on the
// tape (Var carries the requires_grad role), so Tensor stays copyable and
// trivially serializable. T is float for training storage and double for
// gradient-verification mode.
template <typename T>
struct Tensor {
    std::vector<size_t> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<size_t> shape_in, T fill = T(0))
        : shape(std::move(shape_in)), data(count(shape), fill) {}

    static Tensor from(std::vector<size_t> shape_in, std::vector<T> values) {
        if (count(shape_in) != values.size())
            throw ShapeError("tensor init: " + shape_str(shape_in) + " needs " +
                             std::to_string(count(shape_in)) + " values, got " +
                             std::to_string(values.size()));
        Tensor t;
        t.shape = std::move(shape_in);
        t.data = std::move(values);
        return t;
    }

    static size_t count(const std::vector<size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), size_t{1}, std::multiplies<>());
    }

    size_t numel() const { return data.size(); }
    size_t rank() const { return shape.size(); }
    T& operator[](size_t i) { return data[i]; }
    const T& operator[](size_t i) const { return data[i]; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    static std::string shape_str(const std::vector<size_t>& shape) {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
    std::string shape_str() const { return shape_str(shape); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.reserve(data.size());
        for (const T& v : data) out.data.push_back(static_cast<U>(v));
        return out;
    }

    bool all_finite() const {
        for (const T& v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

}  // namespace noiselab::ad

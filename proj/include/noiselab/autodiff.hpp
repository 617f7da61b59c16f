#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "noiselab/error.hpp"
#include "noiselab/rng.hpp"
#include "noiselab/tensor.hpp"

namespace noiselab::ad {

template <typename T>
class Tape;

// Handle to a node on a tape. Cheap to copy; owns nothing.
template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    const Tensor<T>& value() const;
    const Tensor<T>& grad() const;
    const std::vector<size_t>& shape() const { return value().shape; }
};

// Reverse-mode autodiff tape. Append-only: creation order is a topological
// order, so backward is a single reverse sweep. A tape records one forward
// pass and is consumed by one backward call; build a fresh tape per step.
template <typename T>
class Tape {
public:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        std::function<void(Tape&)> backprop;
        bool requires_grad = false;
        bool grad_ready = false;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<T> input(Tensor<T> value, bool requires_grad = false) {
        return push("input", std::move(value), requires_grad, {});
    }

    void backward(Var<T> loss) {
        if (loss.tape != this) throw GraphError("backward: loss belongs to a different tape");
        if (consumed_) throw GraphError("backward: tape already consumed; build a fresh graph");
        const Node& ln = node(loss.id);
        if (ln.value.numel() != 1)
            throw GraphError("backward requires a scalar loss, got shape " + ln.value.shape_str());
        for (auto& n : nodes_) {
            if (n.requires_grad) {
                n.grad = Tensor<T>(n.value.shape);
                n.grad_ready = true;
            }
        }
        if (node(loss.id).requires_grad) {
            node(loss.id).grad.data[0] = T(1);
            for (int i = loss.id; i >= 0; --i) {
                Node& n = nodes_[static_cast<size_t>(i)];
                if (n.requires_grad && n.backprop) n.backprop(*this);
            }
        }
        consumed_ = true;
    }

    size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }
    void set_check_finite(bool on) { check_finite_ = on; }
    bool check_finite() const { return check_finite_; }

    Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }

    Var<T> push(const char* op, Tensor<T> value, bool requires_grad,
                std::function<void(Tape&)> backprop) {
        if (consumed_) throw GraphError(std::string(op) + ": tape already consumed by backward");
        if (check_finite_ && !value.all_finite())
            throw NumericError(std::string(op) + " produced non-finite values");
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(Node{std::move(value), {}, std::move(backprop), requires_grad, false});
        return Var<T>{this, id};
    }

private:
    // deque, not vector: node references returned by value()/grad() must
    // survive later pushes (forward code reads activations while the graph
    // keeps growing).
    std::deque<Node> nodes_;
    bool consumed_ = false;
#ifdef NDEBUG
    bool check_finite_ = false;
#else
    bool check_finite_ = true;
#endif
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
    if (!tape || id < 0) throw GraphError("value: empty Var");
    return tape->node(id).value;
}

template <typename T>
const Tensor<T>& Var<T>::grad() const {
    if (!tape || id < 0) throw GraphError("grad: empty Var");
    const auto& n = tape->node(id);
    if (!n.grad_ready)
        throw GraphError("grad: not available (backward not run, or node not on a trainable path)");
    return n.grad;
}

namespace detail {

template <typename T>
Tape<T>& same_tape(const char* op, Var<T> a, Var<T> b) {
    if (!a.tape || !b.tape || a.tape != b.tape)
        throw GraphError(std::string(op) + ": operands from different tapes");
    return *a.tape;
}

inline std::vector<size_t> strides_of(const std::vector<size_t>& shape) {
    std::vector<size_t> s(shape.size(), 1);
    for (size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
    return s;
}

// C = A·B (+=) for row-major MxK and KxN blocks.
template <typename T>
void mm_acc(const T* a, const T* b, T* c, size_t m_dim, size_t k_dim, size_t n_dim) {
    for (size_t m = 0; m < m_dim; ++m) {
        T* crow = c + m * n_dim;
        for (size_t k = 0; k < k_dim; ++k) {
            const T av = a[m * k_dim + k];
            if (av == T(0)) continue;
            const T* brow = b + k * n_dim;
            for (size_t n = 0; n < n_dim; ++n) crow[n] += av * brow[n];
        }
    }
}

// C = A·Bᵀ (+=): A is MxK, B is NxK.
template <typename T>
void mm_bt_acc(const T* a, const T* b, T* c, size_t m_dim, size_t k_dim, size_t n_dim) {
    for (size_t m = 0; m < m_dim; ++m) {
        const T* arow = a + m * k_dim;
        T* crow = c + m * n_dim;
        for (size_t n = 0; n < n_dim; ++n) {
            const T* brow = b + n * k_dim;
            T acc = T(0);
            for (size_t k = 0; k < k_dim; ++k) acc += arow[k] * brow[k];
            crow[n] += acc;
        }
    }
}

// C = Aᵀ·B (+=): A is MxK, B is MxN, C is KxN.
template <typename T>
void mm_at_acc(const T* a, const T* b, T* c, size_t m_dim, size_t k_dim, size_t n_dim) {
    for (size_t m = 0; m < m_dim; ++m) {
        const T* arow = a + m * k_dim;
        const T* brow = b + m * n_dim;
        for (size_t k = 0; k < k_dim; ++k) {
            const T av = arow[k];
            if (av == T(0)) continue;
            T* crow = c + k * n_dim;
            for (size_t n = 0; n < n_dim; ++n) crow[n] += av * brow[n];
        }
    }
}

}  // namespace detail

// Matrix product. Accepts [M,K]x[K,N] or batched [G,M,K]x[G,K,N] with equal
// batch counts; batching beyond what attention needs is out of scope.
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
    Tape<T>& tp = detail::same_tape("matmul", a, b);
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    const bool batched = av.rank() == 3;
    if (!((av.rank() == 2 && bv.rank() == 2) || (av.rank() == 3 && bv.rank() == 3)))
        throw ShapeError("matmul: ranks must be 2x2 or 3x3, got " + av.shape_str() + " x " +
                         bv.shape_str());
    const size_t g_dim = batched ? av.shape[0] : 1;
    const size_t m_dim = av.shape[batched ? 1 : 0];
    const size_t k_dim = av.shape[batched ? 2 : 1];
    const size_t n_dim = bv.shape[batched ? 2 : 1];
    if ((batched && bv.shape[0] != g_dim) || bv.shape[batched ? 1 : 0] != k_dim)
        throw ShapeError("matmul: incompatible shapes " + av.shape_str() + " x " + bv.shape_str());

    Tensor<T> out(batched ? std::vector<size_t>{g_dim, m_dim, n_dim}
                          : std::vector<size_t>{m_dim, n_dim});
    for (size_t g = 0; g < g_dim; ++g)
        detail::mm_acc(av.data.data() + g * m_dim * k_dim, bv.data.data() + g * k_dim * n_dim,
                       out.data.data() + g * m_dim * n_dim, m_dim, k_dim, n_dim);

    const bool rg = tp.node(a.id).requires_grad || tp.node(b.id).requires_grad;
    const int aid = a.id, bid = b.id, out_id = static_cast<int>(tp.size());
    auto back = [aid, bid, out_id, g_dim, m_dim, k_dim, n_dim](Tape<T>& t) {
        const Tensor<T>& g = t.node(out_id).grad;
        const Tensor<T>& avv = t.node(aid).value;
        const Tensor<T>& bvv = t.node(bid).value;
        for (size_t gi = 0; gi < g_dim; ++gi) {
            const size_t ao = gi * m_dim * k_dim, bo = gi * k_dim * n_dim, co = gi * m_dim * n_dim;
            if (t.node(aid).requires_grad)
                detail::mm_bt_acc(g.data.data() + co, bvv.data.data() + bo,
                                  t.node(aid).grad.data.data() + ao, m_dim, n_dim, k_dim);
            if (t.node(bid).requires_grad)
                detail::mm_at_acc(avv.data.data() + ao, g.data.data() + co,
                                  t.node(bid).grad.data.data() + bo, m_dim, k_dim, n_dim);
        }
    };
    return tp.push("matmul", std::move(out), rg, rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

namespace detail {

// Shared plumbing for add/mul: b must match a's shape or be a 1-D vector
// matching a's last dimension (bias/diagonal broadcast).
template <typename T>
bool broadcast_last_dim(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.same_shape(b)) return false;
    if (b.rank() == 1 && a.rank() >= 1 && b.shape[0] == a.shape.back()) return true;
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " vs " +
                     b.shape_str());
}

}  // namespace detail

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    Tape<T>& tp = detail::same_tape("add", a, b);
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    const bool bcast = detail::broadcast_last_dim("add", av, bv);
    const size_t last = bcast ? bv.shape[0] : 0;

    Tensor<T> out = av;
    if (bcast) {
        for (size_t i = 0; i < out.numel(); ++i) out[i] += bv[i % last];
    } else {
        for (size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
    }

    const bool rg = tp.node(a.id).requires_grad || tp.node(b.id).requires_grad;
    const int aid = a.id, bid = b.id, out_id = static_cast<int>(tp.size());
    auto back = [aid, bid, out_id, bcast, last](Tape<T>& t) {
        const Tensor<T>& g = t.node(out_id).grad;
        if (t.node(aid).requires_grad) {
            Tensor<T>& da = t.node(aid).grad;
            for (size_t i = 0; i < g.numel(); ++i) da[i] += g[i];
        }
        if (t.node(bid).requires_grad) {
            Tensor<T>& db = t.node(bid).grad;
            if (bcast) {
                for (size_t i = 0; i < g.numel(); ++i) db[i % last] += g[i];
            } else {
                for (size_t i = 0; i < g.numel(); ++i) db[i] += g[i];
            }
        }
    };
    return tp.push("add", std::move(out), rg, rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    Tape<T>& tp = detail::same_tape("mul", a, b);
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    const bool bcast = detail::broadcast_last_dim("mul", av, bv);
    const size_t last = bcast ? bv.shape[0] : 0;

    Tensor<T> out = av;
    if (bcast) {
        for (size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i % last];
    } else {
        for (size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
    }

    const bool rg = tp.node(a.id).requires_grad || tp.node(b.id).requires_grad;
    const int aid = a.id, bid = b.id, out_id = static_cast<int>(tp.size());
    auto back = [aid, bid, out_id, bcast, last](Tape<T>& t) {
        const Tensor<T>& g = t.node(out_id).grad;
        const Tensor<T>& avv = t.node(aid).value;
        const Tensor<T>& bvv = t.node(bid).value;
        if (t.node(aid).requires_grad) {
            Tensor<T>& da = t.node(aid).grad;
            for (size_t i = 0; i < g.numel(); ++i) da[i] += g[i] * (bcast ? bvv[i % last] : bvv[i]);
        }
        if (t.node(bid).requires_grad) {
            Tensor<T>& db = t.node(bid).grad;
            if (bcast) {
                for (size_t i = 0; i < g.numel(); ++i) db[i % last] += g[i] * avv[i];
            } else {
                for (size_t i = 0; i < g.numel(); ++i) db[i] += g[i] * avv[i];
            }
        }
    };
    return tp.push("mul", std::move(out), rg, rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
    Tape<T>& tp = *a.tape;
    Tensor<T> out = a.value();
    for (T& v : out.data) v *= factor;
    const bool rg = tp.node(a.id).requires_grad;
    const int aid = a.id, out_id = static_cast<int>(tp.size());
    auto back = [aid, out_id, factor](Tape<T>& t) {
        const Tensor<T>& g = t.node(out_id).grad;
        Tensor<T>& da = t.node(aid).grad;
        for (size_t i = 0; i < g.numel(); ++i) da[i] += g[i] * factor;
    };
    return tp.push("scale", std::move(out), rg, rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

template <typename T>
Var<T> transpose(Var<T> a, std::vector<size_t> perm) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& av = a.value();
    if (perm.size() != av.rank())
        throw ShapeError("transpose: perm size " + std::to_string(perm.size()) +
                         " vs tensor rank " + std::to_string(av.rank()));
    std::vector<bool> seen(perm.size(), false);
    for (size_t p : perm) {
        if (p >= perm.size() || seen[p]) throw ShapeError("transpose: invalid permutation");
        seen[p] = true;
    }

    std::vector<size_t> out_shape(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) out_shape[i] = av.shape[perm[i]];
    const auto in_strides = detail::strides_of(av.shape);
    // Walking output positions in order, the input flat index advances by
    // in_strides[perm[i]] along output axis i.
    Tensor<T> out(out_shape);
    std::vector<size_t> idx(perm.size(), 0);
    size_t in_flat = 0;
    for (size_t o = 0; o < out.numel(); ++o) {
        out[o] = av[in_flat];
        for (size_t i = perm.size(); i-- > 0;) {
            idx[i]++;
            in_flat += in_strides[perm[i]];
            if (idx[i] < out_shape[i]) break;
            in_flat -= in_strides[perm[i]] * out_shape[i];
            idx[i] = 0;
        }
    }

    const bool rg = tp.node(a.id).requires_grad;
    const int aid = a.id, out_id = static_cast<int>(tp.size());
    auto back = [aid, out_id, perm, out_shape, in_strides](Tape<T>& t) {
        const Tensor<T>& g = t.node(out_id).grad;
        Tensor<T>& da = t.node(aid).grad;
        std::vector<size_t> idx(perm.size(), 0);
        size_t in_flat = 0;
        for (size_t o = 0; o < g.numel(); ++o) {
            da[in_flat] += g[o];
            for (size_t i = perm.size(); i-- > 0;) {
                idx[i]++;
                in_flat += in_strides[perm[i]];
                if (idx[i] < out_shape[i]) break;
                in_flat -= in_strides[perm[i]] * out_shape[i];
                idx[i] = 0;
            }
        }
    };
    return tp.push("transpose", std::move(out), rg,
                   rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

template <typename T>
Var<T> reshape(Var<T> a, std::vector<size_t> new_shape) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& av = a.value();
    if (Tensor<T>::count(new_shape) != av.numel())
        throw ShapeError("reshape: " + av.shape_str() + " to " +
                         Tensor<T>::shape_str(new_shape) + " changes element count");
    Tensor<T> out;
    out.shape = std::move(new_shape);
    out.data = av.data;
    const bool rg = tp.node(a.id).requires_grad;
    const int aid = a.id, out_id = static_cast<int>(tp.size());
    auto back = [aid, out_id](Tape<T>& t) {
        const Tensor<T>& g = t.node(out_id).grad;
        Tensor<T>& da = t.node(aid).grad;
        for (size_t i = 0; i < g.numel(); ++i) da[i] += g[i];
    };
    return tp.push("reshape", std::move(out), rg,
                   rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no operands");
    Tape<T>& tp = *parts[0].tape;
    const size_t rank = parts[0].value().rank();
    if (axis >= rank) throw ShapeError("concat: axis out of range");
    std::vector<size_t> out_shape = parts[0].value().shape;
    out_shape[axis] = 0;
    bool rg = false;
    for (const auto& p : parts) {
        detail::same_tape("concat", parts[0], p);
        const auto& shape = p.value().shape;
        if (shape.size() != rank)
            throw ShapeError("concat: rank mismatch " + p.value().shape_str());
        for (size_t i = 0; i < rank; ++i)
            if (i != axis && shape[i] != out_shape[i])
                throw ShapeError("concat: shape mismatch at axis " + std::to_string(i) + ": " +
                                 p.value().shape_str());
        out_shape[axis] += shape[axis];
        rg = rg || tp.node(p.id).requires_grad;
    }

    size_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= out_shape[i];
    for (size_t i = axis + 1; i < rank; ++i) inner *= out_shape[i];

    Tensor<T> out(out_shape);
    std::vector<int> ids;
    std::vector<size_t> axis_sizes;
    size_t offset = 0;  // in units of axis slots
    for (const auto& p : parts) {
        const Tensor<T>& pv = p.value();
        const size_t a_sz = pv.shape[axis];
        for (size_t o = 0; o < outer; ++o)
            std::copy(pv.data.begin() + static_cast<std::ptrdiff_t>(o * a_sz * inner),
                      pv.data.begin() + static_cast<std::ptrdiff_t>((o + 1) * a_sz * inner),
                      out.data.begin() +
                          static_cast<std::ptrdiff_t>((o * out_shape[axis] + offset) * inner));
        ids.push_back(p.id);
        axis_sizes.push_back(a_sz);
        offset += a_sz;
    }

    const int out_id = static_cast<int>(tp.size());
    const size_t total_axis = out_shape[axis];
    auto back = [ids, axis_sizes, out_id, outer, inner, total_axis](Tape<T>& t) {
        const Tensor<T>& g = t.node(out_id).grad;
        size_t offset = 0;
        for (size_t pi = 0; pi < ids.size(); ++pi) {
            const size_t a_sz = axis_sizes[pi];
            if (t.node(ids[pi]).requires_grad) {
                Tensor<T>& dp = t.node(ids[pi]).grad;
                for (size_t o = 0; o < outer; ++o) {
                    const size_t src = (o * total_axis + offset) * inner;
                    const size_t dst = o * a_sz * inner;
                    for (size_t i = 0; i < a_sz * inner; ++i) dp[dst + i] += g[src + i];
                }
            }
            offset += a_sz;
        }
    };
    return tp.push("concat", std::move(out), rg,
                   rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

template <typename T>
Var<T> softmax(Var<T> a, size_t axis) {
    Tape<T>& tp = *a.tape;
    const Tensor<T>& av = a.value();
    if (axis >= av.rank()) throw ShapeError("softmax: axis out of range for " + av.shape_str());
    const size_t a_sz = av.shape[axis];
    size_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= av.shape[i];
    for (size_t i = axis + 1; i < av.rank(); ++i) inner *= av.shape[i];

    Tensor<T> out(av.shape);
    for (size_t o = 0; o < outer; ++o) {
        for (size_t in = 0; in < inner; ++in) {
            const size_t base = o * a_sz * inner + in;
            T mx = av[base];
            for (size_t k = 1; k < a_sz; ++k) mx = std::max(mx, av[base + k * inner]);
            T denom = T(0);
            for (size_t k = 0; k < a_sz; ++k) {
                const T e = std::exp(av[base + k * inner] - mx);
                out[base + k * inner] = e;
                denom += e;
            }
            for (size_t k = 0; k < a_sz; ++k) out[base + k * inner] /= denom;
        }
    }

    const bool rg = tp.node(a.id).requires_grad;
    const int aid = a.id, out_id = static_cast<int>(tp.size());
    auto back = [aid, out_id, a_sz, outer, inner](Tape<T>& t) {
        const Tensor<T>& g = t.node(out_id).grad;
        const Tensor<T>& s = t.node(out_id).value;
        Tensor<T>& da = t.node(aid).grad;
        for (size_t o = 0; o < outer; ++o) {
            for (size_t in = 0; in < inner; ++in) {
                const size_t base = o * a_sz * inner + in;
                T dot = T(0);
                for (size_t k = 0; k < a_sz; ++k) dot += g[base + k * inner] * s[base + k * inner];
                for (size_t k = 0; k < a_sz; ++k) {
                    const size_t p = base + k * inner;
                    da[p] += s[p] * (g[p] - dot);
                }
            }
        }
    };
    return tp.push("softmax", std::move(out), rg,
                   rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

// Normalization over the last dimension with learned gamma/beta.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
    Tape<T>& tp = detail::same_tape("layer_norm", x, gamma);
    detail::same_tape("layer_norm", x, beta);
    const Tensor<T>& xv = x.value();
    if (xv.rank() < 1) throw ShapeError("layer_norm: input must have rank >= 1");
    const size_t h = xv.shape.back();
    if (gamma.value().shape != std::vector<size_t>{h} || beta.value().shape != std::vector<size_t>{h})
        throw ShapeError("layer_norm: gamma/beta must be [" + std::to_string(h) + "], got " +
                         gamma.value().shape_str() + " and " + beta.value().shape_str());
    const size_t rows = xv.numel() / h;

    Tensor<T> out(xv.shape);
    auto xhat = std::make_shared<std::vector<T>>(xv.numel());
    auto inv_std = std::make_shared<std::vector<T>>(rows);
    const Tensor<T>& gv = gamma.value();
    const Tensor<T>& bv = beta.value();
    for (size_t r = 0; r < rows; ++r) {
        const size_t base = r * h;
        T mean = T(0);
        for (size_t j = 0; j < h; ++j) mean += xv[base + j];
        mean /= static_cast<T>(h);
        T var = T(0);
        for (size_t j = 0; j < h; ++j) {
            const T d = xv[base + j] - mean;
            var += d * d;
        }
        var /= static_cast<T>(h);
        const T inv = T(1) / std::sqrt(var + eps);
        (*inv_std)[r] = inv;
        for (size_t j = 0; j < h; ++j) {
            const T xh = (xv[base + j] - mean) * inv;
            (*xhat)[base + j] = xh;
            out[base + j] = gv[j] * xh + bv[j];
        }
    }

    const bool rg = tp.node(x.id).requires_grad || tp.node(gamma.id).requires_grad ||
                    tp.node(beta.id).requires_grad;
    const int xid = x.id, gid = gamma.id, bid = beta.id, out_id = static_cast<int>(tp.size());
    auto back = [xid, gid, bid, out_id, h, rows, xhat, inv_std](Tape<T>& t) {
        const Tensor<T>& g = t.node(out_id).grad;
        const Tensor<T>& gv = t.node(gid).value;
        for (size_t r = 0; r < rows; ++r) {
            const size_t base = r * h;
            if (t.node(gid).requires_grad) {
                Tensor<T>& dg = t.node(gid).grad;
                for (size_t j = 0; j < h; ++j) dg[j] += g[base + j] * (*xhat)[base + j];
            }
            if (t.node(bid).requires_grad) {
                Tensor<T>& db = t.node(bid).grad;
                for (size_t j = 0; j < h; ++j) db[j] += g[base + j];
            }
            if (t.node(xid).requires_grad) {
                Tensor<T>& dx = t.node(xid).grad;
                T mean_dxh = T(0), mean_dxh_xh = T(0);
                for (size_t j = 0; j < h; ++j) {
                    const T dxh = g[base + j] * gv[j];
                    mean_dxh += dxh;
                    mean_dxh_xh += dxh * (*xhat)[base + j];
                }
                mean_dxh /= static_cast<T>(h);
                mean_dxh_xh /= static_cast<T>(h);
                const T inv = (*inv_std)[r];
                for (size_t j = 0; j < h; ++j) {
                    const T dxh = g[base + j] * gv[j];
                    dx[base + j] += inv * (dxh - mean_dxh - (*xhat)[base + j] * mean_dxh_xh);
                }
            }
        }
    };
    return tp.push("layer_norm", std::move(out), rg,
                   rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

namespace detail {
// tanh-approximation constants shared by forward and backward.
template <typename T>
struct GeluConst {
    static constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
    static constexpr T a = T(0.044715);
};
}  // namespace detail

template <typename T>
Var<T> gelu(Var<T> x) {
    Tape<T>& tp = *x.tape;
    const Tensor<T>& xv = x.value();
    Tensor<T> out(xv.shape);
    auto tanh_u = std::make_shared<std::vector<T>>(xv.numel());
    constexpr T c = detail::GeluConst<T>::c, a = detail::GeluConst<T>::a;
    for (size_t i = 0; i < xv.numel(); ++i) {
        const T v = xv[i];
        const T tu = std::tanh(c * (v + a * v * v * v));
        (*tanh_u)[i] = tu;
        out[i] = T(0.5) * v * (T(1) + tu);
    }
    const bool rg = tp.node(x.id).requires_grad;
    const int xid = x.id, out_id = static_cast<int>(tp.size());
    auto back = [xid, out_id, tanh_u](Tape<T>& t) {
        constexpr T cc = detail::GeluConst<T>::c, aa = detail::GeluConst<T>::a;
        const Tensor<T>& g = t.node(out_id).grad;
        const Tensor<T>& xv = t.node(xid).value;
        Tensor<T>& dx = t.node(xid).grad;
        for (size_t i = 0; i < g.numel(); ++i) {
            const T v = xv[i];
            const T tu = (*tanh_u)[i];
            const T du = cc * (T(1) + T(3) * aa * v * v);
            dx[i] += g[i] * (T(0.5) * (T(1) + tu) + T(0.5) * v * (T(1) - tu * tu) * du);
        }
    };
    return tp.push("gelu", std::move(out), rg, rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

template <typename T>
Var<T> tanh_op(Var<T> x) {
    Tape<T>& tp = *x.tape;
    Tensor<T> out = x.value();
    for (T& v : out.data) v = std::tanh(v);
    const bool rg = tp.node(x.id).requires_grad;
    const int xid = x.id, out_id = static_cast<int>(tp.size());
    auto back = [xid, out_id](Tape<T>& t) {
        const Tensor<T>& g = t.node(out_id).grad;
        const Tensor<T>& y = t.node(out_id).value;
        Tensor<T>& dx = t.node(xid).grad;
        for (size_t i = 0; i < g.numel(); ++i) dx[i] += g[i] * (T(1) - y[i] * y[i]);
    };
    return tp.push("tanh", std::move(out), rg, rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

// Row lookup: table is [V,H], out is [N,H] with out[n] = table[ids[n]].
template <typename T>
Var<T> embedding_gather(Var<T> table, const std::vector<int>& ids) {
    Tape<T>& tp = *table.tape;
    const Tensor<T>& tv = table.value();
    if (tv.rank() != 2) throw ShapeError("embedding_gather: table must be [V,H], got " + tv.shape_str());
    const size_t v_dim = tv.shape[0], h = tv.shape[1];
    for (size_t n = 0; n < ids.size(); ++n)
        if (ids[n] < 0 || static_cast<size_t>(ids[n]) >= v_dim)
            throw DataError("embedding_gather: id " + std::to_string(ids[n]) + " at position " +
                            std::to_string(n) + " outside table of " + std::to_string(v_dim));

    Tensor<T> out({ids.size(), h});
    for (size_t n = 0; n < ids.size(); ++n)
        std::copy(tv.data.begin() + static_cast<std::ptrdiff_t>(static_cast<size_t>(ids[n]) * h),
                  tv.data.begin() + static_cast<std::ptrdiff_t>((static_cast<size_t>(ids[n]) + 1) * h),
                  out.data.begin() + static_cast<std::ptrdiff_t>(n * h));

    const bool rg = tp.node(table.id).requires_grad;
    const int tid = table.id, out_id = static_cast<int>(tp.size());
    auto back = [tid, out_id, ids, h](Tape<T>& t) {
        const Tensor<T>& g = t.node(out_id).grad;
        Tensor<T>& dt = t.node(tid).grad;
        for (size_t n = 0; n < ids.size(); ++n) {
            const size_t row = static_cast<size_t>(ids[n]) * h;
            for (size_t j = 0; j < h; ++j) dt[row + j] += g[n * h + j];
        }
    };
    return tp.push("embedding_gather", std::move(out), rg,
                   rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

// Inverted dropout: keep with probability 1-rate, scale kept values by
// 1/(1-rate). Identity when not training or rate is 0.
template <typename T>
Var<T> dropout(Var<T> x, double rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0)
        throw ConfigError("dropout: rate must be in [0,1), got " + std::to_string(rate));
    Tape<T>& tp = *x.tape;
    const bool rg = tp.node(x.id).requires_grad;
    const int xid = x.id, out_id = static_cast<int>(tp.size());
    if (!training || rate == 0.0) {
        Tensor<T> out = x.value();
        auto back = [xid, out_id](Tape<T>& t) {
            const Tensor<T>& g = t.node(out_id).grad;
            Tensor<T>& dx = t.node(xid).grad;
            for (size_t i = 0; i < g.numel(); ++i) dx[i] += g[i];
        };
        return tp.push("dropout", std::move(out), rg,
                       rg ? std::function<void(Tape<T>&)>(back) : nullptr);
    }
    const Tensor<T>& xv = x.value();
    const T keep_scale = T(1.0 / (1.0 - rate));
    auto mask = std::make_shared<std::vector<uint8_t>>(xv.numel());
    Tensor<T> out(xv.shape);
    for (size_t i = 0; i < xv.numel(); ++i) {
        const bool keep = rng.next_double() >= rate;
        (*mask)[i] = keep ? 1 : 0;
        out[i] = keep ? xv[i] * keep_scale : T(0);
    }
    auto back = [xid, out_id, mask, keep_scale](Tape<T>& t) {
        const Tensor<T>& g = t.node(out_id).grad;
        Tensor<T>& dx = t.node(xid).grad;
        for (size_t i = 0; i < g.numel(); ++i)
            if ((*mask)[i]) dx[i] += g[i] * keep_scale;
    };
    return tp.push("dropout", std::move(out), rg,
                   rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

// Slice one position from axis 1: [B,S,H] -> [B,H].
template <typename T>
Var<T> select_axis1(Var<T> x, size_t index) {
    Tape<T>& tp = *x.tape;
    const Tensor<T>& xv = x.value();
    if (xv.rank() != 3) throw ShapeError("select_axis1: need rank 3, got " + xv.shape_str());
    const size_t b_dim = xv.shape[0], s_dim = xv.shape[1], h = xv.shape[2];
    if (index >= s_dim) throw ShapeError("select_axis1: index " + std::to_string(index) +
                                         " out of range for " + xv.shape_str());
    Tensor<T> out({b_dim, h});
    for (size_t b = 0; b < b_dim; ++b)
        std::copy(xv.data.begin() + static_cast<std::ptrdiff_t>((b * s_dim + index) * h),
                  xv.data.begin() + static_cast<std::ptrdiff_t>((b * s_dim + index + 1) * h),
                  out.data.begin() + static_cast<std::ptrdiff_t>(b * h));
    const bool rg = tp.node(x.id).requires_grad;
    const int xid = x.id, out_id = static_cast<int>(tp.size());
    auto back = [xid, out_id, s_dim, h, index, b_dim](Tape<T>& t) {
        const Tensor<T>& g = t.node(out_id).grad;
        Tensor<T>& dx = t.node(xid).grad;
        for (size_t b = 0; b < b_dim; ++b)
            for (size_t j = 0; j < h; ++j) dx[(b * s_dim + index) * h + j] += g[b * h + j];
    };
    return tp.push("select_axis1", std::move(out), rg,
                   rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

// Additive attention mask: scores are [B*heads, Sq, Sk]; key positions with
// key_mask[b*Sk + k] == 0 get -1e4 added (BERT's convention), pushing their
// post-softmax weight to ~0. Gradient passes through unchanged.
template <typename T>
Var<T> add_key_mask(Var<T> scores, const std::vector<uint8_t>& key_mask, size_t heads) {
    Tape<T>& tp = *scores.tape;
    const Tensor<T>& sv = scores.value();
    if (sv.rank() != 3) throw ShapeError("add_key_mask: need rank 3, got " + sv.shape_str());
    const size_t g_dim = sv.shape[0], sq = sv.shape[1], sk = sv.shape[2];
    if (heads == 0 || g_dim % heads != 0)
        throw ShapeError("add_key_mask: batch " + std::to_string(g_dim) +
                         " not divisible by heads " + std::to_string(heads));
    const size_t b_dim = g_dim / heads;
    if (key_mask.size() != b_dim * sk)
        throw ShapeError("add_key_mask: mask size " + std::to_string(key_mask.size()) +
                         " vs expected " + std::to_string(b_dim * sk));

    Tensor<T> out = sv;
    for (size_t g = 0; g < g_dim; ++g) {
        const size_t b = g / heads;
        for (size_t q = 0; q < sq; ++q)
            for (size_t k = 0; k < sk; ++k)
                if (!key_mask[b * sk + k]) out[(g * sq + q) * sk + k] += T(-1e4);
    }
    const bool rg = tp.node(scores.id).requires_grad;
    const int sid = scores.id, out_id = static_cast<int>(tp.size());
    auto back = [sid, out_id](Tape<T>& t) {
        const Tensor<T>& g = t.node(out_id).grad;
        Tensor<T>& ds = t.node(sid).grad;
        for (size_t i = 0; i < g.numel(); ++i) ds[i] += g[i];
    };
    return tp.push("add_key_mask", std::move(out), rg,
                   rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

template <typename T>
Var<T> sum(Var<T> x) {
    Tape<T>& tp = *x.tape;
    T total = T(0);
    for (const T& v : x.value().data) total += v;
    Tensor<T> out({}, total);
    const bool rg = tp.node(x.id).requires_grad;
    const int xid = x.id, out_id = static_cast<int>(tp.size());
    auto back = [xid, out_id](Tape<T>& t) {
        const T g = t.node(out_id).grad.data[0];
        Tensor<T>& dx = t.node(xid).grad;
        for (size_t i = 0; i < dx.numel(); ++i) dx[i] += g;
    };
    return tp.push("sum", std::move(out), rg, rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

inline constexpr int kIgnoreIndex = -100;

// Mean cross-entropy over rows whose target is not ignore_index.
// logits: [N,V]; targets: N labels.
template <typename T>
Var<T> cross_entropy_with_logits(Var<T> logits, const std::vector<int>& targets,
                                 int ignore_index = kIgnoreIndex) {
    Tape<T>& tp = *logits.tape;
    const Tensor<T>& lv = logits.value();
    if (lv.rank() != 2) throw ShapeError("cross_entropy: logits must be [N,V], got " + lv.shape_str());
    const size_t n_dim = lv.shape[0], v_dim = lv.shape[1];
    if (targets.size() != n_dim)
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n_dim) + " rows");

    auto probs = std::make_shared<std::vector<T>>(lv.numel());
    size_t count = 0;
    T total = T(0);
    for (size_t n = 0; n < n_dim; ++n) {
        const int tgt = targets[n];
        if (tgt == ignore_index) continue;
        if (tgt < 0 || static_cast<size_t>(tgt) >= v_dim)
            throw DataError("cross_entropy: target " + std::to_string(tgt) + " at row " +
                            std::to_string(n) + " outside vocab of " + std::to_string(v_dim));
        const size_t base = n * v_dim;
        T mx = lv[base];
        for (size_t v = 1; v < v_dim; ++v) mx = std::max(mx, lv[base + v]);
        T denom = T(0);
        for (size_t v = 0; v < v_dim; ++v) {
            const T e = std::exp(lv[base + v] - mx);
            (*probs)[base + v] = e;
            denom += e;
        }
        for (size_t v = 0; v < v_dim; ++v) (*probs)[base + v] /= denom;
        total += std::log(denom) + mx - lv[base + static_cast<size_t>(tgt)];
        ++count;
    }
    if (count == 0) throw DataError("cross_entropy: every target ignored");
    Tensor<T> out({}, total / static_cast<T>(count));

    const bool rg = tp.node(logits.id).requires_grad;
    const int lid = logits.id, out_id = static_cast<int>(tp.size());
    auto back = [lid, out_id, targets, ignore_index, probs, v_dim, count](Tape<T>& t) {
        const T g = t.node(out_id).grad.data[0];
        Tensor<T>& dl = t.node(lid).grad;
        const T inv_count = T(1) / static_cast<T>(count);
        for (size_t n = 0; n < targets.size(); ++n) {
            if (targets[n] == ignore_index) continue;
            const size_t base = n * v_dim;
            for (size_t v = 0; v < v_dim; ++v) {
                T p = (*probs)[base + v];
                if (v == static_cast<size_t>(targets[n])) p -= T(1);
                dl[base + v] += g * p * inv_count;
            }
        }
    };
    return tp.push("cross_entropy", std::move(out), rg,
                   rg ? std::function<void(Tape<T>&)>(back) : nullptr);
}

}  // namespace noiselab::ad

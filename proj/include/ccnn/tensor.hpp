// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <type_traits>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ccnn/errors.hpp"

// Forward-value sanity checks (NaN/Inf screens, gate-range asserts) are on in
// debug builds and in any TU that defines CCNN_DEBUG_CHECKS=1 explicitly.
#ifndef CCNN_DEBUG_CHECKS
#ifdef NDEBUG
#define CCNN_DEBUG_CHECKS 0
#else
#define CCNN_DEBUG_CHECKS 1
#endif
#endif

namespace ccnn {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

inline long shape_numel(const Shape& s) {
    long n = 1;
    for (int d : s) n *= d;
    return n;
}

inline void check_shape_positive(const Shape& s) {
    if (s.empty()) throw DimensionError("tensor shape must have at least one dimension");
    for (int d : s)
        if (d < 1) throw DimensionError("tensor shape " + shape_str(s) + " has extent < 1");
}

template <typename T>
struct TensorData {
    Shape shape;
    std::vector<T> v;  // row-major values
    std::vector<T> g;  // gradient accumulator, allocated iff requires_grad
    bool requires_grad = false;
};

/// Dense row-major tensor. A Tensor is a cheap handle to shared storage;
/// values are treated as immutable once an op has consumed them, and only
/// the gradient buffer is mutated afterwards (by Tape::backward).
template <typename T>
class Tensor {
public:
    using Scalar = T;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        check_shape_positive(shape);
        Tensor t;
        t.d_ = std::make_shared<TensorData<T>>();
        t.d_->shape = std::move(shape);
        t.d_->v.assign(static_cast<std::size_t>(shape_numel(t.d_->shape)), T(0));
        t.d_->requires_grad = requires_grad;
        if (requires_grad) t.d_->g.assign(t.d_->v.size(), T(0));
        return t;
    }

    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (auto& x : t.d_->v) x = value;
        return t;
    }

    static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
        check_shape_positive(shape);
        if (shape_numel(shape) != static_cast<long>(values.size()))
            throw DimensionError("tensor init: shape " + shape_str(shape) + " expects " +
                                 std::to_string(shape_numel(shape)) + " values, got " +
                                 std::to_string(values.size()));
        Tensor t;
        t.d_ = std::make_shared<TensorData<T>>();
        t.d_->shape = std::move(shape);
        t.d_->v = std::move(values);
        t.d_->requires_grad = requires_grad;
        if (requires_grad) t.d_->g.assign(t.d_->v.size(), T(0));
        return t;
    }

    static Tensor scalar(T value, bool requires_grad = false) {
        return from({1}, {value}, requires_grad);
    }

    bool defined() const { return d_ != nullptr; }
    const Shape& shape() const { return d_->shape; }
    int rank() const { return static_cast<int>(d_->shape.size()); }
    int dim(int i) const { return d_->shape[static_cast<std::size_t>(i)]; }
    long size() const { return static_cast<long>(d_->v.size()); }
    bool requires_grad() const { return d_ && d_->requires_grad; }

    T* data() { return d_->v.data(); }
    const T* data() const { return d_->v.data(); }
    T* grad() { return d_->g.empty() ? nullptr : d_->g.data(); }
    const T* grad() const { return d_->g.empty() ? nullptr : d_->g.data(); }

    T& operator()(int i) { return d_->v[static_cast<std::size_t>(i)]; }
    T operator()(int i) const { return d_->v[static_cast<std::size_t>(i)]; }
    T& operator()(int i, int j) { return d_->v[flat(i, j)]; }
    T operator()(int i, int j) const { return d_->v[flat(i, j)]; }
    T& operator()(int i, int j, int k) { return d_->v[flat(i, j, k)]; }
    T operator()(int i, int j, int k) const { return d_->v[flat(i, j, k)]; }
    T& operator()(int i, int j, int k, int l) { return d_->v[flat(i, j, k, l)]; }
    T operator()(int i, int j, int k, int l) const { return d_->v[flat(i, j, k, l)]; }

    /// Value of a 1-element tensor.
    T item() const {
        if (size() != 1)
            throw ContractError("item() on non-scalar tensor of shape " + shape_str(shape()));
        return d_->v[0];
    }

    Tensor clone() const {
        Tensor t = from(d_->shape, d_->v, d_->requires_grad);
        t.d_->g = d_->g;
        return t;
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> values(d_->v.begin(), d_->v.end());
        return Tensor<U>::from(d_->shape, std::move(values), d_->requires_grad);
    }

    void zero_grad() {
        for (auto& x : d_->g) x = T(0);
    }

    /// Identity of the underlying storage (used by the tape).
    std::shared_ptr<TensorData<T>> storage() const { return d_; }

    bool all_finite() const {
        for (T x : d_->v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

private:
    std::size_t flat(int i, int j) const {
        return static_cast<std::size_t>(i) * d_->shape[1] + j;
    }
    std::size_t flat(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * d_->shape[1] + j) * d_->shape[2] + k;
    }
    std::size_t flat(int i, int j, int k, int l) const {
        return ((static_cast<std::size_t>(i) * d_->shape[1] + j) * d_->shape[2] + k) *
                   d_->shape[3] +
               l;
    }

    std::shared_ptr<TensorData<T>> d_;
};

#if CCNN_DEBUG_CHECKS
template <typename T>
inline void debug_check_finite(const Tensor<T>& t, const char* op) {
    if (!t.all_finite())
        throw std::runtime_error(std::string("non-finite value produced by ") + op);
}
#else
template <typename T>
inline void debug_check_finite(const Tensor<T>&, const char*) {}
#endif

/// Record of one forward pass. Ops executed against a tape append a backward
/// closure; backward() replays them in strict reverse execution order and
/// populates .grad on every reachable requires_grad tensor. A tape is meant
/// to live for a single forward/backward cycle.
template <typename T>
class Tape {
public:
    void record(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }

    /// Registers a gradful leaf (input/parameter). Its gradient is reset by a
    /// non-accumulating backward() and left alone by an accumulating one.
    void watch(const Tensor<T>& t) {
        if (!t.requires_grad()) return;
        auto* raw = t.storage().get();
        if (seen_.insert(raw).second) watched_.push_back(t.storage());
    }

    /// Registers an op output. Interior gradients are scratch for one
    /// backward pass and are reset on every call, accumulating or not.
    void track_interior(const Tensor<T>& t) {
        if (!t.requires_grad()) return;
        auto* raw = t.storage().get();
        if (seen_.insert(raw).second) interior_.push_back(t.storage());
    }

    std::size_t num_ops() const { return nodes_.size(); }

    /// Backpropagates from a scalar loss. `seed` is the gradient injected at
    /// the loss (1 for plain derivatives, 1/batch for mean-reduced batches).
    /// With accumulate=false existing gradients of all tensors this tape
    /// touched are zeroed first; with accumulate=true they are added to.
    void backward(const Tensor<T>& loss, T seed = T(1), bool accumulate = false) {
        if (loss.size() != 1)
            throw ContractError("backward requires a scalar loss, got shape " +
                                shape_str(loss.shape()));
        if (!loss.requires_grad())
            throw ContractError("backward on a loss that does not require grad");
        if (!accumulate)
            for (auto& s : watched_)
                for (auto& g : s->g) g = T(0);
        for (auto& s : interior_)
            for (auto& g : s->g) g = T(0);
        loss.storage()->g[0] += seed;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> nodes_;
    std::vector<std::shared_ptr<TensorData<T>>> watched_;
    std::vector<std::shared_ptr<TensorData<T>>> interior_;
    std::unordered_set<const void*> seen_;
};

/// Non-deduced spelling of Tape<T>* for op parameters, so call sites may
/// pass a plain nullptr when no recording is wanted.
template <typename T>
using TapeOf = Tape<std::type_identity_t<T>>;

namespace detail {

/// True when the op should be recorded: a tape is active and some input
/// carries gradient.
template <typename T>
inline bool needs_grad(Tape<T>* tape, std::initializer_list<const Tensor<T>*> inputs) {
    if (!tape) return false;
    for (const Tensor<T>* t : inputs)
        if (t->defined() && t->requires_grad()) return true;
    return false;
}

}  // namespace detail

}  // namespace ccnn

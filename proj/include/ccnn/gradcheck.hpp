// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdlib>
#include <vector>

#include "ccnn/tensor.hpp"

namespace ccnn {

/// Compares tape gradients against central finite differences.
///
/// `fn` maps a tape pointer to a scalar loss tensor; it is re-run with a null
/// tape for each perturbed evaluation. Returns the worst relative error
/// |a - n| / max(|a|, |n|, 1e-8) over every coordinate of every parameter.
/// Intended for T = double; 32-bit arithmetic drowns the signal in rounding
/// noise.
template <typename T, typename F>
T grad_check(F&& fn, const std::vector<Tensor<T>>& params, T eps) {
    Tape<T> tape;
    Tensor<T> loss = fn(&tape);
    if (loss.size() != 1)
        throw ContractError("grad_check: fn must return a scalar, got " + shape_str(loss.shape()));
    tape.backward(loss);

    std::vector<std::vector<T>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.emplace_back(p.grad(), p.grad() + p.size());

    T worst = 0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor<T> p = params[pi];
        T* v = p.data();
        for (long i = 0; i < p.size(); ++i) {
            const T saved = v[i];
            v[i] = saved + eps;
            const T up = fn(static_cast<Tape<T>*>(nullptr)).item();
            v[i] = saved - eps;
            const T down = fn(static_cast<Tape<T>*>(nullptr)).item();
            v[i] = saved;
            const T numeric = (up - down) / (2 * eps);
            const T a = analytic[pi][static_cast<std::size_t>(i)];
            const T rel = std::abs(a - numeric) /
                          std::max({std::abs(a), std::abs(numeric), T(1e-8)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace ccnn

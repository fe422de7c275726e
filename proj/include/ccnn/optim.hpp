// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "ccnn/tensor.hpp"

namespace ccnn {

/// Learning rate after i iterations under inverse decay: eta / (1 + i*d).
inline double lr_at(double eta, double d, long i) { return eta / (1.0 + static_cast<double>(i) * d); }

/// Heavy-ball momentum SGD:
///   v <- mu*v - lr_at(i)*g,  p <- p + v,  i <- i + 1.
/// A phase switch replaces (eta, d) and restarts the iteration counter, so
/// the decay schedule is local to each phase.
template <typename T>
class Sgd {
public:
    Sgd(std::vector<Tensor<T>> params, double eta, double decay, double momentum)
        : params_(std::move(params)), eta_(eta), d_(decay), mu_(momentum) {
        if (eta_ <= 0) throw ContractError("sgd: learning rate must be > 0");
        if (d_ < 0) throw ContractError("sgd: decay must be >= 0");
        if (mu_ < 0 || mu_ >= 1) throw ContractError("sgd: momentum must be in [0,1)");
        vel_.reserve(params_.size());
        for (const auto& p : params_) {
            if (!p.requires_grad())
                throw ContractError("sgd: parameter without gradient storage");
            vel_.emplace_back(static_cast<std::size_t>(p.size()), T(0));
        }
    }

    double current_lr() const { return lr_at(eta_, d_, i_); }
    long iteration() const { return i_; }

    /// Applies one update from the gradients currently on the parameters.
    void step() {
        const T lr = static_cast<T>(current_lr());
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            Tensor<T>& p = params_[pi];
            const T* g = p.grad();
            if (g == nullptr)
                throw ContractError("sgd: parameter " + std::to_string(pi) + " has no gradient");
            T* v = vel_[pi].data();
            T* w = p.data();
            const long n = p.size();
#pragma omp simd
            for (long j = 0; j < n; ++j) {
                v[j] = static_cast<T>(mu_) * v[j] - lr * g[j];
                w[j] += v[j];
            }
        }
        ++i_;
    }

    /// Restarts the decay schedule with new constants; velocity carries over.
    void switch_phase(double eta, double decay) {
        if (eta <= 0) throw ContractError("sgd: phase learning rate must be > 0");
        if (decay < 0) throw ContractError("sgd: phase decay must be >= 0");
        eta_ = eta;
        d_ = decay;
        i_ = 0;
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

private:
    std::vector<Tensor<T>> params_;
    std::vector<std::vector<T>> vel_;
    double eta_, d_, mu_;
    long i_ = 0;
};

}  // namespace ccnn

// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "ccnn/ops.hpp"
#include "ccnn/rng.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

/// One LSTM layer's weights: an (input-to-hidden, hidden-to-hidden, bias)
/// triple per gate, for the input, forget, output, and memory-cell gates.
template <typename T>
struct LstmParams {
    Tensor<T> wx_i, wh_i, b_i;
    Tensor<T> wx_f, wh_f, b_f;
    Tensor<T> wx_o, wh_o, b_o;
    Tensor<T> wx_c, wh_c, b_c;

    int input_dim() const { return wx_i.dim(1); }
    int hidden_dim() const { return wx_i.dim(0); }

    /// He-normal gate matrices (stddev sqrt(2/fan_in)), zero biases. The
    /// forget bias can optionally start at 1 so fresh cells retain memory.
    static LstmParams init(int input_dim, int hidden, Rng& rng, bool requires_grad = true,
                           bool forget_bias_one = false) {
        auto mat = [&](int rows, int cols, const std::string& name) {
            Rng r = Rng::child_of(rng.next_u64(), name);
            const T s = std::sqrt(T(2) / static_cast<T>(cols));
            Tensor<T> t = Tensor<T>::zeros({rows, cols}, requires_grad);
            for (long i = 0; i < t.size(); ++i)
                t.data()[i] = static_cast<T>(r.normal(0.0, s));
            return t;
        };
        auto bias = [&](T fill) { return Tensor<T>::full({hidden}, fill, requires_grad); };
        LstmParams p;
        p.wx_i = mat(hidden, input_dim, "wx_i");
        p.wh_i = mat(hidden, hidden, "wh_i");
        p.b_i = bias(0);
        p.wx_f = mat(hidden, input_dim, "wx_f");
        p.wh_f = mat(hidden, hidden, "wh_f");
        p.b_f = bias(forget_bias_one ? T(1) : T(0));
        p.wx_o = mat(hidden, input_dim, "wx_o");
        p.wh_o = mat(hidden, hidden, "wh_o");
        p.b_o = bias(0);
        p.wx_c = mat(hidden, input_dim, "wx_c");
        p.wh_c = mat(hidden, hidden, "wh_c");
        p.b_c = bias(0);
        return p;
    }

    std::vector<Tensor<T>> tensors() const {
        return {wx_i, wh_i, b_i, wx_f, wh_f, b_f, wx_o, wh_o, b_o, wx_c, wh_c, b_c};
    }

    void validate() const {
        const int h = hidden_dim(), d = input_dim();
        auto expect = [](const Tensor<T>& t, Shape s, const char* name) {
            if (t.shape() != s)
                throw DimensionError(std::string("LstmParams: ") + name + " has shape " +
                                     shape_str(t.shape()) + ", expected " + shape_str(s));
        };
        expect(wh_i, {h, h}, "wh_i");
        expect(b_i, {h}, "b_i");
        expect(wx_f, {h, d}, "wx_f");
        expect(wh_f, {h, h}, "wh_f");
        expect(b_f, {h}, "b_f");
        expect(wx_o, {h, d}, "wx_o");
        expect(wh_o, {h, h}, "wh_o");
        expect(b_o, {h}, "b_o");
        expect(wx_c, {h, d}, "wx_c");
        expect(wh_c, {h, h}, "wh_c");
        expect(b_c, {h}, "b_c");
    }
};

template <typename T>
struct LstmState {
    Tensor<T> h;
    Tensor<T> c;
};

/// Zero state shaped to match an input x of shape [D] or [D x B].
template <typename T>
LstmState<T> lstm_zero_state(int hidden, const Tensor<T>& x_like) {
    Shape s = x_like.rank() == 2 ? Shape{hidden, x_like.dim(1)} : Shape{hidden};
    return {Tensor<T>::zeros(s), Tensor<T>::zeros(s)};
}

/// One timestep:
///   i = sigmoid(Wx_i x + Wh_i h + b_i), f and o analogous,
///   cand = tanh(Wx_c x + Wh_c h + b_c),
///   c_t = f * c_{t-1} + i * cand,  h_t = o * tanh(c_t).
/// x may be a single vector [D] or a column batch [D x B]; the state follows.
template <typename T>
LstmState<T> lstm_step(const Tensor<T>& x, const LstmState<T>& prev, const LstmParams<T>& p,
                       TapeOf<T>* tape) {
    if (x.dim(0) != p.input_dim())
        throw DimensionError("lstm_step: input " + shape_str(x.shape()) +
                             " does not match weight " + shape_str(p.wx_i.shape()));
    if (prev.h.dim(0) != p.hidden_dim())
        throw DimensionError("lstm_step: state " + shape_str(prev.h.shape()) +
                             " does not match hidden size " + std::to_string(p.hidden_dim()));
    auto gate = [&](const Tensor<T>& wx, const Tensor<T>& wh, const Tensor<T>& b, Act act) {
        Tensor<T> z = add(matmul(wx, x, tape), matmul(wh, prev.h, tape), tape);
        return activate(add_col_bias(z, b, tape), act, tape);
    };
    Tensor<T> i = gate(p.wx_i, p.wh_i, p.b_i, Act::Sigmoid);
    Tensor<T> f = gate(p.wx_f, p.wh_f, p.b_f, Act::Sigmoid);
    Tensor<T> o = gate(p.wx_o, p.wh_o, p.b_o, Act::Sigmoid);
    Tensor<T> cand = gate(p.wx_c, p.wh_c, p.b_c, Act::Tanh);
    Tensor<T> c = add(mul(f, prev.c, tape), mul(i, cand, tape), tape);
    Tensor<T> h = mul(o, activate(c, Act::Tanh, tape), tape);
    return {h, c};
}

/// Runs a two-layer stack over T inputs (already confidence-ordered) from
/// zero states and returns the layer-2 hidden vector at every timestep.
template <typename T>
std::vector<Tensor<T>> lstm_sequence(const std::vector<Tensor<T>>& inputs,
                                     const LstmParams<T>& layer1, const LstmParams<T>& layer2,
                                     TapeOf<T>* tape) {
    if (inputs.empty()) throw ContractError("lstm_sequence: empty input sequence");
    LstmState<T> s1 = lstm_zero_state(layer1.hidden_dim(), inputs[0]);
    LstmState<T> s2 = lstm_zero_state(layer2.hidden_dim(), inputs[0]);
    std::vector<Tensor<T>> outputs;
    outputs.reserve(inputs.size());
    for (const auto& x : inputs) {
        s1 = lstm_step(x, s1, layer1, tape);
        s2 = lstm_step(s1.h, s2, layer2, tape);
        outputs.push_back(s2.h);
    }
    return outputs;
}

enum class SeqMode { ConcatAll, LastStep };

/// ConcatAll joins h_1..h_T in timestep order; LastStep keeps h_T alone.
template <typename T>
Tensor<T> assemble_sequence_feature(const std::vector<Tensor<T>>& outputs, SeqMode mode,
                                    TapeOf<T>* tape) {
    if (outputs.empty()) throw ContractError("assemble_sequence_feature: empty sequence");
    if (mode == SeqMode::LastStep) return outputs.back();
    return concat(outputs, tape);
}

}  // namespace ccnn

// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ccnn/gradcheck.hpp"
#include "ccnn/model.hpp"

namespace ccnn {

/// 64-bit finite-difference verification of every differentiable stage, from
/// single ops up to the full base model on a small image. Returns
/// (name, worst relative error) per item; each should come in under 1e-4.
inline std::vector<std::pair<std::string, double>> run_gradient_suite(uint64_t seed = 20260814,
                                                                      double eps = 1e-5) {
    using T = double;
    std::vector<std::pair<std::string, double>> results;
    Rng rng = Rng::child_of(seed, "gradsuite");

    auto randomize = [&](Tensor<T> t, double scale = 1.0) {
        for (long i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-scale, scale);
        return t;
    };

    {
        Tensor<T> x = randomize(Tensor<T>::zeros({2, 6, 6}, true));
        Tensor<T> k = randomize(Tensor<T>::zeros({3, 2, 3, 3}, true));
        auto fn = [&](Tape<T>* tape) { return sum(conv2d(x, k, 2, 1, tape), tape); };
        results.emplace_back("conv2d", grad_check<T>(fn, {x, k}, eps));
    }
    {
        Tensor<T> w = randomize(Tensor<T>::zeros({4, 5}, true));
        Tensor<T> b = randomize(Tensor<T>::zeros({4}, true));
        Tensor<T> x = randomize(Tensor<T>::zeros({5}, true));
        auto fn = [&](Tape<T>* tape) {
            return sum(activate(dense(w, b, x, tape), Act::Tanh, tape), tape);
        };
        results.emplace_back("dense", grad_check<T>(fn, {w, b, x}, eps));
    }
    {
        Tensor<T> logits = randomize(Tensor<T>::zeros({5}, true), 2.0);
        auto fn = [&](Tape<T>* tape) { return softmax_cross_entropy(logits, 2, tape); };
        results.emplace_back("softmax_cross_entropy", grad_check<T>(fn, {logits}, eps));
    }
    {
        Tensor<T> features = randomize(Tensor<T>::zeros({2, 6, 6}, true));
        RoiSpec spec;
        spec.box = {0.5, 1.0, 5.5, 6.0, 1.0};
        spec.pooled_h = 2;
        spec.pooled_w = 2;
        spec.spatial_scale = 1.0;
        auto fn = [&](Tape<T>* tape) { return sum(roi_pool(features, spec, tape), tape); };
        results.emplace_back("roi_pool", grad_check<T>(fn, {features}, eps));
    }
    {
        Rng init_rng = Rng::child_of(seed, "lstm-step");
        LstmParams<T> p = LstmParams<T>::init(4, 3, init_rng);
        Tensor<T> x = randomize(Tensor<T>::zeros({4}, true));
        Tensor<T> h0 = randomize(Tensor<T>::zeros({3}, true));
        Tensor<T> c0 = randomize(Tensor<T>::zeros({3}, true));
        auto fn = [&](Tape<T>* tape) {
            LstmState<T> s = lstm_step(x, {h0, c0}, p, tape);
            return add(sum(s.h, tape), sum(s.c, tape), tape);
        };
        std::vector<Tensor<T>> params = p.tensors();
        params.push_back(x);
        params.push_back(h0);
        params.push_back(c0);
        results.emplace_back("lstm_step", grad_check<T>(fn, params, eps));
    }
    {
        Rng r1 = Rng::child_of(seed, "lstm-seq-1");
        Rng r2 = Rng::child_of(seed, "lstm-seq-2");
        LstmParams<T> l1 = LstmParams<T>::init(3, 4, r1);
        LstmParams<T> l2 = LstmParams<T>::init(4, 3, r2);
        std::vector<Tensor<T>> inputs;
        for (int t = 0; t < 4; ++t) inputs.push_back(randomize(Tensor<T>::zeros({3}, true)));
        auto fn = [&](Tape<T>* tape) {
            auto hs = lstm_sequence(inputs, l1, l2, tape);
            return sum(assemble_sequence_feature(hs, SeqMode::ConcatAll, tape), tape);
        };
        std::vector<Tensor<T>> params = l1.tensors();
        for (auto& t : l2.tensors()) params.push_back(t);
        for (auto& t : inputs) params.push_back(t);
        results.emplace_back("lstm_sequence", grad_check<T>(fn, params, eps));
    }
    {
        ModelConfig cfg;
        cfg.kind = Variant::Base;
        cfg.backbone.in_channels = 1;
        cfg.backbone.input_size = 8;
        cfg.backbone.blocks = {{6, 3, 2, 1}};
        cfg.num_boxes = 2;
        cfg.pooled = 2;
        cfg.hidden1 = 6;
        cfg.hidden2 = 5;
        cfg.dense_width = 8;
        cfg.num_classes = 3;
        Model<T> model = Model<T>::init(cfg, Rng::child_of(seed, "model").next_u64());
        Tensor<T> image = randomize(Tensor<T>::zeros({1, 8, 8}), 0.5);
        for (long i = 0; i < image.size(); ++i) image.data()[i] = std::abs(image.data()[i]);
        std::vector<Box> boxes = {{0, 0, 5, 5, 0.9}, {2, 2, 8, 8, 0.5}};
        auto fn = [&](Tape<T>* tape) { return model.loss(image, boxes, 1, tape); };
        results.emplace_back("base_model", grad_check<T>(fn, model.params(), eps));
    }
    return results;
}

}  // namespace ccnn

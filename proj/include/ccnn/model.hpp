// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ccnn/backbone.hpp"
#include "ccnn/box.hpp"
#include "ccnn/lstm.hpp"
#include "ccnn/ops.hpp"
#include "ccnn/roi_pool.hpp"

namespace ccnn {

/// The four architectures under comparison:
///   base          backbone + RoI pooling + 2-layer LSTM, all steps concatenated
///   last_step     as base but only the final LSTM output feeds the classifier
///   dense_replace LSTM layers swapped for a shared per-box 2-layer MLP
///   plain_cnn     backbone + global average pooling, no proposal path
enum class Variant { Base, LastStep, DenseReplace, PlainCnn };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Base: return "base";
        case Variant::LastStep: return "last_step";
        case Variant::DenseReplace: return "dense_replace";
        case Variant::PlainCnn: return "plain_cnn";
    }
    return "base";
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "base") return Variant::Base;
    if (s == "last_step") return Variant::LastStep;
    if (s == "dense_replace") return Variant::DenseReplace;
    if (s == "plain_cnn") return Variant::PlainCnn;
    throw ContractError("unknown model variant '" + s +
                        "' (expected base|last_step|dense_replace|plain_cnn)");
}

struct ModelConfig {
    Variant kind = Variant::Base;
    BackboneConfig backbone;
    int num_boxes = 10;   // boxes consumed per image, = LSTM timesteps
    int pooled = 7;       // RoI output grid is pooled x pooled
    int hidden1 = 128;
    int hidden2 = 64;
    int dense_width = 128;
    int num_classes = 4;

    int roi_feature_len() const { return backbone.out_channels() * pooled * pooled; }

    int assembled_len() const {
        switch (kind) {
            case Variant::Base:
            case Variant::DenseReplace: return num_boxes * hidden2;
            case Variant::LastStep: return hidden2;
            case Variant::PlainCnn: return backbone.out_channels();
        }
        return 0;
    }

    void validate() const {
        backbone.validate();
        if (num_boxes < 1) throw ContractError("model: num_boxes must be >= 1");
        if (pooled < 1) throw ContractError("model: pooled size must be >= 1");
        if (hidden1 < 1 || hidden2 < 1 || dense_width < 1)
            throw ContractError("model: layer widths must be >= 1");
        if (num_classes < 2) throw ContractError("model: need >= 2 classes");
    }
};

/// Intermediate activations exposed for analysis and feature export.
template <typename T>
struct ForwardTrace {
    Tensor<T> feature_map;
    std::vector<Tensor<T>> roi_features;   // flattened pooled vector per box
    std::vector<Tensor<T>> lstm_outputs;   // layer-2 h_t (LSTM kinds only)
    Tensor<T> assembled;
    Tensor<T> logits;
};

namespace detail {

template <typename T>
Tensor<T> he_normal(Shape shape, int fan_in, uint64_t seed, const std::string& name) {
    Rng r = Rng::child_of(seed, name);
    const T s = std::sqrt(T(2) / static_cast<T>(fan_in));
    Tensor<T> t = Tensor<T>::zeros(std::move(shape), true);
    for (long i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(r.normal(0.0, s));
    return t;
}

}  // namespace detail

template <typename T>
Tensor<T> dense(const Tensor<T>& w, const Tensor<T>& b, const Tensor<T>& x, TapeOf<T>* tape) {
    return add_col_bias(matmul(w, x, tape), b, tape);
}

template <typename T>
struct Model {
    ModelConfig cfg;
    BackboneParams<T> bb;
    LstmParams<T> l1, l2;                   // base / last_step
    Tensor<T> mlp_w1, mlp_b1, mlp_w2, mlp_b2;  // dense_replace per-box MLP
    Tensor<T> head_w, head_b;               // assembled feature -> dense_width
    Tensor<T> out_w, out_b;                 // dense_width -> num_classes

    static Model init(const ModelConfig& cfg, uint64_t seed) {
        cfg.validate();
        Model m;
        m.cfg = cfg;
        Rng bb_rng = Rng::child_of(seed, "backbone");
        m.bb = BackboneParams<T>::init(cfg.backbone, bb_rng);
        const int d = cfg.roi_feature_len();
        if (cfg.kind == Variant::Base || cfg.kind == Variant::LastStep) {
            Rng r1 = Rng::child_of(seed, "lstm1");
            Rng r2 = Rng::child_of(seed, "lstm2");
            // Forget bias starts at 1 so fresh cells retain memory; with a
            // short iteration budget the stack learns to carry earlier
            // boxes' evidence much sooner.
            m.l1 = LstmParams<T>::init(d, cfg.hidden1, r1, true, true);
            m.l2 = LstmParams<T>::init(cfg.hidden1, cfg.hidden2, r2, true, true);
        } else if (cfg.kind == Variant::DenseReplace) {
            m.mlp_w1 = detail::he_normal<T>({cfg.hidden1, d}, d, seed, "boxmlp1.w");
            m.mlp_b1 = Tensor<T>::zeros({cfg.hidden1}, true);
            m.mlp_w2 = detail::he_normal<T>({cfg.hidden2, cfg.hidden1}, cfg.hidden1, seed,
                                            "boxmlp2.w");
            m.mlp_b2 = Tensor<T>::zeros({cfg.hidden2}, true);
        }
        const int f = cfg.assembled_len();
        m.head_w = detail::he_normal<T>({cfg.dense_width, f}, f, seed, "head.w");
        m.head_b = Tensor<T>::zeros({cfg.dense_width}, true);
        m.out_w = detail::he_normal<T>({cfg.num_classes, cfg.dense_width}, cfg.dense_width, seed,
                                       "out.w");
        m.out_b = Tensor<T>::zeros({cfg.num_classes}, true);
        return m;
    }

    bool uses_boxes() const { return cfg.kind != Variant::PlainCnn; }
    bool uses_lstm() const {
        return cfg.kind == Variant::Base || cfg.kind == Variant::LastStep;
    }

    std::vector<std::pair<std::string, Tensor<T>>> named_params() const {
        std::vector<std::pair<std::string, Tensor<T>>> out;
        for (std::size_t i = 0; i < bb.w.size(); ++i) {
            out.emplace_back("conv" + std::to_string(i) + ".w", bb.w[i]);
            out.emplace_back("conv" + std::to_string(i) + ".b", bb.b[i]);
        }
        if (uses_lstm()) {
            const char* gate[] = {"i", "f", "o", "c"};
            const LstmParams<T>* layers[] = {&l1, &l2};
            for (int li = 0; li < 2; ++li) {
                const auto& p = *layers[li];
                const Tensor<T>* wx[] = {&p.wx_i, &p.wx_f, &p.wx_o, &p.wx_c};
                const Tensor<T>* wh[] = {&p.wh_i, &p.wh_f, &p.wh_o, &p.wh_c};
                const Tensor<T>* b[] = {&p.b_i, &p.b_f, &p.b_o, &p.b_c};
                const std::string prefix = "lstm" + std::to_string(li + 1) + ".";
                for (int g = 0; g < 4; ++g) {
                    out.emplace_back(prefix + "wx_" + gate[g], *wx[g]);
                    out.emplace_back(prefix + "wh_" + gate[g], *wh[g]);
                    out.emplace_back(prefix + "b_" + gate[g], *b[g]);
                }
            }
        } else if (cfg.kind == Variant::DenseReplace) {
            out.emplace_back("boxmlp1.w", mlp_w1);
            out.emplace_back("boxmlp1.b", mlp_b1);
            out.emplace_back("boxmlp2.w", mlp_w2);
            out.emplace_back("boxmlp2.b", mlp_b2);
        }
        out.emplace_back("head.w", head_w);
        out.emplace_back("head.b", head_b);
        out.emplace_back("out.w", out_w);
        out.emplace_back("out.b", out_b);
        return out;
    }

    std::vector<Tensor<T>> params() const {
        std::vector<Tensor<T>> out;
        for (auto& [name, t] : named_params()) out.push_back(t);
        return out;
    }

    long param_count() const {
        long n = 0;
        for (const auto& [name, t] : named_params()) n += t.size();
        return n;
    }

    /// Totals per architectural group: backbone, sequence head, classifier.
    std::vector<std::pair<std::string, long>> param_count_by_group() const {
        long backbone = 0, seq = 0, cls = 0;
        for (const auto& [name, t] : named_params()) {
            if (name.rfind("conv", 0) == 0)
                backbone += t.size();
            else if (name.rfind("head", 0) == 0 || name.rfind("out", 0) == 0)
                cls += t.size();
            else
                seq += t.size();
        }
        return {{"backbone", backbone}, {"sequence", seq}, {"classifier", cls}};
    }

    /// Validates score ordering and fixes the list length to num_boxes:
    /// excess boxes are dropped from the low-confidence end, shortfall is
    /// padded by repeating the lowest-confidence box.
    std::vector<Box> arrange_boxes(const std::vector<Box>& boxes) const {
        if (boxes.empty())
            throw ContractError("model: variant '" + std::string(variant_name(cfg.kind)) +
                                "' needs at least one box");
        for (std::size_t i = 1; i < boxes.size(); ++i)
            if (boxes[i].score > boxes[i - 1].score)
                throw ContractError("model: boxes not sorted non-increasing by score (index " +
                                    std::to_string(i) + ")");
        const std::size_t t = static_cast<std::size_t>(cfg.num_boxes);
        std::vector<Box> out(boxes.begin(),
                             boxes.begin() + static_cast<long>(std::min(boxes.size(), t)));
        while (out.size() < t) out.push_back(out.back());
        return out;
    }

    /// Per-box pooled feature, flattened to a vector of length
    /// out_channels * pooled * pooled.
    Tensor<T> roi_vector(const Tensor<T>& fm, const Box& box, TapeOf<T>* tape) const {
        RoiSpec spec;
        spec.box = box;
        spec.pooled_h = cfg.pooled;
        spec.pooled_w = cfg.pooled;
        spec.spatial_scale = cfg.backbone.spatial_scale();
        return flatten(roi_pool(fm, spec, tape), tape);
    }

    Tensor<T> forward(const Tensor<T>& image, const std::vector<Box>& boxes, TapeOf<T>* tape,
                      ForwardTrace<T>* trace = nullptr) const {
        Tensor<T> fm = backbone_forward(image, cfg.backbone, bb, tape);
        if (trace) trace->feature_map = fm;

        Tensor<T> assembled;
        if (cfg.kind == Variant::PlainCnn) {
            assembled = global_avg_pool(fm, tape);
        } else {
            const std::vector<Box> arranged = arrange_boxes(boxes);
            std::vector<Tensor<T>> xs;
            xs.reserve(arranged.size());
            for (const Box& b : arranged) xs.push_back(roi_vector(fm, b, tape));
            if (trace) trace->roi_features = xs;
            assembled = assemble_box_features(xs, tape, trace);
        }
        if (trace) trace->assembled = assembled;

        Tensor<T> hidden = activate(dense(head_w, head_b, assembled, tape), Act::Relu, tape);
        Tensor<T> logits = dense(out_w, out_b, hidden, tape);
        if (trace) trace->logits = logits;
        return logits;
    }

    /// Batched forward: per-sample backbone and RoI extraction, then the
    /// sequence head and classifier run on [D x B] column batches so the
    /// big matrix products amortize weight traffic across the batch.
    Tensor<T> forward_batch(const std::vector<Tensor<T>>& images,
                            const std::vector<std::vector<Box>>& boxes, TapeOf<T>* tape) const {
        const std::size_t n = images.size();
        if (n == 0) throw ContractError("model: empty batch");
        if (uses_boxes() && boxes.size() != n)
            throw ContractError("model: " + std::to_string(boxes.size()) + " box lists for " +
                                std::to_string(n) + " images");

        Tensor<T> assembled;
        if (cfg.kind == Variant::PlainCnn) {
            std::vector<Tensor<T>> cols;
            cols.reserve(n);
            for (const auto& img : images)
                cols.push_back(
                    global_avg_pool(backbone_forward(img, cfg.backbone, bb, tape), tape));
            assembled = hstack(cols, tape);
        } else {
            const int t_steps = cfg.num_boxes;
            std::vector<std::vector<Tensor<T>>> per_step(static_cast<std::size_t>(t_steps));
            for (auto& v : per_step) v.reserve(n);
            for (std::size_t s = 0; s < n; ++s) {
                Tensor<T> fm = backbone_forward(images[s], cfg.backbone, bb, tape);
                const std::vector<Box> arranged = arrange_boxes(boxes[s]);
                for (int t = 0; t < t_steps; ++t)
                    per_step[static_cast<std::size_t>(t)].push_back(
                        roi_vector(fm, arranged[static_cast<std::size_t>(t)], tape));
            }
            std::vector<Tensor<T>> xs;
            xs.reserve(per_step.size());
            for (auto& cols : per_step) xs.push_back(hstack(cols, tape));
            assembled = assemble_box_features(xs, tape, nullptr);
        }

        Tensor<T> hidden = activate(dense(head_w, head_b, assembled, tape), Act::Relu, tape);
        return dense(out_w, out_b, hidden, tape);
    }

    Tensor<T> loss(const Tensor<T>& image, const std::vector<Box>& boxes, int target,
                   TapeOf<T>* tape) const {
        return softmax_cross_entropy(forward(image, boxes, tape), target, tape);
    }

    Tensor<T> loss_batch(const std::vector<Tensor<T>>& images,
                         const std::vector<std::vector<Box>>& boxes,
                         const std::vector<int>& targets, TapeOf<T>* tape) const {
        return softmax_cross_entropy(forward_batch(images, boxes, tape), targets, tape);
    }

    int predict(const Tensor<T>& image, const std::vector<Box>& boxes) const {
        Tensor<T> logits = forward(image, boxes, nullptr);
        int best = 0;
        for (int i = 1; i < logits.dim(0); ++i)
            if (logits(i) > logits(best)) best = i;
        return best;
    }

    std::vector<int> predict_batch(const std::vector<Tensor<T>>& images,
                                   const std::vector<std::vector<Box>>& boxes) const {
        Tensor<T> logits = forward_batch(images, boxes, nullptr);
        const int k = logits.dim(0);
        const int b = logits.dim(1);
        std::vector<int> out(static_cast<std::size_t>(b));
        for (int j = 0; j < b; ++j) {
            int best = 0;
            for (int i = 1; i < k; ++i)
                if (logits(i, j) > logits(best, j)) best = i;
            out[static_cast<std::size_t>(j)] = best;
        }
        return out;
    }

private:
    /// Shared tail of the proposal-consuming kinds: per-box features in,
    /// assembled classifier input out. Works on [D] vectors and [D x B]
    /// batches alike.
    Tensor<T> assemble_box_features(const std::vector<Tensor<T>>& xs, TapeOf<T>* tape,
                                    ForwardTrace<T>* trace) const {
        if (uses_lstm()) {
            std::vector<Tensor<T>> hs = lstm_sequence(xs, l1, l2, tape);
            if (trace) trace->lstm_outputs = hs;
            return assemble_sequence_feature(
                hs, cfg.kind == Variant::LastStep ? SeqMode::LastStep : SeqMode::ConcatAll, tape);
        }
        std::vector<Tensor<T>> hs;
        hs.reserve(xs.size());
        for (const auto& x : xs) {
            Tensor<T> h1 = activate(dense(mlp_w1, mlp_b1, x, tape), Act::Relu, tape);
            hs.push_back(activate(dense(mlp_w2, mlp_b2, h1, tape), Act::Relu, tape));
        }
        return concat(hs, tape);
    }
};

}  // namespace ccnn

// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "ccnn/dataset.hpp"
#include "ccnn/model.hpp"

namespace ccnn {

/// Copy of the image with all pixels inside the box set to 0 across every
/// channel. Out-of-bounds boxes are clamped; `clamped` reports when that
/// happened so callers can surface a warning.
inline Tensor<float> obscure(const Tensor<float>& image, const Box& box,
                             bool* clamped = nullptr) {
    if (image.rank() != 3)
        throw DimensionError("obscure: image must be [C x H x W], got " +
                             shape_str(image.shape()));
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    const int x0 = static_cast<int>(std::floor(box.x0));
    const int y0 = static_cast<int>(std::floor(box.y0));
    const int x1 = static_cast<int>(std::ceil(box.x1));
    const int y1 = static_cast<int>(std::ceil(box.y1));
    if (clamped) *clamped = x0 < 0 || y0 < 0 || x1 > w || y1 > h;
    const int cx0 = std::clamp(x0, 0, w), cx1 = std::clamp(x1, 0, w);
    const int cy0 = std::clamp(y0, 0, h), cy1 = std::clamp(y1, 0, h);

    Tensor<float> out = image.clone();
    float* v = out.data();
    for (int ch = 0; ch < c; ++ch)
        for (int y = cy0; y < cy1; ++y)
            for (int x = cx0; x < cx1; ++x)
                v[(static_cast<std::size_t>(ch) * h + y) * w + x] = 0.0f;
    return out;
}

/// Drop in the correct class's softmax score when the timestep-t box is
/// blacked out. The box list is frozen: the same boxes are fed for the
/// full and the obscured image, so the measure isolates content loss from
/// proposal drift.
inline double significance(const Model<float>& model, const Tensor<float>& image,
                           const std::vector<Box>& boxes, int t, int correct_class) {
    const std::vector<Box> arranged = model.arrange_boxes(boxes);
    if (t < 0 || t >= static_cast<int>(arranged.size()))
        throw ContractError("significance: timestep " + std::to_string(t) + " outside [0, " +
                            std::to_string(arranged.size()) + ")");
    Tensor<float> full_logits = model.forward(image, arranged, nullptr);
    Tensor<float> obs_logits =
        model.forward(obscure(image, arranged[static_cast<std::size_t>(t)]), arranged, nullptr);
    const auto p_full = softmax_values(full_logits.data(), full_logits.dim(0));
    const auto p_obs = softmax_values(obs_logits.data(), obs_logits.dim(0));
    return static_cast<double>(p_full[static_cast<std::size_t>(correct_class)]) -
           static_cast<double>(p_obs[static_cast<std::size_t>(correct_class)]);
}

struct ObscurationReport {
    struct Row {
        int sample_id;
        int t;
        double significance;
    };
    std::vector<Row> rows;                    // per (sample, timestep)
    std::vector<std::vector<double>> heatmap;  // num_classes x T mean significance
    std::vector<double> curve;                 // accuracy with timestep t obscured
    double baseline_accuracy = 0;
};

namespace detail {

/// Batched softmax probabilities, one column per sample.
inline std::vector<std::vector<double>> batch_probs(const Model<float>& model,
                                                    const std::vector<Tensor<float>>& images,
                                                    const std::vector<std::vector<Box>>& boxes,
                                                    int chunk = 32) {
    std::vector<std::vector<double>> out;
    out.reserve(images.size());
    for (std::size_t start = 0; start < images.size(); start += static_cast<std::size_t>(chunk)) {
        const std::size_t end = std::min(images.size(), start + static_cast<std::size_t>(chunk));
        std::vector<Tensor<float>> imgs(images.begin() + static_cast<long>(start),
                                        images.begin() + static_cast<long>(end));
        std::vector<std::vector<Box>> bxs;
        if (!boxes.empty())
            bxs.assign(boxes.begin() + static_cast<long>(start),
                       boxes.begin() + static_cast<long>(end));
        Tensor<float> logits = model.forward_batch(imgs, bxs, nullptr);
        const int k = logits.dim(0);
        for (std::size_t j = 0; j < end - start; ++j) {
            std::vector<float> col(static_cast<std::size_t>(k));
            for (int i = 0; i < k; ++i) col[static_cast<std::size_t>(i)] =
                logits(i, static_cast<int>(j));
            const auto p = softmax_values(col.data(), k);
            out.emplace_back(p.begin(), p.end());
        }
    }
    return out;
}

inline int argmax(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace detail

/// Runs the occlusion experiment: per timestep t, every sample is re-scored
/// with its t-th box blacked out. Produces the per-sample significance rows,
/// the class x timestep mean-significance heatmap, and the accuracy curve.
inline ObscurationReport timestep_degradation(const Model<float>& model,
                                              const std::vector<SceneSample>& samples,
                                              const std::vector<std::vector<Box>>& proposals) {
    if (samples.size() != proposals.size())
        throw ContractError("timestep_degradation: " + std::to_string(proposals.size()) +
                            " proposal lists for " + std::to_string(samples.size()) + " samples");
    const int t_steps = model.cfg.num_boxes;
    const int k = model.cfg.num_classes;
    const std::size_t n = samples.size();

    std::vector<Tensor<float>> images;
    std::vector<std::vector<Box>> arranged;
    images.reserve(n);
    arranged.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        images.push_back(samples[i].image);
        arranged.push_back(model.arrange_boxes(proposals[i]));
    }

    ObscurationReport report;
    report.heatmap.assign(static_cast<std::size_t>(k),
                          std::vector<double>(static_cast<std::size_t>(t_steps), 0.0));
    report.curve.assign(static_cast<std::size_t>(t_steps), 0.0);
    std::vector<long> class_count(static_cast<std::size_t>(k), 0);
    for (const auto& s : samples) ++class_count[static_cast<std::size_t>(s.class_id)];

    const auto base_probs = detail::batch_probs(model, images, arranged);
    long correct = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (detail::argmax(base_probs[i]) == samples[i].class_id) ++correct;
    report.baseline_accuracy = static_cast<double>(correct) / static_cast<double>(n);

    for (int t = 0; t < t_steps; ++t) {
        std::vector<Tensor<float>> occluded;
        occluded.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            occluded.push_back(obscure(images[i], arranged[i][static_cast<std::size_t>(t)]));
        const auto probs = detail::batch_probs(model, occluded, arranged);
        long hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const int cls = samples[i].class_id;
            if (detail::argmax(probs[i]) == cls) ++hits;
            const double sig = base_probs[i][static_cast<std::size_t>(cls)] -
                               probs[i][static_cast<std::size_t>(cls)];
            report.rows.push_back({static_cast<int>(i), t, sig});
            report.heatmap[static_cast<std::size_t>(cls)][static_cast<std::size_t>(t)] += sig;
        }
        report.curve[static_cast<std::size_t>(t)] =
            static_cast<double>(hits) / static_cast<double>(n);
    }
    for (int c = 0; c < k; ++c)
        if (class_count[static_cast<std::size_t>(c)] > 0)
            for (double& v : report.heatmap[static_cast<std::size_t>(c)])
                v /= static_cast<double>(class_count[static_cast<std::size_t>(c)]);
    return report;
}

enum class FeatureStage { RoiCnn, LstmT };

/// Feature rows for embedding tools: class_id, sample_id, box_index, then
/// the feature values. RoiCnn emits one row per (sample, box) with the
/// flattened pooled CNN vector; LstmT emits one row per sample holding the
/// layer-2 LSTM output at the given timestep (box_index column = t).
inline std::vector<std::vector<double>> export_features(const Model<float>& model,
                                                        const std::vector<SceneSample>& samples,
                                                        const std::vector<std::vector<Box>>& proposals,
                                                        FeatureStage stage, int t = -1) {
    if (stage == FeatureStage::LstmT) {
        if (t < 0)
            throw ContractError("export_features: lstm stage needs a timestep");
        if (t >= model.cfg.num_boxes)
            throw ContractError("export_features: timestep " + std::to_string(t) +
                                " outside [0, " + std::to_string(model.cfg.num_boxes) + ")");
        if (!model.uses_lstm())
            throw ContractError("export_features: lstm stage on a variant without LSTM layers");
    }
    if (samples.size() != proposals.size())
        throw ContractError("export_features: proposal/sample count mismatch");

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ForwardTrace<float> trace;
        model.forward(samples[i].image, proposals[i], nullptr, &trace);
        if (stage == FeatureStage::RoiCnn) {
            for (std::size_t b = 0; b < trace.roi_features.size(); ++b) {
                const Tensor<float>& f = trace.roi_features[b];
                std::vector<double> row = {static_cast<double>(samples[i].class_id),
                                           static_cast<double>(i), static_cast<double>(b)};
                for (long j = 0; j < f.size(); ++j) row.push_back(f.data()[j]);
                rows.push_back(std::move(row));
            }
        } else {
            const Tensor<float>& h = trace.lstm_outputs[static_cast<std::size_t>(t)];
            std::vector<double> row = {static_cast<double>(samples[i].class_id),
                                       static_cast<double>(i), static_cast<double>(t)};
            for (long j = 0; j < h.size(); ++j) row.push_back(h.data()[j]);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

/// Spearman rank correlation with average ranks on ties. Returns 0 when
/// either input is constant.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ContractError("spearman: need two equal-length series of >= 2 points");
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0;
    return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// report serialization
// ---------------------------------------------------------------------------

inline void write_csv_rows(const std::string& path,
                           const std::vector<std::vector<double>>& rows,
                           const std::string& header = "") {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    if (!header.empty()) f << header << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) f << ",";
            f << detail::format_g(row[i]);
        }
        f << "\n";
    }
    if (!f) throw IoError("write failed for '" + path + "'");
}

/// Emits report.csv, heatmap.csv, curve.csv and a row-normalized grayscale
/// rendering of the heatmap.
inline void write_obscuration_outputs(const ObscurationReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::vector<std::vector<double>> rows;
    rows.reserve(report.rows.size());
    for (const auto& r : report.rows)
        rows.push_back({static_cast<double>(r.sample_id), static_cast<double>(r.t),
                        r.significance});
    write_csv_rows((fs::path(dir) / "report.csv").string(), rows, "sample_id,t,significance");

    write_csv_rows((fs::path(dir) / "heatmap.csv").string(), report.heatmap);

    std::vector<std::vector<double>> curve;
    for (std::size_t t = 0; t < report.curve.size(); ++t)
        curve.push_back({static_cast<double>(t), report.curve[t]});
    write_csv_rows((fs::path(dir) / "curve.csv").string(), curve, "t,accuracy");

    const int k = static_cast<int>(report.heatmap.size());
    const int t_steps = k > 0 ? static_cast<int>(report.heatmap[0].size()) : 0;
    if (k > 0 && t_steps > 0) {
        Tensor<float> img = Tensor<float>::zeros({1, k, t_steps});
        for (int c = 0; c < k; ++c) {
            const auto& row = report.heatmap[static_cast<std::size_t>(c)];
            const double lo = *std::min_element(row.begin(), row.end());
            const double hi = *std::max_element(row.begin(), row.end());
            for (int t = 0; t < t_steps; ++t)
                img(0, c, t) = hi > lo
                                   ? static_cast<float>((row[static_cast<std::size_t>(t)] - lo) /
                                                        (hi - lo))
                                   : 0.0f;
        }
        write_pnm((fs::path(dir) / "heatmap.pgm").string(), img);
    }
}

}  // namespace ccnn

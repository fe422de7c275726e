// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Occlusion analysis, feature export, and the rank-correlation helper.

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ccnn/analysis.hpp"
#include "ccnn/image_io.hpp"
#include "ccnn/model.hpp"
#include "ccnn/ops.hpp"
#include "ccnn/rng.hpp"
#include "ccnn/scene.hpp"

using namespace ccnn;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_cfg(Variant kind) {
    ModelConfig cfg;
    cfg.kind = kind;
    cfg.backbone.input_size = 16;
    cfg.backbone.blocks = {{8, 3, 2, 1}, {8, 3, 1, 1}};
    cfg.num_boxes = 3;
    cfg.pooled = 2;
    cfg.hidden1 = 16;
    cfg.hidden2 = 12;
    cfg.dense_width = 24;
    cfg.num_classes = 4;
    return cfg;
}

Tensor<float> random_image(int size, uint64_t seed) {
    Rng r(seed);
    auto img = Tensor<float>::zeros({1, size, size});
    for (long i = 0; i < img.size(); ++i)
        img.data()[i] = static_cast<float>(r.uniform());
    return img;
}

std::vector<Box> sorted_boxes(int size) {
    const double s = size;
    return {Box(0, 0, s * 0.6, s * 0.6, 0.9), Box(s * 0.3, s * 0.3, s, s, 0.5),
            Box(0, s * 0.4, s * 0.5, s, 0.2)};
}

/// Samples with made-up images and boxes, labels cycling through classes.
std::vector<SceneSample> fake_samples(int n, int size, uint64_t seed) {
    std::vector<SceneSample> out;
    for (int i = 0; i < n; ++i) {
        SceneSample s;
        s.image = random_image(size, seed + static_cast<uint64_t>(i));
        s.class_id = i % 4;
        s.gt_boxes = sorted_boxes(size);
        out.push_back(std::move(s));
    }
    return out;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("ccnn_ana_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

TEST(Obscure, ZeroesExactlyTheBoxAcrossChannels) {
    auto img = Tensor<float>::zeros({2, 8, 8});
    for (long i = 0; i < img.size(); ++i) img.data()[i] = 1.0f;
    bool clamped = true;
    auto out = obscure(img, Box(2, 3, 5, 6, 0), &clamped);
    EXPECT_FALSE(clamped);
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                const bool inside = x >= 2 && x < 5 && y >= 3 && y < 6;
                EXPECT_EQ(out(c, y, x), inside ? 0.0f : 1.0f) << c << y << x;
            }
    // The input is untouched.
    EXPECT_EQ(img(0, 4, 3), 1.0f);
}

TEST(Obscure, FractionalBoxCoversEveryTouchedPixel) {
    auto img = Tensor<float>::zeros({1, 4, 4});
    for (long i = 0; i < img.size(); ++i) img.data()[i] = 1.0f;
    auto out = obscure(img, Box(1.2, 1.2, 2.5, 2.5, 0));
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const bool inside = x >= 1 && x <= 2 && y >= 1 && y <= 2;
            EXPECT_EQ(out(0, y, x), inside ? 0.0f : 1.0f);
        }
}

TEST(Obscure, OutOfRangeBoxesAreClampedAndFlagged) {
    auto img = Tensor<float>::zeros({1, 6, 6});
    for (long i = 0; i < img.size(); ++i) img.data()[i] = 1.0f;
    bool clamped = false;
    auto out = obscure(img, Box(-5, -5, 3, 3, 0), &clamped);
    EXPECT_TRUE(clamped);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            EXPECT_EQ(out(0, y, x), (x < 3 && y < 3) ? 0.0f : 1.0f);

    auto all = obscure(img, Box(-1, -1, 99, 99, 0), &clamped);
    EXPECT_TRUE(clamped);
    for (long i = 0; i < all.size(); ++i) EXPECT_EQ(all.data()[i], 0.0f);
}

TEST(Obscure, IdempotentAndRankChecked) {
    auto img = random_image(8, 3);
    const Box b(1, 1, 5, 5, 0);
    auto once = obscure(img, b);
    auto twice = obscure(once, b);
    for (long i = 0; i < once.size(); ++i) EXPECT_EQ(once.data()[i], twice.data()[i]);
    EXPECT_THROW(obscure(Tensor<float>::zeros({8, 8}), b), DimensionError);
}

TEST(Significance, MatchesDirectRecomputation) {
    auto model = Model<float>::init(tiny_cfg(Variant::Base), 11);
    auto img = random_image(16, 4);
    auto boxes = sorted_boxes(16);
    const int cls = 2;

    for (int t = 0; t < 3; ++t) {
        const double got = significance(model, img, boxes, t, cls);

        auto arranged = model.arrange_boxes(boxes);
        auto full = model.forward(img, arranged, nullptr);
        auto obs = model.forward(obscure(img, arranged[static_cast<std::size_t>(t)]), arranged,
                                 nullptr);
        const auto pf = softmax_values(full.data(), full.dim(0));
        const auto po = softmax_values(obs.data(), obs.dim(0));
        EXPECT_DOUBLE_EQ(got, static_cast<double>(pf[cls]) - static_cast<double>(po[cls])) << t;
    }
}

TEST(Significance, TimestepOutsideSequenceThrows) {
    auto model = Model<float>::init(tiny_cfg(Variant::Base), 11);
    auto img = random_image(16, 4);
    auto boxes = sorted_boxes(16);
    EXPECT_THROW(significance(model, img, boxes, -1, 0), ContractError);
    EXPECT_THROW(significance(model, img, boxes, 3, 0), ContractError);
}

TEST(Degradation, ReportShapesAndRowConsistency) {
    auto model = Model<float>::init(tiny_cfg(Variant::Base), 5);
    auto samples = fake_samples(8, 16, 100);
    std::vector<std::vector<Box>> props;
    for (const auto& s : samples) props.push_back(s.gt_boxes);

    auto report = timestep_degradation(model, samples, props);
    const int t_steps = 3, k = 4;
    ASSERT_EQ(report.rows.size(), samples.size() * static_cast<std::size_t>(t_steps));
    ASSERT_EQ(report.heatmap.size(), static_cast<std::size_t>(k));
    for (const auto& row : report.heatmap) ASSERT_EQ(row.size(), static_cast<std::size_t>(t_steps));
    ASSERT_EQ(report.curve.size(), static_cast<std::size_t>(t_steps));
    EXPECT_GE(report.baseline_accuracy, 0.0);
    EXPECT_LE(report.baseline_accuracy, 1.0);
    for (double a : report.curve) {
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
    }

    // The heatmap is exactly the per-class mean of the significance rows.
    for (int c = 0; c < k; ++c)
        for (int t = 0; t < t_steps; ++t) {
            double sum = 0;
            long cnt = 0;
            for (const auto& r : report.rows)
                if (samples[static_cast<std::size_t>(r.sample_id)].class_id == c && r.t == t) {
                    sum += r.significance;
                    ++cnt;
                }
            ASSERT_GT(cnt, 0);
            EXPECT_NEAR(report.heatmap[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)],
                        sum / static_cast<double>(cnt), 1e-12);
        }

    // Row significances match the scalar helper on the same frozen boxes.
    const auto& r0 = report.rows[0];
    EXPECT_NEAR(r0.significance,
                significance(model, samples[0].image, props[0], r0.t, samples[0].class_id),
                1e-6);
}

TEST(Degradation, CountMismatchThrows) {
    auto model = Model<float>::init(tiny_cfg(Variant::Base), 5);
    auto samples = fake_samples(3, 16, 7);
    std::vector<std::vector<Box>> props = {samples[0].gt_boxes};
    EXPECT_THROW(timestep_degradation(model, samples, props), ContractError);
}

TEST(ExportFeatures, RoiStageEmitsOneRowPerBox) {
    auto cfg = tiny_cfg(Variant::Base);
    auto model = Model<float>::init(cfg, 21);
    auto samples = fake_samples(4, 16, 50);
    std::vector<std::vector<Box>> props;
    for (const auto& s : samples) props.push_back(s.gt_boxes);

    auto rows = export_features(model, samples, props, FeatureStage::RoiCnn);
    ASSERT_EQ(rows.size(), samples.size() * static_cast<std::size_t>(cfg.num_boxes));
    const std::size_t width = 3 + static_cast<std::size_t>(cfg.roi_feature_len());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ASSERT_EQ(rows[i].size(), width);
        const auto sample = i / static_cast<std::size_t>(cfg.num_boxes);
        const auto box = i % static_cast<std::size_t>(cfg.num_boxes);
        EXPECT_EQ(rows[i][0], static_cast<double>(samples[sample].class_id));
        EXPECT_EQ(rows[i][1], static_cast<double>(sample));
        EXPECT_EQ(rows[i][2], static_cast<double>(box));
    }
}

TEST(ExportFeatures, LstmStageEmitsOneRowPerSample) {
    auto cfg = tiny_cfg(Variant::Base);
    auto model = Model<float>::init(cfg, 21);
    auto samples = fake_samples(4, 16, 60);
    std::vector<std::vector<Box>> props;
    for (const auto& s : samples) props.push_back(s.gt_boxes);

    auto rows = export_features(model, samples, props, FeatureStage::LstmT, 1);
    ASSERT_EQ(rows.size(), samples.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ASSERT_EQ(rows[i].size(), 3 + static_cast<std::size_t>(cfg.hidden2));
        EXPECT_EQ(rows[i][1], static_cast<double>(i));
        EXPECT_EQ(rows[i][2], 1.0);  // box_index column carries the timestep
    }

    // Different timesteps give different features.
    auto rows0 = export_features(model, samples, props, FeatureStage::LstmT, 0);
    bool differ = false;
    for (std::size_t j = 3; j < rows[0].size() && !differ; ++j)
        differ = rows[0][j] != rows0[0][j];
    EXPECT_TRUE(differ);
}

TEST(ExportFeatures, ContractViolationsThrow) {
    auto samples = fake_samples(2, 16, 70);
    std::vector<std::vector<Box>> props;
    for (const auto& s : samples) props.push_back(s.gt_boxes);

    auto base = Model<float>::init(tiny_cfg(Variant::Base), 1);
    EXPECT_THROW(export_features(base, samples, props, FeatureStage::LstmT), ContractError);
    EXPECT_THROW(export_features(base, samples, props, FeatureStage::LstmT, 3), ContractError);
    EXPECT_THROW(export_features(base, samples, {props[0]}, FeatureStage::RoiCnn),
                 ContractError);

    auto plain = Model<float>::init(tiny_cfg(Variant::PlainCnn), 1);
    EXPECT_THROW(export_features(plain, samples, props, FeatureStage::LstmT, 0), ContractError);
}

TEST(CsvRows, RewritesAreByteIdentical) {
    const fs::path dir = scratch("csv");
    std::vector<std::vector<double>> rows = {{1, 2.5, -0.333333333333}, {4, 5, 6.000001}};
    write_csv_rows((dir / "a.csv").string(), rows, "x,y,z");
    write_csv_rows((dir / "b.csv").string(), rows, "x,y,z");
    const std::string a = slurp(dir / "a.csv");
    EXPECT_EQ(a, slurp(dir / "b.csv"));
    EXPECT_EQ(a.substr(0, 6), "x,y,z\n");
}

TEST(ObscurationOutputs, WritesAllArtifacts) {
    const fs::path dir = scratch("obsc");
    ObscurationReport report;
    report.baseline_accuracy = 0.75;
    report.rows = {{0, 0, 0.5}, {0, 1, 0.25}, {1, 0, 0.1}, {1, 1, 0.0}};
    report.heatmap = {{0.5, 0.25}, {0.1, 0.0}, {0.3, 0.3}};
    report.curve = {0.5, 0.7};
    write_obscuration_outputs(report, dir.string());

    const std::string rep = slurp(dir / "report.csv");
    EXPECT_EQ(rep.substr(0, rep.find('\n')), "sample_id,t,significance");
    EXPECT_EQ(std::count(rep.begin(), rep.end(), '\n'), 5);  // header + 4 rows

    const std::string curve = slurp(dir / "curve.csv");
    EXPECT_NE(curve.find("0,0.5"), std::string::npos);
    EXPECT_NE(curve.find("1,0.7"), std::string::npos);

    auto heat = read_pnm((dir / "heatmap.pgm").string());
    ASSERT_EQ(heat.rank(), 3);
    EXPECT_EQ(heat.dim(1), 3);  // classes
    EXPECT_EQ(heat.dim(2), 2);  // timesteps
    // Row-normalized: each varying row spans {0, 1}; the constant row is 0.
    EXPECT_EQ(heat(0, 0, 0), 1.0f);
    EXPECT_EQ(heat(0, 0, 1), 0.0f);
    EXPECT_EQ(heat(0, 2, 0), 0.0f);
    EXPECT_EQ(heat(0, 2, 1), 0.0f);
}

TEST(Spearman, KnownCorrelations) {
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0);
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {9, 7, 5, 3}), -1.0);
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {5, 5, 5, 5}), 0.0);
    // Monotone under any strictly increasing transform.
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4, 5}, {1, 8, 27, 64, 125}), 1.0);
}

TEST(Spearman, TiesUseAverageRanks) {
    // y ranks with ties: (1.5, 1.5, 3.5, 3.5) -> r = 4 / sqrt(5 * 4).
    EXPECT_NEAR(spearman({1, 2, 3, 4}, {7, 7, 9, 9}), 4.0 / std::sqrt(20.0), 1e-12);
}

TEST(Spearman, RejectsBadSeries) {
    EXPECT_THROW(spearman({1, 2}, {1}), ContractError);
    EXPECT_THROW(spearman({1}, {1}), ContractError);
    EXPECT_THROW(spearman({}, {}), ContractError);
}

}  // namespace

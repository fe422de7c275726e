// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0
//
// The four model variants: shape walks, box-handling contracts, parameter
// accounting, initialization statistics, and a capacity smoke test.

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ccnn/model.hpp"
#include "ccnn/optim.hpp"
#include "ccnn/rng.hpp"

using namespace ccnn;

namespace {

ModelConfig tiny_cfg(Variant kind) {
    ModelConfig cfg;
    cfg.kind = kind;
    cfg.backbone.input_size = 16;
    cfg.backbone.blocks = {{8, 3, 2, 1}, {8, 3, 1, 1}};  // 16 -> 8, scale 1/2
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

/// Closed-form parameter total, written independently of named_params().
long expected_count(const ModelConfig& cfg) {
    long n = 0;
    int c_in = cfg.backbone.in_channels;
    for (const auto& b : cfg.backbone.blocks) {
        n += static_cast<long>(b.out_channels) * c_in * b.kernel * b.kernel + b.out_channels;
        c_in = b.out_channels;
    }
    auto lstm = [](long d, long h) { return 4 * (h * d + h * h + h); };
    const long d = cfg.roi_feature_len();
    if (cfg.kind == Variant::Base || cfg.kind == Variant::LastStep)
        n += lstm(d, cfg.hidden1) + lstm(cfg.hidden1, cfg.hidden2);
    else if (cfg.kind == Variant::DenseReplace)
        n += cfg.hidden1 * d + cfg.hidden1 + static_cast<long>(cfg.hidden2) * cfg.hidden1 +
             cfg.hidden2;
    n += static_cast<long>(cfg.dense_width) * cfg.assembled_len() + cfg.dense_width;
    n += static_cast<long>(cfg.num_classes) * cfg.dense_width + cfg.num_classes;
    return n;
}

}  // namespace

TEST(ModelConfig, AssembledLengthsPerKind) {
    auto cfg = tiny_cfg(Variant::Base);
    EXPECT_EQ(cfg.roi_feature_len(), 8 * 2 * 2);
    EXPECT_EQ(cfg.assembled_len(), 3 * 12);
    cfg.kind = Variant::LastStep;
    EXPECT_EQ(cfg.assembled_len(), 12);
    cfg.kind = Variant::DenseReplace;
    EXPECT_EQ(cfg.assembled_len(), 3 * 12);
    cfg.kind = Variant::PlainCnn;
    EXPECT_EQ(cfg.assembled_len(), 8);
}

TEST(ModelConfig, DeskScaleDimensionWalk) {
    // Defaults: 64px input, 3 blocks, T=10, hidden2 64, K classes.
    ModelConfig cfg;
    cfg.num_classes = 10;
    EXPECT_EQ(cfg.backbone.fm_size(), 16);
    EXPECT_DOUBLE_EQ(cfg.backbone.spatial_scale(), 0.25);
    EXPECT_EQ(cfg.assembled_len(), 640);

    auto model = Model<float>::init(cfg, 1);
    auto img = random_image(64, 5);
    std::vector<Box> boxes = sorted_boxes(64);
    auto logits = model.forward(img, boxes, nullptr);
    ASSERT_EQ(logits.rank(), 1);
    EXPECT_EQ(logits.dim(0), 10);
}

TEST(Model, VariantNamesRoundTrip) {
    for (Variant v : {Variant::Base, Variant::LastStep, Variant::DenseReplace,
                      Variant::PlainCnn})
        EXPECT_EQ(variant_from_name(variant_name(v)), v);
    EXPECT_THROW(variant_from_name("vgg16"), ContractError);
}

TEST(Model, ForwardShapesAllVariants) {
    auto img = random_image(16, 2);
    auto boxes = sorted_boxes(16);
    for (Variant v : {Variant::Base, Variant::LastStep, Variant::DenseReplace,
                      Variant::PlainCnn}) {
        auto model = Model<float>::init(tiny_cfg(v), 3);
        auto logits = model.forward(img, boxes, nullptr);
        ASSERT_EQ(logits.rank(), 1) << variant_name(v);
        EXPECT_EQ(logits.dim(0), 4) << variant_name(v);
    }
}

TEST(Model, BatchedForwardMatchesSingle) {
    for (Variant v : {Variant::Base, Variant::DenseReplace, Variant::PlainCnn}) {
        auto model = Model<float>::init(tiny_cfg(v), 4);
        std::vector<Tensor<float>> imgs{random_image(16, 10), random_image(16, 11)};
        std::vector<std::vector<Box>> boxes{sorted_boxes(16), sorted_boxes(16)};
        auto batched = model.forward_batch(imgs, boxes, nullptr);
        ASSERT_EQ(batched.rank(), 2);
        EXPECT_EQ(batched.dim(0), 4);
        EXPECT_EQ(batched.dim(1), 2);
        for (int s = 0; s < 2; ++s) {
            auto single = model.forward(imgs[static_cast<std::size_t>(s)],
                                        boxes[static_cast<std::size_t>(s)], nullptr);
            for (int i = 0; i < 4; ++i)
                EXPECT_NEAR(batched(i, s), single(i), 2e-5) << variant_name(v);
        }
    }
}

TEST(Model, PlainCnnIgnoresBoxes) {
    auto model = Model<float>::init(tiny_cfg(Variant::PlainCnn), 5);
    auto img = random_image(16, 6);
    auto a = model.forward(img, sorted_boxes(16), nullptr);
    auto b = model.forward(img, {}, nullptr);
    auto c = model.forward(img, {Box(1, 1, 9, 9, 0.4)}, nullptr);
    for (int i = 0; i < 4; ++i) {
        EXPECT_FLOAT_EQ(a(i), b(i));
        EXPECT_FLOAT_EQ(a(i), c(i));
    }
}

TEST(Model, UnsortedBoxesRejectedLoudly) {
    auto model = Model<float>::init(tiny_cfg(Variant::Base), 7);
    auto img = random_image(16, 7);
    std::vector<Box> bad{Box(0, 0, 8, 8, 0.3), Box(2, 2, 12, 12, 0.8)};
    try {
        model.forward(img, bad, nullptr);
        FAIL() << "unsorted boxes accepted";
    } catch (const ContractError& e) {
        EXPECT_NE(std::string(e.what()).find("sorted"), std::string::npos);
    }
    EXPECT_THROW(model.forward(img, {}, nullptr), ContractError);
}

TEST(Model, ArrangePadsByRepeatingLowestConfidence) {
    auto model = Model<float>::init(tiny_cfg(Variant::Base), 8);
    std::vector<Box> two{Box(0, 0, 8, 8, 0.9), Box(4, 4, 12, 12, 0.4)};
    auto arranged = model.arrange_boxes(two);
    ASSERT_EQ(arranged.size(), 3u);
    EXPECT_DOUBLE_EQ(arranged[2].x0, 4.0);
    EXPECT_DOUBLE_EQ(arranged[2].score, 0.4);

    std::vector<Box> five;
    for (int i = 0; i < 5; ++i)
        five.push_back(Box(i, 0, i + 4, 4, 1.0 - 0.1 * i));
    auto cut = model.arrange_boxes(five);
    ASSERT_EQ(cut.size(), 3u);
    EXPECT_DOUBLE_EQ(cut[2].x0, 2.0);
}

TEST(Model, LastStepSharesTrunkWithBase) {
    // Same seed: identical backbone and LSTM weights, so the h_t sequences
    // coincide; only the classifier input width differs.
    auto base = Model<float>::init(tiny_cfg(Variant::Base), 9);
    auto last = Model<float>::init(tiny_cfg(Variant::LastStep), 9);
    auto img = random_image(16, 8);
    auto boxes = sorted_boxes(16);

    ForwardTrace<float> tb, tl;
    base.forward(img, boxes, nullptr, &tb);
    last.forward(img, boxes, nullptr, &tl);
    ASSERT_EQ(tb.lstm_outputs.size(), tl.lstm_outputs.size());
    for (std::size_t t = 0; t < tb.lstm_outputs.size(); ++t)
        for (int i = 0; i < 12; ++i)
            ASSERT_FLOAT_EQ(tb.lstm_outputs[t](i), tl.lstm_outputs[t](i));
    EXPECT_EQ(tb.assembled.size(), 36);
    EXPECT_EQ(tl.assembled.size(), 12);
}

TEST(Model, OutOfBoxPixelsOutsideReceptiveFieldDoNotMoveLogits) {
    // Two stacked 3x3 convs (stride 2 then 1) give each feature cell a
    // bounded receptive field; a far-corner pixel cannot reach the cells
    // pooled from a small top-left box, but an in-box pixel must.
    auto model = Model<float>::init(tiny_cfg(Variant::Base), 10);
    auto img = random_image(16, 9);
    std::vector<Box> boxes{Box(0, 0, 4, 4, 0.9)};

    auto before = model.forward(img, boxes, nullptr);
    auto far_touched = img.clone();
    far_touched(0, 15, 15) = 1.0f - far_touched(0, 15, 15);
    auto after_far = model.forward(far_touched, boxes, nullptr);
    for (int i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(before(i), after_far(i));

    auto in_touched = img.clone();
    in_touched(0, 1, 1) = 1.0f - in_touched(0, 1, 1);
    auto after_in = model.forward(in_touched, boxes, nullptr);
    float diff = 0;
    for (int i = 0; i < 4; ++i) diff += std::abs(before(i) - after_in(i));
    EXPECT_GT(diff, 0.0f);
}

TEST(Model, UntrainedLossIsNearLogKOnAverage) {
    ModelConfig cfg = tiny_cfg(Variant::Base);
    cfg.num_classes = 10;
    auto img = random_image(16, 12);
    auto boxes = sorted_boxes(16);
    double total = 0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        auto model = Model<float>::init(cfg, seed);
        total += model.loss(img, boxes, 3, nullptr).item();
    }
    EXPECT_NEAR(total / 100.0, std::log(10.0), 0.3);
}

TEST(Model, SameSeedSameLoss) {
    auto img = random_image(16, 13);
    auto boxes = sorted_boxes(16);
    auto a = Model<float>::init(tiny_cfg(Variant::Base), 77);
    auto b = Model<float>::init(tiny_cfg(Variant::Base), 77);
    EXPECT_EQ(a.loss(img, boxes, 1, nullptr).item(), b.loss(img, boxes, 1, nullptr).item());
}

TEST(Model, ParamCountMatchesClosedForm) {
    for (Variant v : {Variant::Base, Variant::LastStep, Variant::DenseReplace,
                      Variant::PlainCnn}) {
        auto cfg = tiny_cfg(v);
        auto model = Model<float>::init(cfg, 14);
        EXPECT_EQ(model.param_count(), expected_count(cfg)) << variant_name(v);

        long by_group = 0;
        for (const auto& [name, n] : model.param_count_by_group()) by_group += n;
        EXPECT_EQ(by_group, model.param_count()) << variant_name(v);
    }
}

TEST(Model, ContextHeadSmallerThanFlattenFcHeadAtFullScaleWidths) {
    // At full-scale widths (512-channel 7x7 RoI features, LSTM layers of
    // 1024 and 512 units, 10 timesteps), the recurrent context head carries
    // several million fewer parameters than a flatten + two-4096-dense head
    // over the same feature map, even though both share the conv trunk.
    auto lstm = [](long d, long h) { return 4 * (h * d + h * h + h); };
    const long droi = 512L * 7 * 7;
    const long k = 10;
    const long context_head = lstm(droi, 1024) + lstm(1024, 512) +
                              (10L * 512) * 1024 + 1024 +  // dense on the concat feature
                              1024 * k + k;
    const long flatten_fc_head = droi * 4096 + 4096 + 4096L * 4096 + 4096 + 4096 * k + k;
    EXPECT_LT(context_head, flatten_fc_head);
    EXPECT_GT(flatten_fc_head - context_head, 4000000);
}

TEST(Model, ConfidentCorrectLossIsTiny) {
    auto logits = Tensor<float>::from({4}, {30.0f, 0.0f, 0.0f, 0.0f});
    EXPECT_LT(softmax_cross_entropy(logits, 0, nullptr).item(), 1e-3f);
}

TEST(Model, MemorizesTenSamplesWithinBudget) {
    // Capacity smoke test: every variant drives training loss under 0.1 on
    // a 10-sample set inside 500 full-batch steps.
    std::vector<Tensor<float>> imgs;
    std::vector<std::vector<Box>> boxes;
    std::vector<int> labels;
    Rng meta(2026);
    for (int s = 0; s < 10; ++s) {
        imgs.push_back(random_image(16, 100 + static_cast<uint64_t>(s)));
        const double x0 = meta.uniform(0.0, 6.0), y0 = meta.uniform(0.0, 6.0);
        std::vector<Box> bs{Box(x0, y0, x0 + 8, y0 + 8, 0.9),
                            Box(2, 2, 14, 14, 0.5)};
        boxes.push_back(bs);
        labels.push_back(s % 4);
    }

    for (Variant v : {Variant::Base, Variant::LastStep, Variant::DenseReplace,
                      Variant::PlainCnn}) {
        auto model = Model<float>::init(tiny_cfg(v), 42);
        Sgd<float> opt(model.params(), 0.02, 0.0, 0.9);
        double last_loss = 1e9;
        for (int it = 0; it < 500 && last_loss >= 0.1; ++it) {
            Tape<float> tape;
            auto loss = model.loss_batch(imgs, boxes, labels, &tape);
            last_loss = loss.item();
            tape.backward(loss);
            opt.step();
        }
        EXPECT_LT(last_loss, 0.1) << variant_name(v);
    }
}

// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0
//
// RoI pooling: box-to-cell mapping, frozen pooled values, gradient routing,
// and exhaustive agreement with a brute-force bin-max oracle.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ccnn/gradcheck.hpp"
#include "ccnn/ops.hpp"
#include "ccnn/roi_pool.hpp"
#include "ccnn/rng.hpp"

using namespace ccnn;

TEST(BoxType, IouAndClamp) {
    Box a(0, 0, 10, 10), b(5, 5, 15, 15);
    EXPECT_NEAR(iou(a, b), 25.0 / 175.0, 1e-12);
    EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
    EXPECT_DOUBLE_EQ(iou(a, Box(20, 20, 30, 30)), 0.0);

    Box c = clamp_to_image(Box(-5, -5, 3, 3), 64, 64);
    EXPECT_DOUBLE_EQ(c.x0, 0.0);
    EXPECT_DOUBLE_EQ(c.y0, 0.0);
    EXPECT_DOUBLE_EQ(c.x1, 3.0);
    EXPECT_DOUBLE_EQ(c.y1, 3.0);

    EXPECT_THROW(require_positive_area(Box(3, 3, 3, 8), "test"), InvalidBoxError);
    EXPECT_THROW(require_positive_area(Box(5, 3, 2, 8), "test"), InvalidBoxError);
}

TEST(RoiMapping, FullImageBoxCoversWholeMap) {
    // 512x512 image, 32x32 map (scale 1/16): full box hits every cell.
    const CellRect r = map_box_to_feature(Box(0, 0, 512, 512), 1.0 / 16.0, 32, 32);
    EXPECT_EQ(r.x0, 0);
    EXPECT_EQ(r.y0, 0);
    EXPECT_EQ(r.x1, 31);
    EXPECT_EQ(r.y1, 31);
}

TEST(RoiMapping, SmallBoxLandsInSingleCell) {
    // An 8px box at scale 1/16 projects into cell (0,0) alone.
    const CellRect r = map_box_to_feature(Box(0, 0, 8, 8), 1.0 / 16.0, 32, 32);
    EXPECT_EQ(r.x0, 0);
    EXPECT_EQ(r.y0, 0);
    EXPECT_EQ(r.x1, 0);
    EXPECT_EQ(r.y1, 0);
}

TEST(RoiMapping, OutOfRangeBoxClampsIntoMap) {
    const CellRect r = map_box_to_feature(Box(-10, -10, 1000, 1000), 1.0 / 16.0, 32, 32);
    EXPECT_EQ(r.x0, 0);
    EXPECT_EQ(r.x1, 31);
    EXPECT_EQ(r.y1, 31);
}

TEST(RoiPool, FourByFourQuadrantMaxes) {
    // Map 1..16 row-major, full box, 2x2 pooling: quadrant maxes 6 8 / 14 16.
    auto fm = Tensor<double>::from({1, 4, 4},
                                   {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16});
    RoiSpec spec{Box(0, 0, 4, 4), 2, 2, 1.0};
    auto out = roi_pool(fm, spec, nullptr);
    EXPECT_DOUBLE_EQ(out(0, 0, 0), 6.0);
    EXPECT_DOUBLE_EQ(out(0, 0, 1), 8.0);
    EXPECT_DOUBLE_EQ(out(0, 1, 0), 14.0);
    EXPECT_DOUBLE_EQ(out(0, 1, 1), 16.0);
}

TEST(RoiPool, MatchingPooledSizeIsIdentity) {
    auto fm = Tensor<double>::from({1, 3, 3}, {9, 2, 7, 4, 5, 6, 1, 8, 3});
    RoiSpec spec{Box(0, 0, 3, 3), 3, 3, 1.0};
    auto out = roi_pool(fm, spec, nullptr);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) EXPECT_DOUBLE_EQ(out(0, y, x), fm(0, y, x));
}

TEST(RoiPool, OneByOneIsWindowMax) {
    auto fm = Tensor<double>::from({1, 3, 3}, {9, 2, 7, 4, 5, 6, 1, 8, 3});
    RoiSpec spec{Box(0, 0, 3, 3), 1, 1, 1.0};
    EXPECT_DOUBLE_EQ(roi_pool(fm, spec, nullptr)(0, 0, 0), 9.0);

    RoiSpec lower{Box(0, 1, 3, 3), 1, 1, 1.0};  // rows 1..2 only
    EXPECT_DOUBLE_EQ(roi_pool(fm, lower, nullptr)(0, 0, 0), 8.0);
}

TEST(RoiPool, DegenerateProjectionWidensToOneCell) {
    auto fm = Tensor<double>::from({1, 2, 2}, {1, 2, 3, 4});
    // 1px box at scale 1/16 collapses; it must still pool a 1-cell window.
    RoiSpec spec{Box(0.2, 0.2, 0.9, 0.9), 1, 1, 1.0 / 16.0};
    EXPECT_DOUBLE_EQ(roi_pool(fm, spec, nullptr)(0, 0, 0), 1.0);
}

TEST(RoiPool, RejectsEmptyBoxAndBadPooledSize) {
    auto fm = Tensor<double>::zeros({1, 4, 4});
    EXPECT_THROW(roi_pool(fm, RoiSpec{Box(2, 2, 2, 4), 2, 2, 1.0}, nullptr), InvalidBoxError);
    EXPECT_THROW(roi_pool(fm, RoiSpec{Box(0, 0, 4, 4), 0, 2, 1.0}, nullptr), ContractError);
}

TEST(RoiPool, GradientRoutesToArgmaxOnly) {
    auto fm = Tensor<double>::from({1, 2, 2}, {1, 4, 3, 2}, true);
    Tape<double> tape;
    tape.watch(fm);
    auto out = roi_pool(fm, RoiSpec{Box(0, 0, 2, 2), 1, 1, 1.0}, &tape);
    tape.backward(sum(out, &tape));
    EXPECT_DOUBLE_EQ(fm.grad()[0], 0.0);
    EXPECT_DOUBLE_EQ(fm.grad()[1], 1.0);  // the 4
    EXPECT_DOUBLE_EQ(fm.grad()[2], 0.0);
    EXPECT_DOUBLE_EQ(fm.grad()[3], 0.0);
}

TEST(RoiPool, TiesGoToFirstCellInScanOrder) {
    auto fm = Tensor<double>::full({1, 3, 3}, 7.0, true);
    Tape<double> tape;
    tape.watch(fm);
    auto out = roi_pool(fm, RoiSpec{Box(0, 0, 3, 3), 1, 1, 1.0}, &tape);
    tape.backward(sum(out, &tape));
    EXPECT_DOUBLE_EQ(fm.grad()[0], 1.0);
    for (int i = 1; i < 9; ++i) EXPECT_DOUBLE_EQ(fm.grad()[i], 0.0);
}

TEST(RoiPool, GradCheckAtUniqueMaxPoints) {
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        Rng r = Rng::child_of(seed, "roigrad");
        auto fm = Tensor<double>::zeros({2, 6, 6}, true);
        // Distinct values keep every argmax unique so the routed gradient is
        // differentiable at the evaluation point.
        std::vector<double> vals(static_cast<std::size_t>(fm.size()));
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<double>(i) * 0.37;
        for (std::size_t i = vals.size(); i > 1; --i)
            std::swap(vals[i - 1], vals[r.uniform_int(static_cast<uint64_t>(i))]);
        std::copy(vals.begin(), vals.end(), fm.data());

        RoiSpec spec{Box(0.5, 1.0, 5.5, 6.0), 2, 2, 1.0};
        auto fn = [&](Tape<double>* t) { return sum(roi_pool(fm, spec, t), t); };
        EXPECT_LT((grad_check<double>(fn, {fm}, 1e-5)), 1e-4) << "seed " << seed;
    }
}

namespace {

/// Brute-force oracle: materialize every bin's cell list from first
/// principles (double math end to end) and take max_element.
std::vector<double> oracle_pool(const std::vector<double>& chan, int fm_h, int fm_w,
                                const CellRect& r, int ph, int pw) {
    std::vector<double> out;
    for (int by = 0; by < ph; ++by) {
        const double h = r.y1 - r.y0 + 1;
        const int ys = r.y0 + static_cast<int>(std::floor(by * h / ph));
        const int ye = r.y0 + static_cast<int>(std::ceil((by + 1) * h / ph));
        for (int bx = 0; bx < pw; ++bx) {
            const double w = r.x1 - r.x0 + 1;
            const int xs = r.x0 + static_cast<int>(std::floor(bx * w / pw));
            const int xe = r.x0 + static_cast<int>(std::ceil((bx + 1) * w / pw));
            std::vector<double> bin;
            for (int y = ys; y < ye; ++y)
                for (int x = xs; x < xe; ++x)
                    bin.push_back(chan[static_cast<std::size_t>(y) * fm_w + x]);
            if (bin.empty()) {
                ADD_FAILURE() << "empty bin at (" << by << "," << bx << ")";
                out.push_back(std::nan(""));
                continue;
            }
            out.push_back(*std::max_element(bin.begin(), bin.end()));
        }
    }
    return out;
}

}  // namespace

TEST(RoiPool, ExhaustiveOracleAgreementSmallMaps) {
    // Every map size up to 8x8, every integer box, pooled sizes 1..3.
    long checked = 0;
    for (int fm_h = 1; fm_h <= 8; ++fm_h) {
        for (int fm_w = 1; fm_w <= 8; ++fm_w) {
            auto fm = Tensor<double>::zeros({1, fm_h, fm_w});
            Rng r(static_cast<uint64_t>(fm_h * 100 + fm_w));
            for (long i = 0; i < fm.size(); ++i) fm.data()[i] = r.normal();
            for (int y0 = 0; y0 < fm_h; ++y0)
                for (int y1 = y0 + 1; y1 <= fm_h; ++y1)
                    for (int x0 = 0; x0 < fm_w; ++x0)
                        for (int x1 = x0 + 1; x1 <= fm_w; ++x1)
                            for (int p = 1; p <= 3; ++p) {
                                RoiSpec spec{Box(x0, y0, x1, y1), p, p, 1.0};
                                auto got = roi_pool(fm, spec, nullptr);
                                const CellRect cr =
                                    map_box_to_feature(spec.box, 1.0, fm_h, fm_w);
                                std::vector<double> chan(fm.data(), fm.data() + fm.size());
                                auto want = oracle_pool(chan, fm_h, fm_w, cr, p, p);
                                for (std::size_t i = 0; i < want.size(); ++i)
                                    ASSERT_DOUBLE_EQ(got.data()[i], want[i])
                                        << fm_h << "x" << fm_w << " box (" << x0 << "," << y0
                                        << "," << x1 << "," << y1 << ") pooled " << p;
                                ++checked;
                            }
        }
    }
    EXPECT_GT(checked, 40000);
}

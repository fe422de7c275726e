// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ccnn/box.hpp"
#include "ccnn/rng.hpp"
#include "ccnn/scene.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

namespace detail {

/// Sobel gradient magnitude with replicated borders.
inline std::vector<double> sobel_magnitude(const Tensor<float>& image) {
    const int h = image.dim(1), w = image.dim(2);
    const float* v = image.data();
    auto at = [&](int y, int x) {
        y = std::clamp(y, 0, h - 1);
        x = std::clamp(x, 0, w - 1);
        return static_cast<double>(v[static_cast<std::size_t>(y) * w + x]);
    };
    std::vector<double> mag(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                              (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
            const double gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                              (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
            mag[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
        }
    return mag;
}

/// Summed-area table with a zero border row/column: sums are O(1) per query.
struct IntegralImage {
    int h, w;
    std::vector<double> s;  // (h+1) x (w+1)

    IntegralImage(const std::vector<double>& values, int height, int width)
        : h(height), w(width), s(static_cast<std::size_t>(h + 1) * (w + 1), 0.0) {
        for (int y = 0; y < h; ++y) {
            double row = 0;
            for (int x = 0; x < w; ++x) {
                row += values[static_cast<std::size_t>(y) * w + x];
                s[static_cast<std::size_t>(y + 1) * (w + 1) + (x + 1)] =
                    s[static_cast<std::size_t>(y) * (w + 1) + (x + 1)] + row;
            }
        }
    }

    /// Sum over pixel rect [x0,x1) x [y0,y1).
    double sum(int x0, int y0, int x1, int y1) const {
        return s[static_cast<std::size_t>(y1) * (w + 1) + x1] -
               s[static_cast<std::size_t>(y0) * (w + 1) + x1] -
               s[static_cast<std::size_t>(y1) * (w + 1) + x0] +
               s[static_cast<std::size_t>(y0) * (w + 1) + x0];
    }
};

}  // namespace detail

/// Greedy non-max suppression over score-sorted candidates: a box is kept
/// only if its IoU with every already-kept box stays at or below the
/// threshold. Returns at most `limit` boxes in the input order.
inline std::vector<Box> nms(const std::vector<Box>& sorted, double iou_threshold, int limit) {
    std::vector<Box> kept;
    for (const Box& b : sorted) {
        if (static_cast<int>(kept.size()) >= limit) break;
        bool ok = true;
        for (const Box& k : kept)
            if (iou(b, k) > iou_threshold) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(b);
    }
    return kept;
}

/// Objectness surrogate over a grayscale image: square windows at scales
/// {1/2, 1/3, 1/4} of the image side slide with stride 1/8 of the window
/// side; each is scored by interior Sobel-energy density minus twice the
/// density of a surrounding ring (contours straddling the boundary hurt).
/// Scores are min-max normalized to [0,1] (all-equal collapses to 0), then
/// NMS keeps the top n.
inline std::vector<Box> objectness_proposals(const Tensor<float>& image, int n, double nms_iou) {
    if (image.rank() != 3 || image.dim(0) != 1)
        throw DimensionError("objectness_proposals: image must be grayscale [1 x H x W], got " +
                             shape_str(image.shape()));
    if (n < 1) throw ContractError("objectness_proposals: n must be >= 1");
    const int h = image.dim(1), w = image.dim(2);
    const int side_base = std::min(h, w);

    const std::vector<double> mag = detail::sobel_magnitude(image);
    const detail::IntegralImage integral(mag, h, w);

    std::vector<Box> candidates;
    for (int divisor : {2, 3, 4}) {
        const int side = side_base / divisor;
        if (side < 2) continue;
        const int stride = std::max(1, side / 8);
        const int margin = std::max(1, side / 8);
        for (int y = 0; y + side <= h; y += stride)
            for (int x = 0; x + side <= w; x += stride) {
                const double inner = integral.sum(x, y, x + side, y + side);
                const double inner_area = static_cast<double>(side) * side;
                const int ox0 = std::max(0, x - margin);
                const int oy0 = std::max(0, y - margin);
                const int ox1 = std::min(w, x + side + margin);
                const int oy1 = std::min(h, y + side + margin);
                const double outer = integral.sum(ox0, oy0, ox1, oy1);
                const double ring_area =
                    static_cast<double>(ox1 - ox0) * (oy1 - oy0) - inner_area;
                const double ring_density = ring_area > 0 ? (outer - inner) / ring_area : 0.0;
                Box b;
                b.x0 = x;
                b.y0 = y;
                b.x1 = x + side;
                b.y1 = y + side;
                b.score = inner / inner_area - 2.0 * ring_density;
                candidates.push_back(b);
            }
    }
    if (candidates.empty()) return {};

    double lo = candidates[0].score, hi = candidates[0].score;
    for (const Box& b : candidates) {
        lo = std::min(lo, b.score);
        hi = std::max(hi, b.score);
    }
    for (Box& b : candidates) b.score = hi > lo ? (b.score - lo) / (hi - lo) : 0.0;

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Box& a, const Box& b) { return a.score > b.score; });
    return nms(candidates, nms_iou, n);
}

/// Ground-truth boxes as proposals: ordered by area (largest first), each
/// coordinate jittered within +-jitter*extent, scored by synthetic strictly
/// descending confidences, padded to n by repeating the last box. The
/// model never sees object identities, only the boxes.
inline std::vector<Box> oracle_proposals(const SceneSample& sample, int n, double jitter,
                                         uint64_t rng_seed) {
    if (sample.gt_boxes.empty())
        throw ContractError("oracle_proposals: sample has no ground-truth boxes");
    if (n < 1) throw ContractError("oracle_proposals: n must be >= 1");
    const int img_h = sample.image.dim(1);
    const int img_w = sample.image.dim(2);

    std::vector<Box> boxes = sample.gt_boxes;
    std::stable_sort(boxes.begin(), boxes.end(),
                     [](const Box& a, const Box& b) { return a.area() > b.area(); });
    if (static_cast<int>(boxes.size()) > n) boxes.resize(static_cast<std::size_t>(n));

    Rng rng = Rng::child_of(rng_seed, "oracle");
    const int m = static_cast<int>(boxes.size());
    for (int i = 0; i < m; ++i) {
        Box& b = boxes[static_cast<std::size_t>(i)];
        const double jw = jitter * b.width();
        const double jh = jitter * b.height();
        b.x0 += rng.uniform(-jw, jw);
        b.y0 += rng.uniform(-jh, jh);
        b.x1 += rng.uniform(-jw, jw);
        b.y1 += rng.uniform(-jh, jh);
        b = clamp_to_image(b, img_w, img_h);
        b.score = static_cast<double>(m - i) / static_cast<double>(m);
    }
    while (static_cast<int>(boxes.size()) < n) boxes.push_back(boxes.back());
    return boxes;
}

/// Random boxes sized within +-20% of the reference mean but constrained to
/// IoU < max_overlap against every reference box, ablating object content
/// while preserving box statistics. Placement is bounded rejection
/// sampling; running out of attempts raises a feasibility error carrying
/// the achieved count.
inline std::vector<Box> adversarial_random_boxes(const std::vector<Box>& reference, int image_w,
                                                 int image_h, int n, double max_overlap,
                                                 uint64_t rng_seed) {
    if (reference.empty())
        throw ContractError("adversarial_random_boxes: empty reference list");
    if (n < 1) throw ContractError("adversarial_random_boxes: n must be >= 1");
    double mw = 0, mh = 0;
    for (const Box& b : reference) {
        mw += b.width();
        mh += b.height();
    }
    mw /= static_cast<double>(reference.size());
    mh /= static_cast<double>(reference.size());

    Rng rng = Rng::child_of(rng_seed, "advbox");
    std::vector<Box> out;
    constexpr int kAttemptsPerBox = 1000;
    for (int i = 0; i < n; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kAttemptsPerBox && !placed; ++attempt) {
            const double bw = std::min(static_cast<double>(image_w), mw * rng.uniform(0.8, 1.2));
            const double bh = std::min(static_cast<double>(image_h), mh * rng.uniform(0.8, 1.2));
            Box b;
            b.x0 = rng.uniform(0.0, image_w - bw);
            b.y0 = rng.uniform(0.0, image_h - bh);
            b.x1 = b.x0 + bw;
            b.y1 = b.y0 + bh;
            b.score = rng.uniform();
            bool clear = true;
            for (const Box& ref : reference)
                if (iou(b, ref) >= max_overlap) {
                    clear = false;
                    break;
                }
            if (clear) {
                out.push_back(b);
                placed = true;
            }
        }
        if (!placed)
            throw FeasibilityError("adversarial_random_boxes: placed " +
                                       std::to_string(out.size()) + " of " + std::to_string(n) +
                                       " boxes under IoU < " + std::to_string(max_overlap),
                                   static_cast<int>(out.size()));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Box& a, const Box& b) { return a.score > b.score; });
    for (const Box& b : out)
        for (const Box& ref : reference)
            if (iou(b, ref) >= max_overlap)
                throw ContractError("adversarial_random_boxes: post-condition violated");
    return out;
}

}  // namespace ccnn

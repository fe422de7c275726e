// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "ccnn/box.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

struct RoiSpec {
    Box box;               // image pixel coordinates
    int pooled_h = 7;
    int pooled_w = 7;
    double spatial_scale = 1.0;  // feature-map size / image size
};

/// Integer cell rectangle on a feature map, both edges inclusive.
struct CellRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int width() const { return x1 - x0 + 1; }
    int height() const { return y1 - y0 + 1; }
};

/// Projects an image-space box onto an fm_h x fm_w feature map: scale, floor
/// the min edge, ceil the max edge, clamp to the map. Degenerate projections
/// are widened to a single cell rather than rejected.
inline CellRect map_box_to_feature(const Box& box, double spatial_scale, int fm_h, int fm_w) {
    require_positive_area(box, "map_box_to_feature");
    CellRect r;
    r.x0 = std::clamp(static_cast<int>(std::floor(box.x0 * spatial_scale)), 0, fm_w - 1);
    r.y0 = std::clamp(static_cast<int>(std::floor(box.y0 * spatial_scale)), 0, fm_h - 1);
    r.x1 = std::clamp(static_cast<int>(std::ceil(box.x1 * spatial_scale)) - 1, 0, fm_w - 1);
    r.y1 = std::clamp(static_cast<int>(std::ceil(box.y1 * spatial_scale)) - 1, 0, fm_h - 1);
    r.x1 = std::max(r.x1, r.x0);
    r.y1 = std::max(r.y1, r.y0);
    return r;
}

/// Max-pools the box's feature-map window into a fixed pooled_h x pooled_w
/// grid per channel. Bin i spans cells floor(i*h/pooled_h) inclusive to
/// ceil((i+1)*h/pooled_h) exclusive of the window, which is never empty.
/// Backward routes each output cell's gradient to its argmax input cell,
/// first in row-major scan order on ties.
template <typename T>
Tensor<T> roi_pool(const Tensor<T>& features, const RoiSpec& spec, TapeOf<T>* tape) {
    if (features.rank() != 3)
        throw DimensionError("roi_pool: features must be [M x H x W], got " +
                             shape_str(features.shape()));
    if (spec.pooled_h < 1 || spec.pooled_w < 1)
        throw ContractError("roi_pool: pooled size must be >= 1x1");
    const int m = features.dim(0), fm_h = features.dim(1), fm_w = features.dim(2);
    const CellRect r = map_box_to_feature(spec.box, spec.spatial_scale, fm_h, fm_w);
    const int rh = r.height(), rw = r.width();
    const int ph = spec.pooled_h, pw = spec.pooled_w;

    const bool rec = detail::needs_grad(tape, {&features});
    Tensor<T> out = Tensor<T>::zeros({m, ph, pw}, rec);
    // Flat feature-map index of each output cell's max, kept for backward.
    auto argmax = std::make_shared<std::vector<long>>(static_cast<std::size_t>(m) * ph * pw);

    const T* fv = features.data();
    T* ov = out.data();
    for (int c = 0; c < m; ++c) {
        const T* chan = fv + static_cast<std::size_t>(c) * fm_h * fm_w;
        for (int by = 0; by < ph; ++by) {
            const int ys = r.y0 + static_cast<int>(std::floor(static_cast<double>(by) * rh / ph));
            const int ye = r.y0 + static_cast<int>(std::ceil(static_cast<double>(by + 1) * rh / ph));
            for (int bx = 0; bx < pw; ++bx) {
                const int xs =
                    r.x0 + static_cast<int>(std::floor(static_cast<double>(bx) * rw / pw));
                const int xe =
                    r.x0 + static_cast<int>(std::ceil(static_cast<double>(bx + 1) * rw / pw));
                T best = chan[static_cast<std::size_t>(ys) * fm_w + xs];
                long best_idx = static_cast<long>(ys) * fm_w + xs;
                for (int y = ys; y < ye; ++y)
                    for (int x = xs; x < xe; ++x) {
                        const T v = chan[static_cast<std::size_t>(y) * fm_w + x];
                        if (v > best) {
                            best = v;
                            best_idx = static_cast<long>(y) * fm_w + x;
                        }
                    }
                const std::size_t o =
                    (static_cast<std::size_t>(c) * ph + by) * pw + bx;
                ov[o] = best;
                (*argmax)[o] = static_cast<long>(c) * fm_h * fm_w + best_idx;
            }
        }
    }
    debug_check_finite(out, "roi_pool");

    if (rec) {
        tape->watch(features);
        tape->track_interior(out);
        auto fd = features.storage(), od = out.storage();
        const long n_out = out.size();
        tape->record([fd, od, argmax, n_out] {
            for (long i = 0; i < n_out; ++i)
                fd->g[static_cast<std::size_t>((*argmax)[static_cast<std::size_t>(i)])] +=
                    od->g[static_cast<std::size_t>(i)];
        });
    }
    return out;
}

}  // namespace ccnn

// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <string>

#include "ccnn/errors.hpp"

namespace ccnn {

/// Axis-aligned box in pixel coordinates, half-open on the max edges
/// (x1 > x0, y1 > y0), with a confidence score in [0,1].
struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double score = 0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    bool positive_area() const { return x1 > x0 && y1 > y0; }

    std::string str() const {
        return "(" + std::to_string(x0) + "," + std::to_string(y0) + "," + std::to_string(x1) +
               "," + std::to_string(y1) + ")";
    }
};

inline double iou(const Box& a, const Box& b) {
    const double ix0 = std::max(a.x0, b.x0);
    const double iy0 = std::max(a.y0, b.y0);
    const double ix1 = std::min(a.x1, b.x1);
    const double iy1 = std::min(a.y1, b.y1);
    const double iw = ix1 - ix0;
    const double ih = iy1 - iy0;
    if (iw <= 0 || ih <= 0) return 0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

/// Clamps a box into [0,w] x [0,h], preserving at least 1 pixel of extent
/// when the clamp would otherwise empty it.
inline Box clamp_to_image(Box b, int w, int h) {
    b.x0 = std::clamp(b.x0, 0.0, static_cast<double>(w));
    b.x1 = std::clamp(b.x1, 0.0, static_cast<double>(w));
    b.y0 = std::clamp(b.y0, 0.0, static_cast<double>(h));
    b.y1 = std::clamp(b.y1, 0.0, static_cast<double>(h));
    if (b.x1 <= b.x0) {
        if (b.x0 >= w) b.x0 = w - 1;
        b.x1 = b.x0 + 1;
    }
    if (b.y1 <= b.y0) {
        if (b.y0 >= h) b.y0 = h - 1;
        b.y1 = b.y0 + 1;
    }
    return b;
}

inline void require_positive_area(const Box& b, const char* where) {
    if (!b.positive_area())
        throw InvalidBoxError(std::string(where) + ": box " + b.str() + " has no positive area");
}

}  // namespace ccnn

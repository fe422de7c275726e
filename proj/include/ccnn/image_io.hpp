// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ccnn/errors.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

/// Round-half-up quantization of [0,1] to 8-bit.
inline uint8_t quantize_u8(float v) {
    const float q = std::floor(v * 255.0f + 0.5f);
    return static_cast<uint8_t>(q < 0 ? 0 : (q > 255 ? 255 : q));
}

/// Writes a [1 x H x W] tensor as binary PGM (P5) or a [3 x H x W] tensor as
/// binary PPM (P6), maxval 255. Values are clamped-quantized from [0,1].
inline void write_pnm(const std::string& path, const Tensor<float>& image) {
    if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3))
        throw DimensionError("write_pnm: image must be [1|3 x H x W], got " +
                             shape_str(image.shape()));
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    std::vector<unsigned char> out;
    const std::string header = std::string(c == 1 ? "P5" : "P6") + "\n" + std::to_string(w) + " " +
                               std::to_string(h) + "\n255\n";
    out.insert(out.end(), header.begin(), header.end());
    const float* v = image.data();
    const long hw = static_cast<long>(h) * w;
    for (long i = 0; i < hw; ++i)
        for (int ch = 0; ch < c; ++ch) out.push_back(quantize_u8(v[ch * hw + i]));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<long>(out.size()));
    if (!f) throw IoError("write failed for '" + path + "'");
}

namespace detail {

struct PnmScanner {
    const std::vector<unsigned char>& buf;
    std::size_t pos = 0;
    const std::string& path;

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("'" + path + "': " + what, pos);
    }

    static bool is_space(unsigned char ch) {
        return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v';
    }

    // Whitespace and '#'-to-end-of-line comments separate header tokens.
    void skip_separators() {
        while (pos < buf.size()) {
            if (is_space(buf[pos])) {
                ++pos;
            } else if (buf[pos] == '#') {
                while (pos < buf.size() && buf[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
    }

    int read_int() {
        skip_separators();
        if (pos >= buf.size() || buf[pos] < '0' || buf[pos] > '9')
            fail("expected integer in header");
        long v = 0;
        while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
            v = v * 10 + (buf[pos] - '0');
            if (v > 1'000'000) fail("header integer out of range");
            ++pos;
        }
        return static_cast<int>(v);
    }
};

}  // namespace detail

/// Reads binary PGM/PPM with maxval 255 into a [C x H x W] float tensor,
/// pixel values mapped to [0,1] as q/255.
inline Tensor<float> read_pnm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    detail::PnmScanner s{buf, 0, path};

    if (buf.size() < 2 || buf[0] != 'P' || (buf[1] != '5' && buf[1] != '6'))
        s.fail("not a binary PGM/PPM (expected P5 or P6 magic)");
    const int c = buf[1] == '5' ? 1 : 3;
    s.pos = 2;
    const int w = s.read_int();
    const int h = s.read_int();
    const int maxval = s.read_int();
    if (w < 1 || h < 1) s.fail("non-positive image dimensions");
    if (maxval != 255) s.fail("unsupported maxval " + std::to_string(maxval) + " (need 255)");
    if (s.pos >= buf.size() || !detail::PnmScanner::is_space(buf[s.pos]))
        s.fail("expected single whitespace before pixel data");
    ++s.pos;

    const long hw = static_cast<long>(h) * w;
    const std::size_t need = static_cast<std::size_t>(hw) * c;
    if (buf.size() - s.pos < need)
        throw ParseError("'" + path + "': pixel data truncated (need " + std::to_string(need) +
                             " bytes, have " + std::to_string(buf.size() - s.pos) + ")",
                         s.pos);
    if (buf.size() - s.pos > need)
        throw ParseError("'" + path + "': trailing bytes after pixel data", s.pos + need);

    Tensor<float> img = Tensor<float>::zeros({c, h, w});
    float* v = img.data();
    for (long i = 0; i < hw; ++i)
        for (int ch = 0; ch < c; ++ch)
            v[ch * hw + i] = static_cast<float>(buf[s.pos + static_cast<std::size_t>(i) * c +
                                                    static_cast<std::size_t>(ch)]) /
                             255.0f;
    return img;
}

}  // namespace ccnn

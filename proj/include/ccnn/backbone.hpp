// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "ccnn/ops.hpp"
#include "ccnn/rng.hpp"

namespace ccnn {

struct ConvBlockSpec {
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
    int pad = 1;
};

/// Stacked conv+relu blocks turning an image into the shared feature map.
/// The image-to-map ratio must come out a power of two so the RoI spatial
/// scale is exactly representable.
struct BackboneConfig {
    int in_channels = 1;
    int input_size = 64;
    std::vector<ConvBlockSpec> blocks = {{16, 3, 2, 1}, {32, 3, 2, 1}, {32, 3, 1, 1}};

    int out_channels() const { return blocks.back().out_channels; }

    int fm_size() const {
        int s = input_size;
        for (const auto& b : blocks) s = conv_out_extent(s, b.kernel, b.stride, b.pad);
        return s;
    }

    int downsample() const { return input_size / fm_size(); }

    double spatial_scale() const {
        return static_cast<double>(fm_size()) / static_cast<double>(input_size);
    }

    void validate() const {
        if (blocks.empty()) throw ContractError("backbone: no conv blocks");
        const int fm = fm_size();
        if (fm < 4) throw ContractError("backbone: feature map " + std::to_string(fm) + " < 4");
        const int d = downsample();
        if (d * fm != input_size || (d & (d - 1)) != 0)
            throw ContractError("backbone: downsample " + std::to_string(input_size) + "/" +
                                std::to_string(fm) + " is not a power of two");
    }
};

template <typename T>
struct BackboneParams {
    std::vector<Tensor<T>> w;  // per block, [C_out x C_in x k x k]
    std::vector<Tensor<T>> b;  // per block, [C_out]

    static BackboneParams init(const BackboneConfig& cfg, Rng& rng, bool requires_grad = true) {
        BackboneParams p;
        int c_in = cfg.in_channels;
        for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
            const auto& blk = cfg.blocks[i];
            Rng r = Rng::child_of(rng.next_u64(), "conv" + std::to_string(i));
            const T s = std::sqrt(T(2) / static_cast<T>(c_in * blk.kernel * blk.kernel));
            Tensor<T> k =
                Tensor<T>::zeros({blk.out_channels, c_in, blk.kernel, blk.kernel}, requires_grad);
            for (long j = 0; j < k.size(); ++j) k.data()[j] = static_cast<T>(r.normal(0.0, s));
            p.w.push_back(k);
            p.b.push_back(Tensor<T>::zeros({blk.out_channels}, requires_grad));
            c_in = blk.out_channels;
        }
        return p;
    }
};

/// image [C x H x W] -> feature map [M x fm x fm] through conv+relu blocks.
template <typename T>
Tensor<T> backbone_forward(const Tensor<T>& image, const BackboneConfig& cfg,
                           const BackboneParams<T>& params, TapeOf<T>* tape) {
    if (image.rank() != 3 || image.dim(0) != cfg.in_channels || image.dim(1) != cfg.input_size ||
        image.dim(2) != cfg.input_size)
        throw DimensionError("backbone_forward: image " + shape_str(image.shape()) +
                             " does not match configured [" + std::to_string(cfg.in_channels) +
                             " x " + std::to_string(cfg.input_size) + " x " +
                             std::to_string(cfg.input_size) + "]");
    if (params.w.size() != cfg.blocks.size())
        throw DimensionError("backbone_forward: " + std::to_string(params.w.size()) +
                             " weight blocks for " + std::to_string(cfg.blocks.size()) +
                             " configured blocks");
    Tensor<T> x = image;
    for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
        x = conv2d(x, params.w[i], cfg.blocks[i].stride, cfg.blocks[i].pad, tape);
        x = add_channel_bias(x, params.b[i], tape);
        x = activate(x, Act::Relu, tape);
    }
    return x;
}

}  // namespace ccnn

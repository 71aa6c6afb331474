// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <stdexcept>

#include "protoseg/layers.hpp"
#include "protoseg/prototype.hpp"

namespace protoseg {

/// Base fusion: concatenate features with the broadcast prototype and apply
/// one 3x3 convolution back down to the feature width.
template <typename T>
class BaseFusion {
public:
    BaseFusion() = default;

    explicit BaseFusion(int feature_dim)
        : feature_dim_(feature_dim), conv_(Conv2d<T>::same(2 * feature_dim, feature_dim, 3)) {}

    int feature_dim() const { return feature_dim_; }
    Conv2d<T>& conv() { return conv_; }
    const Conv2d<T>& conv() const { return conv_; }

    void init(Rng& rng) { conv_.init(rng); }
    std::size_t param_count() const { return conv_.param_count(); }

    struct Cache {
        typename Conv2d<T>::Cache conv;
    };

    Tensor<T> forward(const Tensor<T>& concat_in, Cache* cache = nullptr) const {
        if (concat_in.dim(0) != 2 * feature_dim_)
            throw std::invalid_argument("BaseFusion: expected " +
                                        std::to_string(2 * feature_dim_) + " input channels");
        return conv_.forward(concat_in, cache ? &cache->conv : nullptr);
    }

    Tensor<T> backward(const Cache& cache, const Tensor<T>& grad_y) {
        return conv_.backward(cache.conv, grad_y);
    }

    Tensor<T> fuse(const Tensor<T>& features, const Prototype<T>& proto,
                   Cache* cache = nullptr) const {
        if (proto.dim() != features.dim(0))
            throw std::invalid_argument("BaseFusion::fuse: prototype dim mismatch");
        return forward(concat_channels(features, broadcast_prototype(proto, features.dim(1),
                                                                     features.dim(2))),
                       cache);
    }

private:
    int feature_dim_ = 0;
    Conv2d<T> conv_;
};

/// Pyramid feature fusion: reduce the concatenated channels, mine them at
/// scales {1, 1/2, 1/4} with one 3x3 conv per scale, merge by elementwise
/// addition, then refine with two pre-activation bottleneck residual blocks
/// (1x1 -> 3x3 -> 1x1 at widths w/8, w/8, w with identity skips).
template <typename T>
class PyramidFusion {
public:
    PyramidFusion() = default;

    explicit PyramidFusion(int feature_dim) : width_(feature_dim) {
        if (feature_dim % 8 != 0)
            throw std::invalid_argument("PyramidFusion: feature_dim must be divisible by 8");
        reduce_ = Conv2d<T>::same(2 * width_, width_, 3);
        for (auto& s : scale_) s = Conv2d<T>::same(width_, width_, 3);
        const int narrow = width_ / 8;
        for (auto& b : blocks_) {
            b.squeeze = Conv2d<T>(width_, narrow, 1);
            b.mix = Conv2d<T>::same(narrow, narrow, 3);
            b.expand = Conv2d<T>(narrow, width_, 1);
        }
    }

    int feature_dim() const { return width_; }

    void init(Rng& rng) {
        reduce_.init(rng);
        for (auto& s : scale_) s.init(rng);
        for (auto& b : blocks_) {
            b.squeeze.init(rng);
            b.mix.init(rng);
            b.expand.init(rng);
        }
    }

    std::size_t param_count() const {
        std::size_t n = reduce_.param_count();
        for (const auto& s : scale_) n += s.param_count();
        for (const auto& b : blocks_)
            n += b.squeeze.param_count() + b.mix.param_count() + b.expand.param_count();
        return n;
    }

    struct ResBlock {
        Conv2d<T> squeeze, mix, expand;
    };

    struct Cache {
        typename Conv2d<T>::Cache reduce;
        Tensor<T> reduced;  // post-ReLU reduce output
        std::array<typename Conv2d<T>::Cache, 3> scale;
        std::array<Tensor<T>, 3> scale_post;  // post-ReLU per-scale conv outputs
        Tensor<T> pooled_half, pooled_quarter;
        struct Block {
            Tensor<T> input;
            Tensor<T> a1, a2, a3;  // pre-activation ReLU outputs
            typename Conv2d<T>::Cache c1, c2, c3;
        };
        std::array<Block, 2> block;
        int h = 0, w = 0;
    };

    Tensor<T> forward(const Tensor<T>& concat_in, Cache* cache = nullptr) const {
        if (concat_in.dim(0) != 2 * width_)
            throw std::invalid_argument("PyramidFusion: expected " +
                                        std::to_string(2 * width_) + " input channels");
        const int h = concat_in.dim(1), w = concat_in.dim(2);
        if (h % 4 != 0 || w % 4 != 0)
            throw std::invalid_argument(
                "PyramidFusion: spatial dims must be divisible by 4, got " + concat_in.shape_str());

        Cache local;
        Cache& c = cache ? *cache : local;
        c.h = h;
        c.w = w;

        c.reduced = relu(reduce_.forward(concat_in, &c.reduce));

        c.pooled_half = avg_pool2(c.reduced);
        c.pooled_quarter = avg_pool2(c.pooled_half);

        c.scale_post[0] = relu(scale_[0].forward(c.reduced, &c.scale[0]));
        c.scale_post[1] = relu(scale_[1].forward(c.pooled_half, &c.scale[1]));
        c.scale_post[2] = relu(scale_[2].forward(c.pooled_quarter, &c.scale[2]));

        Tensor<T> merged = c.scale_post[0];
        add_inplace(merged, resize_bilinear(c.scale_post[1], h, w));
        add_inplace(merged, resize_bilinear(c.scale_post[2], h, w));

        Tensor<T> x = std::move(merged);
        for (int b = 0; b < 2; ++b) {
            auto& bc = c.block[b];
            bc.input = x;
            bc.a1 = relu(x);
            Tensor<T> t = blocks_[b].squeeze.forward(bc.a1, &bc.c1);
            bc.a2 = relu(t);
            t = blocks_[b].mix.forward(bc.a2, &bc.c2);
            bc.a3 = relu(t);
            t = blocks_[b].expand.forward(bc.a3, &bc.c3);
            add_inplace(t, bc.input);  // identity skip
            x = std::move(t);
        }
        return x;
    }

    Tensor<T> backward(const Cache& cache, const Tensor<T>& grad_y) {
        Tensor<T> g = grad_y;
        for (int b = 1; b >= 0; --b) {
            const auto& bc = cache.block[b];
            Tensor<T> ge = blocks_[b].expand.backward(bc.c3, g);
            ge = relu_backward(bc.a3, ge);
            ge = blocks_[b].mix.backward(bc.c2, ge);
            ge = relu_backward(bc.a2, ge);
            ge = blocks_[b].squeeze.backward(bc.c1, ge);
            ge = relu_backward(bc.a1, ge);
            add_inplace(ge, g);  // skip path
            g = std::move(ge);
        }

        // Merge node fans out to the three scale paths.
        Tensor<T> g0 = relu_backward(cache.scale_post[0], g);
        g0 = scale_[0].backward(cache.scale[0], g0);

        Tensor<T> g1 = resize_bilinear_backward(g, cache.h / 2, cache.w / 2);
        g1 = relu_backward(cache.scale_post[1], g1);
        g1 = scale_[1].backward(cache.scale[1], g1);

        Tensor<T> g2 = resize_bilinear_backward(g, cache.h / 4, cache.w / 4);
        g2 = relu_backward(cache.scale_post[2], g2);
        g2 = scale_[2].backward(cache.scale[2], g2);

        // Pool paths back to the reduced features.
        Tensor<T> g_reduced = std::move(g0);
        Tensor<T> gp = avg_pool2_backward(g2);
        add_inplace(gp, g1);
        add_inplace(g_reduced, avg_pool2_backward(gp));

        g_reduced = relu_backward(cache.reduced, g_reduced);
        return reduce_.backward(cache.reduce, g_reduced);
    }

    Tensor<T> fuse(const Tensor<T>& features, const Prototype<T>& proto,
                   Cache* cache = nullptr) const {
        if (proto.dim() != features.dim(0))
            throw std::invalid_argument("PyramidFusion::fuse: prototype dim mismatch");
        return forward(concat_channels(features, broadcast_prototype(proto, features.dim(1),
                                                                     features.dim(2))),
                       cache);
    }

    Conv2d<T>& reduce() { return reduce_; }
    std::array<Conv2d<T>, 3>& scale_convs() { return scale_; }
    std::array<ResBlock, 2>& blocks() { return blocks_; }
    const std::array<ResBlock, 2>& blocks() const { return blocks_; }

private:
    int width_ = 0;
    Conv2d<T> reduce_;
    std::array<Conv2d<T>, 3> scale_;
    std::array<ResBlock, 2> blocks_;
};

}  // namespace protoseg

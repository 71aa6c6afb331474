// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <vector>

#include "protoseg/layers.hpp"

namespace protoseg {

/// Four stages of (3x3 conv, ReLU) at strides (2,2,2,1); the final stage is
/// dilated to widen the receptive field without further downsampling.
/// Output stride is fixed at 8.
struct EncoderConfig {
    std::vector<int> channel_widths{16, 32, 64, 64};
    int dilation_last_stage = 2;

    int feature_dim() const { return channel_widths.back(); }

    void validate() const {
        if (channel_widths.size() != 4)
            throw std::invalid_argument("EncoderConfig: exactly 4 stage widths expected");
        for (int w : channel_widths)
            if (w < 1) throw std::invalid_argument("EncoderConfig: widths must be positive");
        if (dilation_last_stage < 1)
            throw std::invalid_argument("EncoderConfig: dilation must be >= 1");
    }
};

constexpr int kEncoderStride = 8;

template <typename T>
class Encoder {
public:
    Encoder() = default;

    explicit Encoder(const EncoderConfig& config) : cfg_(config) {
        cfg_.validate();
        const int strides[4] = {2, 2, 2, 1};
        int in_ch = 3;
        for (int s = 0; s < 4; ++s) {
            const int dilation = s == 3 ? cfg_.dilation_last_stage : 1;
            stages_.push_back(
                Conv2d<T>::same(in_ch, cfg_.channel_widths[s], 3, strides[s], dilation));
            in_ch = cfg_.channel_widths[s];
        }
    }

    const EncoderConfig& config() const { return cfg_; }
    std::vector<Conv2d<T>>& stages() { return stages_; }
    const std::vector<Conv2d<T>>& stages() const { return stages_; }

    void init(Rng& rng) {
        for (auto& s : stages_) s.init(rng);
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& s : stages_) n += s.param_count();
        return n;
    }

    struct Cache {
        std::vector<typename Conv2d<T>::Cache> conv;
        std::vector<Tensor<T>> post;  // post-ReLU stage outputs
    };

    /// image: [3,H,W] with H, W divisible by 8 -> features [C_feat, H/8, W/8].
    Tensor<T> forward(const Tensor<T>& image, Cache* cache = nullptr) const {
        if (image.rank() != 3 || image.dim(0) != 3)
            throw std::invalid_argument("Encoder::forward: expected [3,H,W] image");
        if (image.dim(1) % kEncoderStride != 0 || image.dim(2) % kEncoderStride != 0)
            throw std::invalid_argument(
                "Encoder::forward: spatial dims must be divisible by 8, got " + image.shape_str());

        if (cache) {
            cache->conv.resize(stages_.size());
            cache->post.resize(stages_.size());
        }
        Tensor<T> x = image;
        for (std::size_t s = 0; s < stages_.size(); ++s) {
            Tensor<T> pre = stages_[s].forward(x, cache ? &cache->conv[s] : nullptr);
            x = relu(pre);
            if (cache) cache->post[s] = x;
        }
        return x;
    }

    /// Backpropagates grad_features; accumulates stage parameter gradients.
    /// Returns the image gradient (rarely needed; cheap at this scale).
    Tensor<T> backward(const Cache& cache, const Tensor<T>& grad_features) {
        Tensor<T> g = grad_features;
        for (int s = static_cast<int>(stages_.size()) - 1; s >= 0; --s) {
            g = relu_backward(cache.post[s], g);
            g = stages_[s].backward(cache.conv[s], g);
        }
        return g;
    }

private:
    EncoderConfig cfg_;
    std::vector<Conv2d<T>> stages_;
};

}  // namespace protoseg

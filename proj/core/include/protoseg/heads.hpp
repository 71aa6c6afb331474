// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "protoseg/layers.hpp"

namespace protoseg {

/// Loss reduction over pixels. The per-pixel sum follows the objective as
/// written; mean decouples the loss scale from image size and is the
/// default. The active mode is recorded in every checkpoint.
enum class Reduction { mean, sum };

inline const char* reduction_name(Reduction r) { return r == Reduction::mean ? "mean" : "sum"; }
inline Reduction reduction_from_name(const std::string& s) {
    if (s == "mean") return Reduction::mean;
    if (s == "sum") return Reduction::sum;
    throw std::invalid_argument("unknown reduction: " + s);
}

/// ASPP-style classifier: parallel 3x3 convolutions at the configured
/// dilation rates, each projecting to the class count, summed into logits at
/// feature resolution, then bilinearly upsampled x8 to input resolution.
template <typename T>
class AsppHead {
public:
    AsppHead() = default;

    AsppHead(int in_ch, int num_classes, std::vector<int> rates = {1, 2, 4})
        : in_ch_(in_ch), num_classes_(num_classes), rates_(std::move(rates)) {
        if (num_classes_ < 2) throw std::invalid_argument("AsppHead: need >= 2 classes");
        if (rates_.empty()) throw std::invalid_argument("AsppHead: need >= 1 rate");
        for (int r : rates_) branches_.push_back(Conv2d<T>::same(in_ch_, num_classes_, 3, 1, r));
    }

    int num_classes() const { return num_classes_; }
    const std::vector<int>& rates() const { return rates_; }
    std::vector<Conv2d<T>>& branches() { return branches_; }
    const std::vector<Conv2d<T>>& branches() const { return branches_; }

    void init(Rng& rng) {
        for (auto& b : branches_) b.init(rng);
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& b : branches_) n += b.param_count();
        return n;
    }

    struct Cache {
        std::vector<typename Conv2d<T>::Cache> conv;
        int h = 0, w = 0;
    };

    /// Logits at feature resolution.
    Tensor<T> forward_lowres(const Tensor<T>& features, Cache* cache = nullptr) const {
        if (cache) {
            cache->conv.resize(branches_.size());
            cache->h = features.dim(1);
            cache->w = features.dim(2);
        }
        Tensor<T> logits;
        for (std::size_t i = 0; i < branches_.size(); ++i) {
            Tensor<T> y = branches_[i].forward(features, cache ? &cache->conv[i] : nullptr);
            if (i == 0)
                logits = std::move(y);
            else
                add_inplace(logits, y);
        }
        return logits;
    }

    /// Logits upsampled to (out_h, out_w).
    Tensor<T> forward(const Tensor<T>& features, int out_h, int out_w,
                      Cache* cache = nullptr) const {
        return resize_bilinear(forward_lowres(features, cache), out_h, out_w);
    }

    Tensor<T> backward_lowres(const Cache& cache, const Tensor<T>& grad_logits) {
        Tensor<T> gx;
        for (std::size_t i = 0; i < branches_.size(); ++i) {
            Tensor<T> g = branches_[i].backward(cache.conv[i], grad_logits);
            if (i == 0)
                gx = std::move(g);
            else
                add_inplace(gx, g);
        }
        return gx;
    }

private:
    int in_ch_ = 0;
    int num_classes_ = 0;
    std::vector<int> rates_;
    std::vector<Conv2d<T>> branches_;
};

template <typename T>
struct CrossEntropyResult {
    double loss = 0.0;
    long counted_pixels = 0;
    Tensor<T> grad_logits;  // populated when want_grad
};

/// Pixelwise softmax cross entropy over a [K,H,W] logit map against an
/// integer [H,W] target. Pixels equal to ignore_value contribute neither
/// loss nor gradient.
template <typename T>
CrossEntropyResult<T> cross_entropy_mask(const Tensor<T>& logits,
                                         const Tensor<std::uint8_t>& target, int ignore_value,
                                         Reduction reduction, bool want_grad = false) {
    if (logits.rank() != 3) throw std::invalid_argument("cross_entropy_mask: logits must be [K,H,W]");
    const int k = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
    if (target.dim(0) != h || target.dim(1) != w)
        throw std::invalid_argument("cross_entropy_mask: target size mismatch");

    CrossEntropyResult<T> out;
    if (want_grad) {
        out.grad_logits = Tensor<T>({k, h, w});
    }
    const std::size_t plane = static_cast<std::size_t>(h) * w;

    long counted = 0;
    for (std::size_t i = 0; i < plane; ++i) {
        const int t = target[i];
        if (t == ignore_value) continue;
        if (t < 0 || t >= k)
            throw std::invalid_argument("cross_entropy_mask: target value " + std::to_string(t) +
                                        " out of range for " + std::to_string(k) + " classes");
        ++counted;
    }

    // Channel-major passes keep the sweeps contiguous.
    std::vector<T> maxv(logits.data(), logits.data() + plane);
    for (int c = 1; c < k; ++c) {
        const T* row = logits.data() + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) maxv[i] = std::max(maxv[i], row[i]);
    }
    std::vector<T> denom(plane, T{});
    for (int c = 0; c < k; ++c) {
        const T* row = logits.data() + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) denom[i] += std::exp(row[i] - maxv[i]);
    }

    double loss = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
        const int t = target[i];
        if (t == ignore_value) continue;
        loss += static_cast<double>(maxv[i]) + std::log(static_cast<double>(denom[i])) -
                static_cast<double>(logits[static_cast<std::size_t>(t) * plane + i]);
    }

    if (want_grad) {
        for (int c = 0; c < k; ++c) {
            const T* row = logits.data() + static_cast<std::size_t>(c) * plane;
            T* grow = out.grad_logits.data() + static_cast<std::size_t>(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) grow[i] = std::exp(row[i] - maxv[i]) / denom[i];
        }
        for (std::size_t i = 0; i < plane; ++i) {
            const int t = target[i];
            if (t == ignore_value) {
                for (int c = 0; c < k; ++c)
                    out.grad_logits[static_cast<std::size_t>(c) * plane + i] = T{};
            } else {
                out.grad_logits[static_cast<std::size_t>(t) * plane + i] -= T{1};
            }
        }
    }

    out.counted_pixels = counted;
    if (reduction == Reduction::mean && counted > 0) {
        loss /= static_cast<double>(counted);
        if (want_grad) {
            const T inv = static_cast<T>(1.0 / static_cast<double>(counted));
            for (std::size_t i = 0; i < out.grad_logits.size(); ++i) out.grad_logits[i] *= inv;
        }
    }
    out.loss = loss;
    return out;
}

/// Episode loss components; total = l_q + l_s + lambda_mcl * l_seg.
struct LossBundle {
    double l_q = 0.0;
    double l_s = 0.0;
    double l_seg = 0.0;
    double lambda_mcl = 0.0;
    double total = 0.0;
};

inline LossBundle total_loss(double l_q, double l_s, double l_seg, double lambda_mcl) {
    if (lambda_mcl < 0.0) throw std::invalid_argument("total_loss: lambda_mcl must be >= 0");
    if (l_q < 0.0 || l_s < 0.0 || l_seg < 0.0)
        throw std::invalid_argument("total_loss: loss components must be >= 0");
    LossBundle b;
    b.l_q = l_q;
    b.l_s = l_s;
    b.l_seg = l_seg;
    b.lambda_mcl = lambda_mcl;
    b.total = l_q + l_s + lambda_mcl * l_seg;
    return b;
}

}  // namespace protoseg

// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "protoseg/layers.hpp"
#include "protoseg/tensor.hpp"

namespace protoseg {

enum class PrototypeSource { support, pseudo, fused, kshot };

/// Channel-space class descriptor obtained by masked average pooling.
template <typename T>
struct Prototype {
    std::vector<T> vector;
    PrototypeSource source = PrototypeSource::support;
    int class_id = 0;

    int dim() const { return static_cast<int>(vector.size()); }
};

inline std::size_t mask_foreground_count(const Tensor<std::uint8_t>& mask) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) ++n;
    return n;
}

/// Pools features already at mask resolution. Sums are accumulated in double
/// so float feature maps still pool to tight tolerances.
template <typename T>
Prototype<T> masked_average_pool_presized(const Tensor<T>& features,
                                          const Tensor<std::uint8_t>& mask, int class_id = 0,
                                          PrototypeSource source = PrototypeSource::support) {
    if (features.rank() != 3)
        throw std::invalid_argument("masked_average_pool: features must be [C,H,W]");
    if (mask.rank() != 2 || mask.dim(0) != features.dim(1) || mask.dim(1) != features.dim(2))
        throw std::invalid_argument("masked_average_pool: mask size must match feature size");
    const std::size_t count = mask_foreground_count(mask);
    if (count == 0)
        throw std::invalid_argument("masked_average_pool: mask has no foreground pixels");

    const int ch = features.dim(0);
    const std::size_t plane = static_cast<std::size_t>(features.dim(1)) * features.dim(2);
    Prototype<T> p;
    p.class_id = class_id;
    p.source = source;
    p.vector.resize(ch);
    for (int c = 0; c < ch; ++c) {
        const T* f = features.data() + static_cast<std::size_t>(c) * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i)
            if (mask[i]) acc += static_cast<double>(f[i]);
        p.vector[c] = static_cast<T>(acc / static_cast<double>(count));
    }
    return p;
}

/// Masked average pooling per the support-prototype rule: features are
/// bilinearly upsampled to the mask resolution, then averaged over the mask.
/// Implemented through the adjoint of the (linear) upsampling — the mask is
/// pulled back onto the feature grid once instead of interpolating every
/// channel — which computes the same functional in double precision.
template <typename T>
Prototype<T> masked_average_pool(const Tensor<T>& features, const Tensor<std::uint8_t>& mask,
                                 int class_id = 0,
                                 PrototypeSource source = PrototypeSource::support) {
    if (features.rank() != 3)
        throw std::invalid_argument("masked_average_pool: features must be [C,H,W]");
    if (mask.rank() != 2) throw std::invalid_argument("masked_average_pool: mask must be [H,W]");
    const std::size_t count = mask_foreground_count(mask);
    if (count == 0)
        throw std::invalid_argument("masked_average_pool: mask has no foreground pixels");

    Tensor<double> mask_plane({1, mask.dim(0), mask.dim(1)});
    for (std::size_t i = 0; i < mask.size(); ++i) mask_plane[i] = mask[i] ? 1.0 : 0.0;
    const Tensor<double> weights =
        resize_bilinear_backward(mask_plane, features.dim(1), features.dim(2));

    const int ch = features.dim(0);
    const std::size_t plane = static_cast<std::size_t>(features.dim(1)) * features.dim(2);
    Prototype<T> p;
    p.class_id = class_id;
    p.source = source;
    p.vector.resize(static_cast<std::size_t>(ch));
    const double inv = 1.0 / static_cast<double>(count);
    for (int c = 0; c < ch; ++c) {
        const T* f = features.data() + static_cast<std::size_t>(c) * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += weights[i] * static_cast<double>(f[i]);
        p.vector[static_cast<std::size_t>(c)] = static_cast<T>(acc * inv);
    }
    return p;
}

/// Gradient of masked_average_pool with respect to the (pre-upsample)
/// features, given the prototype gradient.
template <typename T>
Tensor<T> masked_average_pool_backward(const std::vector<T>& grad_proto,
                                       const Tensor<std::uint8_t>& mask, int feat_h, int feat_w) {
    const std::size_t count = mask_foreground_count(mask);
    if (count == 0)
        throw std::invalid_argument("masked_average_pool_backward: empty mask");
    const int ch = static_cast<int>(grad_proto.size());
    const int h = mask.dim(0), w = mask.dim(1);
    Tensor<T> gup({ch, h, w});
    const T inv = static_cast<T>(1.0 / static_cast<double>(count));
    for (int c = 0; c < ch; ++c) {
        const T g = grad_proto[static_cast<std::size_t>(c)] * inv;
        T* plane = gup.data() + static_cast<std::size_t>(c) * h * w;
        for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i)
            if (mask[i]) plane[i] = g;
    }
    return resize_bilinear_backward(gup, feat_h, feat_w);
}

/// Weighted combination of prototypes; uniform weights by default. A
/// singleton input is returned unchanged so k=1 reductions stay bit-exact.
template <typename T>
Prototype<T> fuse_prototypes(const std::vector<Prototype<T>>& protos,
                             const std::vector<double>* weights = nullptr) {
    if (protos.empty()) throw std::invalid_argument("fuse_prototypes: empty prototype list");
    const int dim = protos[0].dim();
    for (const auto& p : protos)
        if (p.dim() != dim) throw std::invalid_argument("fuse_prototypes: dimension mismatch");
    if (weights) {
        if (weights->size() != protos.size())
            throw std::invalid_argument("fuse_prototypes: weight count mismatch");
        double sum = 0.0;
        for (double w : *weights) {
            if (w < 0.0) throw std::invalid_argument("fuse_prototypes: negative weight");
            sum += w;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("fuse_prototypes: weights must sum to 1");
    }

    bool all_support = true;
    for (const auto& p : protos)
        if (p.source != PrototypeSource::support) all_support = false;

    Prototype<T> out;
    out.class_id = protos[0].class_id;
    out.source = all_support && protos.size() > 1 ? PrototypeSource::kshot
                                                  : PrototypeSource::fused;
    if (protos.size() == 1 && !weights) {
        out = protos[0];
        return out;
    }
    out.vector.assign(dim, T{});
    const double uniform = 1.0 / static_cast<double>(protos.size());
    for (std::size_t i = 0; i < protos.size(); ++i) {
        const double w = weights ? (*weights)[i] : uniform;
        for (int c = 0; c < dim; ++c)
            out.vector[c] += static_cast<T>(w) * protos[i].vector[c];
    }
    return out;
}

/// Spatially constant [C,h,w] map carrying the prototype at every location.
template <typename T>
Tensor<T> broadcast_prototype(const Prototype<T>& proto, int h, int w) {
    if (h < 1 || w < 1) throw std::invalid_argument("broadcast_prototype: bad spatial size");
    Tensor<T> out({proto.dim(), h, w});
    for (int c = 0; c < proto.dim(); ++c) {
        T* plane = out.data() + static_cast<std::size_t>(c) * h * w;
        const T v = proto.vector[static_cast<std::size_t>(c)];
        for (int i = 0; i < h * w; ++i) plane[i] = v;
    }
    return out;
}

/// Gradient of broadcast_prototype: spatial sum per channel.
template <typename T>
std::vector<T> broadcast_prototype_backward(const Tensor<T>& grad_map) {
    const int ch = grad_map.dim(0);
    const std::size_t plane = static_cast<std::size_t>(grad_map.dim(1)) * grad_map.dim(2);
    std::vector<T> g(ch, T{});
    for (int c = 0; c < ch; ++c) {
        const T* p = grad_map.data() + static_cast<std::size_t>(c) * plane;
        T acc{};
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
        g[static_cast<std::size_t>(c)] = acc;
    }
    return g;
}

}  // namespace protoseg

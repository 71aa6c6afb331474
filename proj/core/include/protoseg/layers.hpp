// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "protoseg/rng.hpp"
#include "protoseg/tensor.hpp"

namespace protoseg {

// ---------------------------------------------------------------------------
// Small GEMM kernels, row-major. Loops are k-blocked so the streamed operand
// tile stays in L1 across the reuse dimension, and unrolled 4x to cut the
// accumulator row's load/store traffic. Sizes here are feature-map scale
// (N = out_h*out_w, K = in_ch*k*k), far below the BLAS crossover.

namespace detail {
constexpr int kGemmBlock = 64;
}

/// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void gemm_accum(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int k0 = 0; k0 < k; k0 += detail::kGemmBlock) {
        const int k1 = std::min(k, k0 + detail::kGemmBlock);
        for (int i = 0; i < m; ++i) {
            T* crow = c + static_cast<std::size_t>(i) * n;
            const T* arow = a + static_cast<std::size_t>(i) * k;
            int kk = k0;
            for (; kk + 4 <= k1; kk += 4) {
                const T a0 = arow[kk], a1 = arow[kk + 1], a2 = arow[kk + 2], a3 = arow[kk + 3];
                const T* b0 = b + static_cast<std::size_t>(kk) * n;
                const T* b1 = b0 + n;
                const T* b2 = b1 + n;
                const T* b3 = b2 + n;
                for (int j = 0; j < n; ++j)
                    crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
            }
            for (; kk < k1; ++kk) {
                const T av = arow[kk];
                const T* brow = b + static_cast<std::size_t>(kk) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

/// C[M,N] += A[M,K] * B[N,K]^T. B is transposed into scratch first so the
/// multiply runs through the j-inner kernel instead of scalar dot reductions.
template <typename T>
void gemm_accum_nt(const T* a, const T* b, T* c, int m, int k, int n) {
    std::vector<T> bt(static_cast<std::size_t>(k) * n);
    for (int j = 0; j < n; ++j) {
        const T* brow = b + static_cast<std::size_t>(j) * k;
        for (int kk = 0; kk < k; ++kk) bt[static_cast<std::size_t>(kk) * n + j] = brow[kk];
    }
    gemm_accum(a, bt.data(), c, m, k, n);
}

/// C[K,N] += A[M,K]^T * B[M,N]
template <typename T>
void gemm_accum_tn(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int k0 = 0; k0 < k; k0 += detail::kGemmBlock) {
        const int k1 = std::min(k, k0 + detail::kGemmBlock);
        int i = 0;
        for (; i + 4 <= m; i += 4) {
            const T* a0 = a + static_cast<std::size_t>(i) * k;
            const T* a1 = a0 + k;
            const T* a2 = a1 + k;
            const T* a3 = a2 + k;
            const T* b0 = b + static_cast<std::size_t>(i) * n;
            const T* b1 = b0 + n;
            const T* b2 = b1 + n;
            const T* b3 = b2 + n;
            for (int kk = k0; kk < k1; ++kk) {
                const T w0 = a0[kk], w1 = a1[kk], w2 = a2[kk], w3 = a3[kk];
                T* crow = c + static_cast<std::size_t>(kk) * n;
                for (int j = 0; j < n; ++j)
                    crow[j] += w0 * b0[j] + w1 * b1[j] + w2 * b2[j] + w3 * b3[j];
            }
        }
        for (; i < m; ++i) {
            const T* arow = a + static_cast<std::size_t>(i) * k;
            const T* brow = b + static_cast<std::size_t>(i) * n;
            for (int kk = k0; kk < k1; ++kk) {
                const T av = arow[kk];
                T* crow = c + static_cast<std::size_t>(kk) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// 2D convolution with stride/padding/dilation, implemented as im2col + GEMM.

template <typename T>
class Conv2d {
public:
    Conv2d() = default;

    Conv2d(int in_ch, int out_ch, int kernel, int stride = 1, int pad = 0, int dilation = 1)
        : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
          dilation_(dilation),
          weight({out_ch, in_ch, kernel, kernel}),
          bias({out_ch}),
          grad_weight({out_ch, in_ch, kernel, kernel}),
          grad_bias({out_ch}) {
        if (in_ch < 1 || out_ch < 1 || kernel < 1 || stride < 1 || pad < 0 || dilation < 1)
            throw std::invalid_argument("Conv2d: invalid geometry");
    }

    /// kernel/2-scaled padding that preserves spatial size at stride 1.
    static Conv2d same(int in_ch, int out_ch, int kernel, int stride = 1, int dilation = 1) {
        return Conv2d(in_ch, out_ch, kernel, stride, dilation * (kernel - 1) / 2, dilation);
    }

    int in_channels() const { return in_ch_; }
    int out_channels() const { return out_ch_; }
    int kernel() const { return kernel_; }
    int stride() const { return stride_; }
    int padding() const { return pad_; }
    int dilation() const { return dilation_; }

    int out_dim(int in_dim) const {
        return (in_dim + 2 * pad_ - dilation_ * (kernel_ - 1) - 1) / stride_ + 1;
    }

    std::size_t param_count() const { return weight.size() + bias.size(); }

    /// Fan-in scaled normal init, zero biases.
    void init(Rng& rng) {
        const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch_) * kernel_ * kernel_));
        for (std::size_t i = 0; i < weight.size(); ++i)
            weight[i] = static_cast<T>(rng.normal(0.0, stddev));
        bias.zero();
    }

    struct Cache {
        std::vector<T> cols;  // [in_ch*k*k, out_h*out_w]
        int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
    };

    Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const {
        if (x.rank() != 3 || x.dim(0) != in_ch_)
            throw std::invalid_argument("Conv2d::forward: expected [" + std::to_string(in_ch_) +
                                        ",H,W] input, got " + x.shape_str());
        const int in_h = x.dim(1), in_w = x.dim(2);
        const int out_h = out_dim(in_h), out_w = out_dim(in_w);
        if (out_h < 1 || out_w < 1)
            throw std::invalid_argument("Conv2d::forward: input too small");

        Cache local;
        Cache& c = cache ? *cache : local;
        c.in_h = in_h;
        c.in_w = in_w;
        c.out_h = out_h;
        c.out_w = out_w;
        im2col(x, c);

        Tensor<T> y({out_ch_, out_h, out_w});
        const int cols_rows = in_ch_ * kernel_ * kernel_;
        const int spatial = out_h * out_w;
        for (int oc = 0; oc < out_ch_; ++oc) {
            T* row = y.data() + static_cast<std::size_t>(oc) * spatial;
            const T b = bias[oc];
            for (int j = 0; j < spatial; ++j) row[j] = b;
        }
        gemm_accum(weight.data(), c.cols.data(), y.data(), out_ch_, cols_rows, spatial);
        return y;
    }

    /// Accumulates parameter gradients and returns the input gradient.
    Tensor<T> backward(const Cache& cache, const Tensor<T>& grad_y) {
        const int spatial = cache.out_h * cache.out_w;
        const int cols_rows = in_ch_ * kernel_ * kernel_;
        if (grad_y.rank() != 3 || grad_y.dim(0) != out_ch_ || grad_y.dim(1) != cache.out_h ||
            grad_y.dim(2) != cache.out_w)
            throw std::invalid_argument("Conv2d::backward: grad shape mismatch");

        // dW += dY * cols^T ; db += row sums of dY
        gemm_accum_nt(grad_y.data(), cache.cols.data(), grad_weight.data(), out_ch_, spatial,
                      cols_rows);
        for (int oc = 0; oc < out_ch_; ++oc) {
            const T* row = grad_y.data() + static_cast<std::size_t>(oc) * spatial;
            T acc = 0;
            for (int j = 0; j < spatial; ++j) acc += row[j];
            grad_bias[oc] += acc;
        }

        // dCols = W^T * dY, then scatter back to the input grid.
        std::vector<T> grad_cols(static_cast<std::size_t>(cols_rows) * spatial, T{});
        gemm_accum_tn(weight.data(), grad_y.data(), grad_cols.data(), out_ch_, cols_rows, spatial);
        return col2im(grad_cols, cache);
    }

    Tensor<T> weight;
    Tensor<T> bias;
    Tensor<T> grad_weight;
    Tensor<T> grad_bias;

private:
    void im2col(const Tensor<T>& x, Cache& c) const {
        const int spatial = c.out_h * c.out_w;
        c.cols.assign(static_cast<std::size_t>(in_ch_) * kernel_ * kernel_ * spatial, T{});
        for (int ic = 0; ic < in_ch_; ++ic) {
            const T* plane = x.data() + static_cast<std::size_t>(ic) * c.in_h * c.in_w;
            for (int kh = 0; kh < kernel_; ++kh) {
                for (int kw = 0; kw < kernel_; ++kw) {
                    T* dst = c.cols.data() +
                             (static_cast<std::size_t>(ic) * kernel_ * kernel_ +
                              static_cast<std::size_t>(kh) * kernel_ + kw) * spatial;
                    for (int oy = 0; oy < c.out_h; ++oy) {
                        const int iy = oy * stride_ - pad_ + kh * dilation_;
                        if (iy < 0 || iy >= c.in_h) continue;
                        const T* src_row = plane + static_cast<std::size_t>(iy) * c.in_w;
                        T* dst_row = dst + static_cast<std::size_t>(oy) * c.out_w;
                        const int ix0 = -pad_ + kw * dilation_;
                        if (stride_ == 1) {
                            int ox_lo = std::max(0, -ix0);
                            int ox_hi = std::min(c.out_w, c.in_w - ix0);
                            for (int ox = ox_lo; ox < ox_hi; ++ox)
                                dst_row[ox] = src_row[ix0 + ox];
                        } else {
                            for (int ox = 0; ox < c.out_w; ++ox) {
                                const int ix = ix0 + ox * stride_;
                                if (ix >= 0 && ix < c.in_w) dst_row[ox] = src_row[ix];
                            }
                        }
                    }
                }
            }
        }
    }

    Tensor<T> col2im(const std::vector<T>& cols, const Cache& c) const {
        Tensor<T> gx({in_ch_, c.in_h, c.in_w});
        const int spatial = c.out_h * c.out_w;
        for (int ic = 0; ic < in_ch_; ++ic) {
            T* plane = gx.data() + static_cast<std::size_t>(ic) * c.in_h * c.in_w;
            for (int kh = 0; kh < kernel_; ++kh) {
                for (int kw = 0; kw < kernel_; ++kw) {
                    const T* src = cols.data() +
                                   (static_cast<std::size_t>(ic) * kernel_ * kernel_ +
                                    static_cast<std::size_t>(kh) * kernel_ + kw) * spatial;
                    for (int oy = 0; oy < c.out_h; ++oy) {
                        const int iy = oy * stride_ - pad_ + kh * dilation_;
                        if (iy < 0 || iy >= c.in_h) continue;
                        T* dst_row = plane + static_cast<std::size_t>(iy) * c.in_w;
                        const T* src_row = src + static_cast<std::size_t>(oy) * c.out_w;
                        for (int ox = 0; ox < c.out_w; ++ox) {
                            const int ix = -pad_ + kw * dilation_ + ox * stride_;
                            if (ix >= 0 && ix < c.in_w) dst_row[ix] += src_row[ox];
                        }
                    }
                }
            }
        }
        return gx;
    }

    int in_ch_ = 0, out_ch_ = 0, kernel_ = 0, stride_ = 1, pad_ = 0, dilation_ = 1;
};

// ---------------------------------------------------------------------------
// Elementwise / resampling primitives.

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{} ? x[i] : T{};
    return y;
}

/// Gradient through ReLU given the forward *output*.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& grad_y) {
    Tensor<T> gx(grad_y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] = y[i] > T{} ? grad_y[i] : T{};
    return gx;
}

/// 2x2 average pooling, stride 2; spatial dims must be even.
template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& x) {
    const int ch = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h % 2 || w % 2) throw std::invalid_argument("avg_pool2: odd spatial dims");
    Tensor<T> y({ch, h / 2, w / 2});
    for (int c = 0; c < ch; ++c)
        for (int oy = 0; oy < h / 2; ++oy)
            for (int ox = 0; ox < w / 2; ++ox)
                y.at(c, oy, ox) = static_cast<T>(0.25) *
                                  (x.at(c, 2 * oy, 2 * ox) + x.at(c, 2 * oy, 2 * ox + 1) +
                                   x.at(c, 2 * oy + 1, 2 * ox) + x.at(c, 2 * oy + 1, 2 * ox + 1));
    return y;
}

template <typename T>
Tensor<T> avg_pool2_backward(const Tensor<T>& grad_y) {
    const int ch = grad_y.dim(0), oh = grad_y.dim(1), ow = grad_y.dim(2);
    Tensor<T> gx({ch, oh * 2, ow * 2});
    for (int c = 0; c < ch; ++c)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                const T g = static_cast<T>(0.25) * grad_y.at(c, oy, ox);
                gx.at(c, 2 * oy, 2 * ox) = g;
                gx.at(c, 2 * oy, 2 * ox + 1) = g;
                gx.at(c, 2 * oy + 1, 2 * ox) = g;
                gx.at(c, 2 * oy + 1, 2 * ox + 1) = g;
            }
    return gx;
}

namespace detail {

struct LerpAxis {
    std::vector<int> lo, hi;
    std::vector<double> w_hi;  // weight for hi; lo takes 1 - w_hi
};

/// Half-pixel-center sample mapping with edge clamping.
inline LerpAxis make_lerp_axis(int in_dim, int out_dim) {
    LerpAxis ax;
    ax.lo.resize(out_dim);
    ax.hi.resize(out_dim);
    ax.w_hi.resize(out_dim);
    const double scale = static_cast<double>(in_dim) / out_dim;
    for (int o = 0; o < out_dim; ++o) {
        double s = (o + 0.5) * scale - 0.5;
        if (s < 0) s = 0;
        if (s > in_dim - 1) s = in_dim - 1;
        const int lo = static_cast<int>(std::floor(s));
        ax.lo[o] = lo;
        ax.hi[o] = std::min(lo + 1, in_dim - 1);
        ax.w_hi[o] = s - lo;
    }
    return ax;
}

}  // namespace detail

/// Bilinear resize of a [C,H,W] tensor to [C,out_h,out_w].
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int out_h, int out_w) {
    if (x.rank() != 3) throw std::invalid_argument("resize_bilinear: expected [C,H,W]");
    const int ch = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear: bad output size");
    const auto ay = detail::make_lerp_axis(in_h, out_h);
    const auto axx = detail::make_lerp_axis(in_w, out_w);

    Tensor<T> y({ch, out_h, out_w});
    for (int c = 0; c < ch; ++c) {
        const T* plane = x.data() + static_cast<std::size_t>(c) * in_h * in_w;
        T* out = y.data() + static_cast<std::size_t>(c) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            const T* row_lo = plane + static_cast<std::size_t>(ay.lo[oy]) * in_w;
            const T* row_hi = plane + static_cast<std::size_t>(ay.hi[oy]) * in_w;
            const double wy = ay.w_hi[oy];
            T* orow = out + static_cast<std::size_t>(oy) * out_w;
            for (int ox = 0; ox < out_w; ++ox) {
                const double wx = axx.w_hi[ox];
                const double top = (1 - wx) * row_lo[axx.lo[ox]] + wx * row_lo[axx.hi[ox]];
                const double bot = (1 - wx) * row_hi[axx.lo[ox]] + wx * row_hi[axx.hi[ox]];
                orow[ox] = static_cast<T>((1 - wy) * top + wy * bot);
            }
        }
    }
    return y;
}

/// Adjoint of resize_bilinear: scatters grad_y back onto an [C,in_h,in_w] grid.
template <typename T>
Tensor<T> resize_bilinear_backward(const Tensor<T>& grad_y, int in_h, int in_w) {
    const int ch = grad_y.dim(0), out_h = grad_y.dim(1), out_w = grad_y.dim(2);
    const auto ay = detail::make_lerp_axis(in_h, out_h);
    const auto axx = detail::make_lerp_axis(in_w, out_w);

    Tensor<T> gx({ch, in_h, in_w});
    for (int c = 0; c < ch; ++c) {
        T* plane = gx.data() + static_cast<std::size_t>(c) * in_h * in_w;
        const T* gy = grad_y.data() + static_cast<std::size_t>(c) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            const double wy = ay.w_hi[oy];
            T* row_lo = plane + static_cast<std::size_t>(ay.lo[oy]) * in_w;
            T* row_hi = plane + static_cast<std::size_t>(ay.hi[oy]) * in_w;
            const T* grow = gy + static_cast<std::size_t>(oy) * out_w;
            for (int ox = 0; ox < out_w; ++ox) {
                const double wx = axx.w_hi[ox];
                const T g = grow[ox];
                row_lo[axx.lo[ox]] += static_cast<T>((1 - wy) * (1 - wx)) * g;
                row_lo[axx.hi[ox]] += static_cast<T>((1 - wy) * wx) * g;
                row_hi[axx.lo[ox]] += static_cast<T>(wy * (1 - wx)) * g;
                row_hi[axx.hi[ox]] += static_cast<T>(wy * wx) * g;
            }
        }
    }
    return gx;
}

/// Concatenate two [C,H,W] tensors along channels.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw std::invalid_argument("concat_channels: spatial dims differ");
    Tensor<T> y({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.data(), a.data() + a.size(), y.data());
    std::copy(b.data(), b.data() + b.size(), y.data() + a.size());
    return y;
}

/// Splits a channel-concat gradient back into the two input gradients.
template <typename T>
void split_channels(const Tensor<T>& grad, int first_ch, Tensor<T>& grad_a, Tensor<T>& grad_b) {
    const int h = grad.dim(1), w = grad.dim(2);
    grad_a = Tensor<T>({first_ch, h, w});
    grad_b = Tensor<T>({grad.dim(0) - first_ch, h, w});
    std::copy(grad.data(), grad.data() + grad_a.size(), grad_a.data());
    std::copy(grad.data() + grad_a.size(), grad.data() + grad.size(), grad_b.data());
}

}  // namespace protoseg

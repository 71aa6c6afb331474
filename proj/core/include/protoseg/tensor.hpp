// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace protoseg {

/// Dense row-major tensor of rank 1..4. Shapes are dynamic; element access
/// is unchecked in release builds, so the hot loops below index through
/// data() directly.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(numel(shape_), T{});
    }

    Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

    static std::size_t numel(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw std::invalid_argument("tensor dimension must be nonnegative");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(int a) { return data_[static_cast<std::size_t>(a)]; }
    const T& at(int a) const { return data_[static_cast<std::size_t>(a)]; }

    T& at(int a, int b) { return data_[idx2(a, b)]; }
    const T& at(int a, int b) const { return data_[idx2(a, b)]; }

    T& at(int a, int b, int c) { return data_[idx3(a, b, c)]; }
    const T& at(int a, int b, int c) const { return data_[idx3(a, b, c)]; }

    T& at(int a, int b, int c, int d) { return data_[idx4(a, b, c, d)]; }
    const T& at(int a, int b, int c, int d) const { return data_[idx4(a, b, c, d)]; }

    void fill(T v) { data_.assign(data_.size(), v); }
    void zero() { fill(T{}); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    std::size_t idx2(int a, int b) const {
        return static_cast<std::size_t>(a) * shape_[1] + b;
    }
    std::size_t idx3(int a, int b, int c) const {
        return (static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c;
    }
    std::size_t idx4(int a, int b, int c, int d) const {
        return ((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d;
    }

    std::vector<int> shape_;
    std::vector<T> data_;
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
    Tensor<To> out(src.shape());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<To>(src[i]);
    return out;
}

template <typename T>
void add_inplace(Tensor<T>& dst, const Tensor<T>& src) {
    if (!dst.same_shape(src)) throw std::invalid_argument("add_inplace: shape mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void scale_inplace(Tensor<T>& t, T factor) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] *= factor;
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t[i] == t[i]) || t[i] > std::numeric_limits<T>::max() ||
            t[i] < std::numeric_limits<T>::lowest()) {
            return false;
        }
    }
    return true;
}

}  // namespace protoseg

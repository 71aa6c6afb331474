// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "protoseg/encoder.hpp"
#include "protoseg/fusion.hpp"
#include "protoseg/heads.hpp"

namespace protoseg {

/// Everything needed to rebuild the exact model graph. Serialized verbatim
/// into checkpoints.
struct ModelConfig {
    int image_size = 64;
    EncoderConfig encoder;
    std::vector<int> aspp_rates{1, 2, 4};
    bool use_pff = true;
    int multiclass_channels = 0;  // |C_train|+1 when the guidance branch exists, else 0
    Reduction reduction = Reduction::mean;

    int feature_dim() const { return encoder.feature_dim(); }

    void validate() const {
        encoder.validate();
        if (image_size < kEncoderStride || image_size % kEncoderStride != 0)
            throw std::invalid_argument("ModelConfig: image_size must be a positive multiple of 8");
        if (multiclass_channels == 1)
            throw std::invalid_argument("ModelConfig: multiclass_channels cannot be 1");
        if (aspp_rates.empty())
            throw std::invalid_argument("ModelConfig: aspp_rates must be nonempty");
    }
};

/// Named view of one parameter tensor and its gradient buffer.
template <typename T>
struct ParamRef {
    std::string name;
    std::string group;  // encoder | fusion | head_binary | head_multiclass
    Tensor<T>* value = nullptr;
    Tensor<T>* grad = nullptr;
};

/// The one-shot segmentation network: shared encoder, prototype fusion
/// (single conv or pyramid), binary ASPP head, and the optional multi-class
/// guidance head.
template <typename T>
class OneShotModel {
public:
    OneShotModel() = default;

    explicit OneShotModel(const ModelConfig& config) : cfg_(config) {
        cfg_.validate();
        encoder_ = Encoder<T>(cfg_.encoder);
        if (cfg_.use_pff)
            pff_.emplace(cfg_.feature_dim());
        else
            base_fusion_.emplace(cfg_.feature_dim());
        binary_head_ = AsppHead<T>(cfg_.feature_dim(), 2, cfg_.aspp_rates);
        if (cfg_.multiclass_channels > 0)
            multiclass_head_.emplace(cfg_.feature_dim(), cfg_.multiclass_channels, cfg_.aspp_rates);
    }

    const ModelConfig& config() const { return cfg_; }

    Encoder<T>& encoder() { return encoder_; }
    const Encoder<T>& encoder() const { return encoder_; }
    std::optional<BaseFusion<T>>& base_fusion() { return base_fusion_; }
    std::optional<PyramidFusion<T>>& pff() { return pff_; }
    const std::optional<BaseFusion<T>>& base_fusion() const { return base_fusion_; }
    const std::optional<PyramidFusion<T>>& pff() const { return pff_; }
    AsppHead<T>& binary_head() { return binary_head_; }
    const AsppHead<T>& binary_head() const { return binary_head_; }
    std::optional<AsppHead<T>>& multiclass_head() { return multiclass_head_; }
    const std::optional<AsppHead<T>>& multiclass_head() const { return multiclass_head_; }

    void init(Rng& rng) {
        encoder_.init(rng);
        if (base_fusion_) base_fusion_->init(rng);
        if (pff_) pff_->init(rng);
        binary_head_.init(rng);
        if (multiclass_head_) multiclass_head_->init(rng);
    }

    /// All parameters in a stable, name-addressable order.
    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        auto add_conv = [&out](const std::string& name, const std::string& group, Conv2d<T>& c) {
            out.push_back({name + ".weight", group, &c.weight, &c.grad_weight});
            out.push_back({name + ".bias", group, &c.bias, &c.grad_bias});
        };
        for (std::size_t s = 0; s < encoder_.stages().size(); ++s)
            add_conv("encoder.stage" + std::to_string(s), "encoder", encoder_.stages()[s]);
        if (base_fusion_) add_conv("fusion.base", "fusion", base_fusion_->conv());
        if (pff_) {
            add_conv("fusion.pff.reduce", "fusion", pff_->reduce());
            for (int i = 0; i < 3; ++i)
                add_conv("fusion.pff.scale" + std::to_string(i), "fusion",
                         pff_->scale_convs()[static_cast<std::size_t>(i)]);
            for (int b = 0; b < 2; ++b) {
                auto& blk = pff_->blocks()[static_cast<std::size_t>(b)];
                const std::string base = "fusion.pff.block" + std::to_string(b);
                add_conv(base + ".squeeze", "fusion", blk.squeeze);
                add_conv(base + ".mix", "fusion", blk.mix);
                add_conv(base + ".expand", "fusion", blk.expand);
            }
        }
        for (std::size_t i = 0; i < binary_head_.branches().size(); ++i)
            add_conv("head.binary.rate" + std::to_string(binary_head_.rates()[i]), "head_binary",
                     binary_head_.branches()[i]);
        if (multiclass_head_)
            for (std::size_t i = 0; i < multiclass_head_->branches().size(); ++i)
                add_conv("head.multiclass.rate" + std::to_string(multiclass_head_->rates()[i]),
                         "head_multiclass", multiclass_head_->branches()[i]);
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (const auto& p : params()) n += p.value->size();
        return n;
    }

    void zero_grads() {
        for (auto& p : params()) p.grad->zero();
    }

private:
    ModelConfig cfg_;
    Encoder<T> encoder_;
    std::optional<BaseFusion<T>> base_fusion_;
    std::optional<PyramidFusion<T>> pff_;
    AsppHead<T> binary_head_;
    std::optional<AsppHead<T>> multiclass_head_;
};

}  // namespace protoseg

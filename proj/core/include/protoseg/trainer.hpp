// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "protoseg/dataset.hpp"
#include "protoseg/model.hpp"
#include "protoseg/prototype.hpp"

namespace protoseg {

/// Polynomial decay: lr0 * (1 - iter/total)^power.
inline double poly_lr(long iter, long total, double lr0, double power) {
    if (total < 1) throw std::invalid_argument("poly_lr: total must be >= 1");
    if (iter < 0 || iter > total)
        throw std::invalid_argument("poly_lr: iter must lie in [0, total]");
    return lr0 * std::pow(1.0 - static_cast<double>(iter) / static_cast<double>(total), power);
}

/// Component toggles for the ablation arms.
struct TrainFlags {
    bool use_pff = true;
    bool use_mcl = true;
    bool use_spt = true;
    bool freeze_encoder = false;
};

struct TrainConfig {
    int episodes = 20000;
    double lr0 = 2.5e-4;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double poly_power = 0.9;
    int batch_size = 1;
    double lambda_mcl = 0.1;
    std::uint64_t seed = 0;
    TrainFlags flags;
    Reduction reduction = Reduction::mean;
    int val_interval = 1000;  // 0 disables periodic validation
    int val_episodes = 20;

    void validate() const {
        if (episodes < 1) throw std::invalid_argument("TrainConfig: episodes must be >= 1");
        if (lr0 <= 0.0) throw std::invalid_argument("TrainConfig: lr0 must be > 0");
        if (poly_power <= 0.0) throw std::invalid_argument("TrainConfig: poly_power must be > 0");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (lambda_mcl < 0.0) throw std::invalid_argument("TrainConfig: lambda_mcl must be >= 0");
        if (momentum < 0.0 || momentum >= 1.0)
            throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
        if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
    }
};

/// SGD with momentum; weight decay enters the gradient as classic
/// loss-coupled L2 (g += wd * p) before the momentum update.
template <typename T>
class SgdOptimizer {
public:
    SgdOptimizer(std::vector<ParamRef<T>> params, double momentum, double weight_decay)
        : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
        for (const auto& p : params_) velocity_.emplace_back(p.value->shape());
    }

    void step(double lr, double grad_scale = 1.0) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            T* v = velocity_[i].data();
            T* value = params_[i].value->data();
            const T* grad = params_[i].grad->data();
            const std::size_t n = params_[i].value->size();
            const T mu = static_cast<T>(momentum_);
            const T wd = static_cast<T>(weight_decay_);
            const T gs = static_cast<T>(grad_scale);
            const T eta = static_cast<T>(lr);
            for (std::size_t j = 0; j < n; ++j) {
                const T g = grad[j] * gs + wd * value[j];
                v[j] = mu * v[j] + g;
                value[j] -= eta * v[j];
            }
        }
    }

    const std::vector<ParamRef<T>>& params() const { return params_; }

private:
    std::vector<ParamRef<T>> params_;
    std::vector<Tensor<T>> velocity_;
    double momentum_ = 0.9;
    double weight_decay_ = 0.0;
};

/// Maps a dense label map onto the multi-class head's channel indexing:
/// background 0, train classes 1..|C_train| in split order, ignore passes
/// through. A foreground class outside the train split is a contract error.
inline Tensor<std::uint8_t> multiclass_target(const Tensor<std::uint8_t>& label_map,
                                              const SplitConfig& split) {
    int lut[256];
    for (int i = 0; i < 256; ++i) lut[i] = -1;
    lut[0] = 0;
    lut[kIgnoreLabel] = kIgnoreLabel;
    for (std::size_t i = 0; i < split.train_classes.size(); ++i)
        lut[split.train_classes[i]] = static_cast<int>(i) + 1;

    Tensor<std::uint8_t> out(label_map.shape());
    for (std::size_t i = 0; i < label_map.size(); ++i) {
        const int mapped = lut[label_map[i]];
        if (mapped < 0)
            throw std::invalid_argument("multiclass_target: label " +
                                        std::to_string(label_map[i]) +
                                        " is not a train class of this split");
        out[i] = static_cast<std::uint8_t>(mapped);
    }
    return out;
}

template <typename T>
Tensor<T> flip_horizontal(const Tensor<T>& t) {
    Tensor<T> out(t.shape());
    if (t.rank() == 2) {
        const int h = t.dim(0), w = t.dim(1);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(y, x) = t.at(y, w - 1 - x);
    } else if (t.rank() == 3) {
        const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) out.at(ch, y, x) = t.at(ch, y, w - 1 - x);
    } else {
        throw std::invalid_argument("flip_horizontal: rank must be 2 or 3");
    }
    return out;
}

/// One episode's tensors after augmentation, ready for the loss graph.
template <typename T>
struct EpisodeInputs {
    Tensor<T> support_image, query_image;
    Tensor<std::uint8_t> support_mask, query_mask;
    Tensor<std::uint8_t> support_mc, query_mc;  // populated only when MCL is on
};

/// Builds EpisodeInputs from a k=1 episode, applying an independent random
/// horizontal flip jointly to each image/annotation pair.
template <typename T>
EpisodeInputs<T> prepare_episode(const Episode& episode, const SplitConfig& split, bool use_mcl,
                                 Rng* flip_rng) {
    if (episode.supports.size() != 1)
        throw std::invalid_argument("prepare_episode: training episodes are one-shot (k=1)");
    EpisodeInputs<T> in;
    const SupportPair& sp = episode.supports[0];
    const bool flip_s = flip_rng ? flip_rng->coin(0.5) : false;
    const bool flip_q = flip_rng ? flip_rng->coin(0.5) : false;

    in.support_image = flip_s ? flip_horizontal(tensor_cast<T>(sp.image)) : tensor_cast<T>(sp.image);
    in.support_mask = flip_s ? flip_horizontal(sp.mask) : sp.mask;
    in.query_image =
        flip_q ? flip_horizontal(tensor_cast<T>(episode.query_image)) : tensor_cast<T>(episode.query_image);
    in.query_mask = flip_q ? flip_horizontal(episode.query_mask) : episode.query_mask;
    if (use_mcl) {
        const Tensor<std::uint8_t> mc_s = multiclass_target(sp.label_map, split);
        const Tensor<std::uint8_t> mc_q = multiclass_target(episode.query_label_map, split);
        in.support_mc = flip_s ? flip_horizontal(mc_s) : mc_s;
        in.query_mc = flip_q ? flip_horizontal(mc_q) : mc_q;
    }
    return in;
}

/// Full episodic objective: query branch, optional self-prototype support
/// branch, optional multi-class guidance on both feature maps. When
/// `backprop` is set, parameter gradients are accumulated into the model
/// (call model.zero_grads() first).
template <typename T>
LossBundle episode_loss(OneShotModel<T>& model, const EpisodeInputs<T>& in,
                        const TrainFlags& flags, double lambda_mcl, bool backprop) {
    const int img_h = in.query_image.dim(1);
    const int img_w = in.query_image.dim(2);
    const Reduction reduction = model.config().reduction;

    typename Encoder<T>::Cache enc_s_cache, enc_q_cache;
    const Tensor<T> feat_s = model.encoder().forward(in.support_image, &enc_s_cache);
    const Tensor<T> feat_q = model.encoder().forward(in.query_image, &enc_q_cache);
    const int fh = feat_s.dim(1), fw = feat_s.dim(2);

    const Prototype<T> proto = masked_average_pool(feat_s, in.support_mask);

    typename BaseFusion<T>::Cache base_q_cache, base_s_cache;
    typename PyramidFusion<T>::Cache pff_q_cache, pff_s_cache;
    typename AsppHead<T>::Cache head_q_cache, head_s_cache, mc_q_cache, mc_s_cache;

    auto fuse = [&](const Tensor<T>& feat, typename BaseFusion<T>::Cache& bc,
                    typename PyramidFusion<T>::Cache& pc) {
        return model.config().use_pff ? model.pff()->fuse(feat, proto, &pc)
                                      : model.base_fusion()->fuse(feat, proto, &bc);
    };

    // Query branch.
    const Tensor<T> fused_q = fuse(feat_q, base_q_cache, pff_q_cache);
    const Tensor<T> logits_q_lr = model.binary_head().forward_lowres(fused_q, &head_q_cache);
    const Tensor<T> logits_q = resize_bilinear(logits_q_lr, img_h, img_w);
    const auto ce_q = cross_entropy_mask(logits_q, in.query_mask, kIgnoreLabel, reduction, backprop);

    // Self-prototype support branch.
    double l_s = 0.0;
    Tensor<T> fused_s, logits_s_lr;
    CrossEntropyResult<T> ce_s;
    if (flags.use_spt) {
        fused_s = fuse(feat_s, base_s_cache, pff_s_cache);
        logits_s_lr = model.binary_head().forward_lowres(fused_s, &head_s_cache);
        const Tensor<T> logits_s = resize_bilinear(logits_s_lr, img_h, img_w);
        ce_s = cross_entropy_mask(logits_s, in.support_mask, kIgnoreLabel, reduction, backprop);
        l_s = ce_s.loss;
    }

    // Multi-class guidance on both feature maps, parameter-shared head.
    double l_seg = 0.0;
    Tensor<T> mc_q_lr, mc_s_lr;
    CrossEntropyResult<T> ce_mc_q, ce_mc_s;
    const bool mcl = flags.use_mcl && model.multiclass_head().has_value();
    if (flags.use_mcl && !model.multiclass_head().has_value())
        throw std::invalid_argument("episode_loss: use_mcl set but the model has no multiclass head");
    if (mcl) {
        mc_q_lr = model.multiclass_head()->forward_lowres(feat_q, &mc_q_cache);
        const Tensor<T> mc_q_logits = resize_bilinear(mc_q_lr, img_h, img_w);
        ce_mc_q = cross_entropy_mask(mc_q_logits, in.query_mc, kIgnoreLabel, reduction, backprop);
        mc_s_lr = model.multiclass_head()->forward_lowres(feat_s, &mc_s_cache);
        const Tensor<T> mc_s_logits = resize_bilinear(mc_s_lr, img_h, img_w);
        ce_mc_s = cross_entropy_mask(mc_s_logits, in.support_mc, kIgnoreLabel, reduction, backprop);
        l_seg = ce_mc_q.loss + ce_mc_s.loss;
    }

    const LossBundle bundle = total_loss(ce_q.loss, l_s, l_seg, lambda_mcl);
    if (!backprop) return bundle;

    // Backward. Feature and prototype gradients accumulate across branches
    // before the encoder and pooling adjoints run.
    Tensor<T> grad_feat_q({feat_q.dim(0), fh, fw});
    Tensor<T> grad_feat_s({feat_s.dim(0), fh, fw});
    std::vector<T> grad_proto(static_cast<std::size_t>(proto.dim()), T{});

    auto fuse_backward = [&](typename BaseFusion<T>::Cache& bc,
                             typename PyramidFusion<T>::Cache& pc, const Tensor<T>& grad_fused,
                             Tensor<T>& grad_feat) {
        const Tensor<T> grad_concat = model.config().use_pff
                                          ? model.pff()->backward(pc, grad_fused)
                                          : model.base_fusion()->backward(bc, grad_fused);
        Tensor<T> gf, gb;
        split_channels(grad_concat, feat_q.dim(0), gf, gb);
        add_inplace(grad_feat, gf);
        const std::vector<T> gp = broadcast_prototype_backward(gb);
        for (std::size_t c = 0; c < gp.size(); ++c) grad_proto[c] += gp[c];
    };

    {
        const Tensor<T> g_lr = resize_bilinear_backward(ce_q.grad_logits, fh, fw);
        const Tensor<T> g_fused = model.binary_head().backward_lowres(head_q_cache, g_lr);
        fuse_backward(base_q_cache, pff_q_cache, g_fused, grad_feat_q);
    }
    if (flags.use_spt) {
        const Tensor<T> g_lr = resize_bilinear_backward(ce_s.grad_logits, fh, fw);
        const Tensor<T> g_fused = model.binary_head().backward_lowres(head_s_cache, g_lr);
        fuse_backward(base_s_cache, pff_s_cache, g_fused, grad_feat_s);
    }
    if (mcl) {
        Tensor<T> gq = ce_mc_q.grad_logits;
        scale_inplace(gq, static_cast<T>(lambda_mcl));
        add_inplace(grad_feat_q, model.multiclass_head()->backward_lowres(
                                     mc_q_cache, resize_bilinear_backward(gq, fh, fw)));
        Tensor<T> gs = ce_mc_s.grad_logits;
        scale_inplace(gs, static_cast<T>(lambda_mcl));
        add_inplace(grad_feat_s, model.multiclass_head()->backward_lowres(
                                     mc_s_cache, resize_bilinear_backward(gs, fh, fw)));
    }

    // Prototype gradient flows back into the support features.
    add_inplace(grad_feat_s,
                masked_average_pool_backward<T>(grad_proto, in.support_mask, fh, fw));

    if (!flags.freeze_encoder) {
        model.encoder().backward(enc_q_cache, grad_feat_q);
        model.encoder().backward(enc_s_cache, grad_feat_s);
    }
    return bundle;
}

/// Single optimizer update on one episode (augmentation included).
LossBundle train_step(OneShotModel<float>& model, SgdOptimizer<float>& optimizer,
                      const Episode& episode, double lr, const TrainConfig& config,
                      const SplitConfig& split, Rng& rng);

struct TrainRecord {
    int episode = 0;
    double lr = 0.0;
    LossBundle losses;
};

struct ValidationRecord {
    int episode = 0;
    double mean_iou = 0.0;
};

struct TrainingResult {
    OneShotModel<float> model;
    ModelConfig model_config;
    TrainConfig train_config;
    SplitConfig split;
    std::vector<TrainRecord> trace;
    std::vector<ValidationRecord> validation;
};

ModelConfig default_model_config(const Dataset& dataset, const SplitConfig& split,
                                 const TrainConfig& config);

/// Episodic training with the polynomial schedule; deterministic for a fixed
/// seed. Validation episodes are drawn from held-in train classes on an
/// independent stream.
TrainingResult run_training(const Dataset& dataset, const SplitConfig& split,
                            const TrainConfig& config);

}  // namespace protoseg

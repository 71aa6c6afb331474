// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "protoseg/inference.hpp"

#include <stdexcept>

namespace protoseg {

Tensor<std::uint8_t> argmax_mask(const Tensor<float>& logits) {
    if (logits.rank() != 3 || logits.dim(0) != 2)
        throw std::invalid_argument("argmax_mask: expected [2,H,W] logits");
    const int h = logits.dim(1), w = logits.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor<std::uint8_t> mask({h, w});
    const float* bg = logits.data();
    const float* fg = logits.data() + plane;
    for (std::size_t i = 0; i < plane; ++i) mask[i] = fg[i] > bg[i] ? 1 : 0;
    return mask;
}

PredMask classify_with_prototype(const OneShotModel<float>& model,
                                 const Tensor<float>& query_features,
                                 const Prototype<float>& proto, int out_h, int out_w,
                                 int pass_index) {
    const Tensor<float> fused = model.config().use_pff
                                    ? model.pff()->fuse(query_features, proto)
                                    : model.base_fusion()->fuse(query_features, proto);
    PredMask out;
    out.logits = model.binary_head().forward(fused, out_h, out_w);
    out.mask = argmax_mask(out.logits);
    out.pass_index = pass_index;
    return out;
}

namespace {

void require_one_shot(const Episode& episode, const char* where) {
    if (episode.supports.size() != 1)
        throw std::invalid_argument(std::string(where) + ": expected a k=1 episode, got k=" +
                                    std::to_string(episode.supports.size()));
}

}  // namespace

PredMask segment_support_guided(const OneShotModel<float>& model, const Episode& episode) {
    require_one_shot(episode, "segment_support_guided");
    const SupportPair& sp = episode.supports[0];
    const Tensor<float> feat_s = model.encoder().forward(sp.image);
    const Tensor<float> feat_q = model.encoder().forward(episode.query_image);
    const Prototype<float> proto =
        masked_average_pool(feat_s, sp.mask, episode.target_class, PrototypeSource::support);
    return classify_with_prototype(model, feat_q, proto, episode.query_image.dim(1),
                                   episode.query_image.dim(2), 1);
}

namespace {

/// Shared two-pass body. `keep_support` selects fused (support averaged in)
/// versus pseudo-only guidance for the second pass.
PredMask two_pass(const OneShotModel<float>& model, const Episode& episode, bool keep_support) {
    require_one_shot(episode, "segment_prototype_fused");
    const SupportPair& sp = episode.supports[0];
    const int out_h = episode.query_image.dim(1);
    const int out_w = episode.query_image.dim(2);

    const Tensor<float> feat_s = model.encoder().forward(sp.image);
    const Tensor<float> feat_q = model.encoder().forward(episode.query_image);
    const Prototype<float> support_proto =
        masked_average_pool(feat_s, sp.mask, episode.target_class, PrototypeSource::support);

    PredMask pass1 = classify_with_prototype(model, feat_q, support_proto, out_h, out_w, 1);
    if (mask_foreground_count(pass1.mask) == 0) {
        pass1.used_fallback = true;
        return pass1;
    }

    const Prototype<float> pseudo_proto =
        masked_average_pool(feat_q, pass1.mask, episode.target_class, PrototypeSource::pseudo);
    if (keep_support) {
        const Prototype<float> fused = fuse_prototypes<float>({support_proto, pseudo_proto});
        return classify_with_prototype(model, feat_q, fused, out_h, out_w, 2);
    }
    return classify_with_prototype(model, feat_q, pseudo_proto, out_h, out_w, 2);
}

}  // namespace

PredMask segment_prototype_fused(const OneShotModel<float>& model, const Episode& episode) {
    return two_pass(model, episode, true);
}

const char* prototype_mode_name(PrototypeMode mode) {
    switch (mode) {
        case PrototypeMode::support: return "support";
        case PrototypeMode::pseudo: return "pseudo";
        case PrototypeMode::fused: return "fused";
    }
    return "?";
}

PrototypeMode prototype_mode_from_name(const std::string& name) {
    if (name == "support") return PrototypeMode::support;
    if (name == "pseudo") return PrototypeMode::pseudo;
    if (name == "fused") return PrototypeMode::fused;
    throw std::invalid_argument("unknown prototype mode: " + name);
}

PredMask segment_episode(const OneShotModel<float>& model, const Episode& episode,
                         PrototypeMode mode) {
    switch (mode) {
        case PrototypeMode::support: return segment_support_guided(model, episode);
        case PrototypeMode::pseudo: return two_pass(model, episode, false);
        case PrototypeMode::fused: return segment_prototype_fused(model, episode);
    }
    throw std::invalid_argument("segment_episode: bad mode");
}

PredMask segment_kshot(const OneShotModel<float>& model, const Episode& episode,
                       bool include_pseudo) {
    if (episode.supports.empty())
        throw std::invalid_argument("segment_kshot: episode has no supports");
    const int out_h = episode.query_image.dim(1);
    const int out_w = episode.query_image.dim(2);

    std::vector<Prototype<float>> protos;
    protos.reserve(episode.supports.size());
    for (const SupportPair& sp : episode.supports) {
        const Tensor<float> feat = model.encoder().forward(sp.image);
        protos.push_back(
            masked_average_pool(feat, sp.mask, episode.target_class, PrototypeSource::support));
    }
    const Tensor<float> feat_q = model.encoder().forward(episode.query_image);
    const Prototype<float> averaged = fuse_prototypes(protos);

    PredMask pass1 = classify_with_prototype(model, feat_q, averaged, out_h, out_w, 1);
    if (!include_pseudo) return pass1;
    if (mask_foreground_count(pass1.mask) == 0) {
        pass1.used_fallback = true;
        return pass1;
    }

    const Prototype<float> pseudo_proto =
        masked_average_pool(feat_q, pass1.mask, episode.target_class, PrototypeSource::pseudo);
    std::vector<Prototype<float>> all = protos;
    all.push_back(pseudo_proto);
    const Prototype<float> fused = fuse_prototypes(all);
    return classify_with_prototype(model, feat_q, fused, out_h, out_w, 2);
}

}  // namespace protoseg

// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "protoseg/dataset.hpp"
#include "protoseg/model.hpp"
#include "protoseg/prototype.hpp"

namespace protoseg {

/// Binary prediction for one query image. mask is the channel argmax of the
/// stored full-resolution logits, ties resolved to background.
struct PredMask {
    Tensor<std::uint8_t> mask;
    Tensor<float> logits;  // [2, H, W]
    int pass_index = 1;
    bool used_fallback = false;
};

/// Argmax over the two logit channels; exact ties go to background.
Tensor<std::uint8_t> argmax_mask(const Tensor<float>& logits);

/// Fuse the query features with a prototype and classify. The shared
/// primitive under every inference arm; pass_index is recorded verbatim.
PredMask classify_with_prototype(const OneShotModel<float>& model,
                                 const Tensor<float>& query_features, const Prototype<float>& proto,
                                 int out_h, int out_w, int pass_index);

/// Single-pass segmentation guided by the support prototype (k = 1).
PredMask segment_support_guided(const OneShotModel<float>& model, const Episode& episode);

/// Two-pass segmentation: the first-pass mask becomes a pseudo-mask, the
/// pseudo-prototype is averaged with the support prototype, and the query is
/// re-classified. An empty first-pass mask falls back to the first pass.
PredMask segment_prototype_fused(const OneShotModel<float>& model, const Episode& episode);

enum class PrototypeMode { support, pseudo, fused };

const char* prototype_mode_name(PrototypeMode mode);
PrototypeMode prototype_mode_from_name(const std::string& name);

/// support: one pass. pseudo: second pass guided by the pseudo-prototype
/// alone. fused: second pass guided by the averaged prototype.
PredMask segment_episode(const OneShotModel<float>& model, const Episode& episode,
                         PrototypeMode mode);

/// k-shot inference: average the k support prototypes; with include_pseudo,
/// run a first pass, extract the pseudo-prototype, and average all k+1
/// before the final pass. Reduces bit-exactly to the 1-shot paths at k = 1.
PredMask segment_kshot(const OneShotModel<float>& model, const Episode& episode,
                       bool include_pseudo);

}  // namespace protoseg

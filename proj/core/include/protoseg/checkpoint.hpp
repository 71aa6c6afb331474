// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "protoseg/model.hpp"
#include "protoseg/trainer.hpp"

namespace protoseg {

/// Versioned checkpoint container: a structured-text header (format
/// version, config snapshot, parameter manifest with names/shapes/offsets)
/// followed by raw little-endian float32 parameter blobs. Round-trips are
/// bit-exact.
struct LoadedCheckpoint {
    OneShotModel<float> model;
    ModelConfig model_config;
    TrainConfig train_config;
    SplitConfig split;
    std::vector<ValidationRecord> history;
    int episodes_completed = 0;
};

void save_checkpoint(const std::string& path, OneShotModel<float>& model,
                     const TrainConfig& train_config, const SplitConfig& split,
                     const std::vector<ValidationRecord>& history, int episodes_completed);

inline void save_checkpoint(const std::string& path, TrainingResult& result) {
    save_checkpoint(path, result.model, result.train_config, result.split, result.validation,
                    result.train_config.episodes);
}

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace protoseg

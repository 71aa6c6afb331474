// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "protoseg/dataset.hpp"
#include "protoseg/inference.hpp"
#include "protoseg/metrics.hpp"

namespace protoseg {

enum class AnnotationMode { dense, scribble, bbox };

const char* annotation_mode_name(AnnotationMode mode);
AnnotationMode annotation_mode_from_name(const std::string& name);

/// The runs x episodes evaluation protocol. Run r draws its episodes from an
/// independent stream derived from (seed, r), so runs are reproducible
/// regardless of execution order.
struct EvalConfig {
    int runs = 3;
    int episodes = 200;
    std::uint64_t seed = 0;
    int shots = 1;
    PrototypeMode prototype = PrototypeMode::fused;
    AnnotationMode annotation = AnnotationMode::dense;
    EpisodeAveraging averaging = EpisodeAveraging::split_accumulate;
};

struct EpisodeRecord {
    int run = 0;
    int index = 0;
    int class_id = 0;
    double iou = 0.0;
    int pass_index = 1;
    bool used_fallback = false;
};

struct EvalResult {
    std::vector<MetricsReport> per_run;
    MetricsReport aggregate;
    std::vector<EpisodeRecord> records;
    std::vector<PredMask> masks;  // populated only when keep_masks is set
};

EvalResult evaluate_model(const OneShotModel<float>& model, const Dataset& dataset,
                          const SplitConfig& split, const EvalConfig& config,
                          bool keep_masks = false);

/// CSV per the reporting schema: one row per (run, class) plus one aggregate
/// row per run and a final all-runs row.
/// Columns: split,class,tp,fp,fn,iou,mean_iou,binary_iou,runs,seed
std::string metrics_csv(const EvalResult& result, int split_index, std::uint64_t seed);

/// Human-readable structured-text summary of an evaluation.
std::string metrics_summary(const EvalResult& result, const EvalConfig& config, int split_index);

/// Per-episode structured-text records (episode id, class, IoU, pass used,
/// fallback flag).
std::string episode_records_text(const std::vector<EpisodeRecord>& records);

/// Writes predicted masks as single-channel PNGs (0 background,
/// 1 foreground) plus the per-episode record file into `dir`.
void export_masks(const std::string& dir, const EvalResult& result);

}  // namespace protoseg

// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "protoseg/tensor.hpp"

namespace protoseg {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
};

/// Pixel confusion between binary prediction and ground truth. Ground-truth
/// pixels equal to ignore_value (pass -1 to disable) are skipped.
ConfusionCounts confusion(const Tensor<std::uint8_t>& pred, const Tensor<std::uint8_t>& gt,
                          int ignore_value = -1);

/// tp / (tp + fp + fn); the empty-vs-empty case (0,0,0) is a perfect match
/// and pinned to 1.0.
double iou(const ConfusionCounts& c);

struct MetricsReport {
    std::map<int, double> per_class_iou;
    std::map<int, ConfusionCounts> per_class_counts;
    ConfusionCounts foreground_counts, background_counts;
    double mean_iou = 0.0;
    double binary_iou = 0.0;
    int runs = 1;
    int episodes_per_run = 0;
};

/// Split-level accumulation (default) divides once from accumulated counts;
/// the per-episode alternative averages per-episode IoUs and exists for
/// sensitivity analysis.
enum class EpisodeAveraging { split_accumulate, per_episode_mean };

class MetricsAccumulator {
public:
    explicit MetricsAccumulator(std::vector<int> valid_classes,
                                EpisodeAveraging averaging = EpisodeAveraging::split_accumulate);

    void add(const Tensor<std::uint8_t>& pred, const Tensor<std::uint8_t>& gt, int class_id,
             int ignore_value = -1);

    int episodes() const { return episodes_; }
    MetricsReport report() const;

private:
    std::vector<int> valid_classes_;
    EpisodeAveraging averaging_;
    std::map<int, ConfusionCounts> per_class_;
    std::map<int, std::pair<double, int>> per_class_episode_iou_;  // sum, count
    ConfusionCounts fg_, bg_;
    int episodes_ = 0;
};

/// Arithmetic mean of mean-IoU / binary-IoU across runs.
MetricsReport aggregate_runs(const std::vector<MetricsReport>& reports);

}  // namespace protoseg

// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "protoseg/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace protoseg {

ConfusionCounts confusion(const Tensor<std::uint8_t>& pred, const Tensor<std::uint8_t>& gt,
                          int ignore_value) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("confusion: shape mismatch");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (ignore_value >= 0 && gt[i] == ignore_value) continue;
        const bool p = pred[i] != 0;
        const bool g = gt[i] != 0;
        if (p && g)
            ++c.tp;
        else if (p && !g)
            ++c.fp;
        else if (!p && g)
            ++c.fn;
    }
    return c;
}

double iou(const ConfusionCounts& c) {
    const std::uint64_t denom = c.tp + c.fp + c.fn;
    if (denom == 0) return 1.0;
    return static_cast<double>(c.tp) / static_cast<double>(denom);
}

MetricsAccumulator::MetricsAccumulator(std::vector<int> valid_classes, EpisodeAveraging averaging)
    : valid_classes_(std::move(valid_classes)), averaging_(averaging) {}

void MetricsAccumulator::add(const Tensor<std::uint8_t>& pred, const Tensor<std::uint8_t>& gt,
                             int class_id, int ignore_value) {
    if (std::find(valid_classes_.begin(), valid_classes_.end(), class_id) == valid_classes_.end())
        throw std::invalid_argument("MetricsAccumulator: class " + std::to_string(class_id) +
                                    " is not an evaluation class of this split");
    const ConfusionCounts c = confusion(pred, gt, ignore_value);
    per_class_[class_id] += c;
    if (averaging_ == EpisodeAveraging::per_episode_mean) {
        auto& [sum, n] = per_class_episode_iou_[class_id];
        sum += iou(c);
        ++n;
    }

    // Binary protocol: foreground counts as-is, background counts from the
    // inverted masks over the same (non-ignored) pixels.
    fg_ += c;
    ConfusionCounts b;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (ignore_value >= 0 && gt[i] == ignore_value) continue;
        const bool p = pred[i] == 0;
        const bool g = gt[i] == 0;
        if (p && g)
            ++b.tp;
        else if (p && !g)
            ++b.fp;
        else if (!p && g)
            ++b.fn;
    }
    bg_ += b;
    ++episodes_;
}

MetricsReport MetricsAccumulator::report() const {
    MetricsReport r;
    r.per_class_counts = per_class_;
    r.foreground_counts = fg_;
    r.background_counts = bg_;
    r.runs = 1;
    r.episodes_per_run = episodes_;

    double sum = 0.0;
    for (const auto& [cls, counts] : per_class_) {
        double v;
        if (averaging_ == EpisodeAveraging::per_episode_mean) {
            const auto& [s, n] = per_class_episode_iou_.at(cls);
            v = n > 0 ? s / n : 1.0;
        } else {
            v = iou(counts);
        }
        r.per_class_iou[cls] = v;
        sum += v;
    }
    r.mean_iou = per_class_.empty() ? 0.0 : sum / static_cast<double>(per_class_.size());
    r.binary_iou = 0.5 * (iou(fg_) + iou(bg_));
    return r;
}

MetricsReport aggregate_runs(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate_runs: no reports");
    for (const auto& r : reports) {
        if (r.episodes_per_run != reports[0].episodes_per_run)
            throw std::invalid_argument("aggregate_runs: reports use different episode counts");
    }

    MetricsReport out;
    out.episodes_per_run = reports[0].episodes_per_run;
    out.runs = 0;
    double mean_sum = 0.0, binary_sum = 0.0;
    std::map<int, std::pair<double, int>> class_sums;
    for (const auto& r : reports) {
        out.runs += r.runs;
        mean_sum += r.mean_iou;
        binary_sum += r.binary_iou;
        for (const auto& [cls, v] : r.per_class_iou) {
            class_sums[cls].first += v;
            class_sums[cls].second += 1;
        }
        for (const auto& [cls, c] : r.per_class_counts) out.per_class_counts[cls] += c;
        out.foreground_counts += r.foreground_counts;
        out.background_counts += r.background_counts;
    }
    const double n = static_cast<double>(reports.size());
    out.mean_iou = mean_sum / n;
    out.binary_iou = binary_sum / n;
    for (const auto& [cls, sc] : class_sums)
        out.per_class_iou[cls] = sc.first / static_cast<double>(sc.second);
    return out;
}

}  // namespace protoseg

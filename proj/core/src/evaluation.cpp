// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "protoseg/evaluation.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "protoseg/png_io.hpp"
#include "protoseg/textconf.hpp"

namespace protoseg {

const char* annotation_mode_name(AnnotationMode mode) {
    switch (mode) {
        case AnnotationMode::dense: return "dense";
        case AnnotationMode::scribble: return "scribble";
        case AnnotationMode::bbox: return "bbox";
    }
    return "?";
}

AnnotationMode annotation_mode_from_name(const std::string& name) {
    if (name == "dense") return AnnotationMode::dense;
    if (name == "scribble") return AnnotationMode::scribble;
    if (name == "bbox") return AnnotationMode::bbox;
    throw std::invalid_argument("unknown annotation mode: " + name);
}

EvalResult evaluate_model(const OneShotModel<float>& model, const Dataset& dataset,
                          const SplitConfig& split, const EvalConfig& config, bool keep_masks) {
    if (config.runs < 1 || config.episodes < 1)
        throw std::invalid_argument("evaluate_model: runs and episodes must be >= 1");
    if (config.shots < 1) throw std::invalid_argument("evaluate_model: shots must be >= 1");
    if (config.shots > 1 && config.prototype == PrototypeMode::pseudo)
        throw std::invalid_argument("evaluate_model: pseudo-only guidance is a 1-shot arm");

    EvalResult result;
    for (int r = 0; r < config.runs; ++r) {
        Rng rng = Rng::derive(config.seed, static_cast<std::uint64_t>(r));
        MetricsAccumulator acc(split.test_classes, config.averaging);
        for (int e = 0; e < config.episodes; ++e) {
            Episode episode = sample_episode(dataset, split, Phase::test, config.shots, rng);
            if (config.annotation != AnnotationMode::dense) {
                const WeakMode weak = config.annotation == AnnotationMode::scribble
                                          ? WeakMode::scribble
                                          : WeakMode::bbox;
                for (auto& sp : episode.supports)
                    sp.mask = weaken_annotation(sp.mask, weak, rng);
            }

            PredMask pred;
            if (config.shots == 1) {
                pred = segment_episode(model, episode, config.prototype);
            } else {
                pred = segment_kshot(model, episode,
                                     config.prototype == PrototypeMode::fused);
            }

            acc.add(pred.mask, episode.query_mask, episode.target_class, kIgnoreLabel);
            const double ep_iou = iou(confusion(pred.mask, episode.query_mask, kIgnoreLabel));
            result.records.push_back(
                {r, e, episode.target_class, ep_iou, pred.pass_index, pred.used_fallback});
            if (keep_masks) result.masks.push_back(std::move(pred));
        }
        result.per_run.push_back(acc.report());
    }
    result.aggregate = aggregate_runs(result.per_run);
    return result;
}

namespace {

void append_row(std::string& csv, int split_index, const std::string& cls,
                const std::string& tp, const std::string& fp, const std::string& fn,
                const std::string& iou_s, double mean_iou, double binary_iou, int runs,
                std::uint64_t seed) {
    csv += std::to_string(split_index) + "," + cls + "," + tp + "," + fp + "," + fn + "," +
           iou_s + "," + format_double(mean_iou) + "," + format_double(binary_iou) + "," +
           std::to_string(runs) + "," + std::to_string(seed) + "\n";
}

}  // namespace

std::string metrics_csv(const EvalResult& result, int split_index, std::uint64_t seed) {
    std::string csv = "split,class,tp,fp,fn,iou,mean_iou,binary_iou,runs,seed\n";
    for (std::size_t r = 0; r < result.per_run.size(); ++r) {
        const MetricsReport& rep = result.per_run[r];
        for (const auto& [cls, counts] : rep.per_class_counts) {
            append_row(csv, split_index, std::to_string(cls), std::to_string(counts.tp),
                       std::to_string(counts.fp), std::to_string(counts.fn),
                       format_double(rep.per_class_iou.at(cls)), rep.mean_iou, rep.binary_iou, 1,
                       seed + r);
        }
    }
    append_row(csv, split_index, "all", "", "", "", "", result.aggregate.mean_iou,
               result.aggregate.binary_iou, result.aggregate.runs, seed);
    return csv;
}

std::string metrics_summary(const EvalResult& result, const EvalConfig& config, int split_index) {
    TextConfig t;
    t.set("split", split_index);
    t.set("protocol.runs", config.runs);
    t.set("protocol.episodes_per_run", config.episodes);
    t.set("protocol.seed", config.seed);
    t.set("protocol.shots", config.shots);
    t.set("protocol.prototype", std::string(prototype_mode_name(config.prototype)));
    t.set("protocol.annotation", std::string(annotation_mode_name(config.annotation)));
    for (std::size_t r = 0; r < result.per_run.size(); ++r) {
        const std::string base = "run" + std::to_string(r);
        t.set(base + ".mean_iou", result.per_run[r].mean_iou);
        t.set(base + ".binary_iou", result.per_run[r].binary_iou);
    }
    t.set("aggregate.mean_iou", result.aggregate.mean_iou);
    t.set("aggregate.binary_iou", result.aggregate.binary_iou);
    for (const auto& [cls, v] : result.aggregate.per_class_iou)
        t.set("aggregate.class_iou.c" + std::to_string(cls), v);
    return t.dump();
}

std::string episode_records_text(const std::vector<EpisodeRecord>& records) {
    std::string out;
    for (const auto& rec : records) {
        out += "episode: run=" + std::to_string(rec.run) + " index=" + std::to_string(rec.index) +
               " class=" + std::to_string(rec.class_id) + " iou=" + format_double(rec.iou) +
               " pass=" + std::to_string(rec.pass_index) +
               " fallback=" + (rec.used_fallback ? "true" : "false") + "\n";
    }
    return out;
}

void export_masks(const std::string& dir, const EvalResult& result) {
    namespace fs = std::filesystem;
    if (result.masks.size() != result.records.size())
        throw std::invalid_argument("export_masks: evaluation was run without keep_masks");
    fs::create_directories(dir);
    for (std::size_t i = 0; i < result.masks.size(); ++i) {
        const auto& rec = result.records[i];
        const auto& mask = result.masks[i].mask;
        PngImage img;
        img.width = mask.dim(1);
        img.height = mask.dim(0);
        img.channels = 1;
        img.pixels.assign(mask.data(), mask.data() + mask.size());
        char name[64];
        std::snprintf(name, sizeof(name), "mask_r%02d_e%05d.png", rec.run, rec.index);
        write_png((fs::path(dir) / name).string(), img);
    }
    std::ofstream rec_file(fs::path(dir) / "episodes.txt", std::ios::trunc);
    rec_file << episode_records_text(result.records);
}

}  // namespace protoseg

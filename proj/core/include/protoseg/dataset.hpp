// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "protoseg/rng.hpp"
#include "protoseg/tensor.hpp"

namespace protoseg {

/// Label value excluded from every loss and metric. The generator never
/// emits it; it exists so real-data adapters with void regions plug in
/// unchanged.
constexpr int kIgnoreLabel = 255;

/// One image plus its dense label map. Exactly one foreground class per
/// image (one-way setting); label 0 is background.
struct ImageSample {
    Tensor<float> image;        // [3, H, W], values on the 8-bit grid in [0, 1]
    Tensor<std::uint8_t> label_map;  // [H, W], 0 = background
    int class_id = 0;           // the single foreground class present
};

struct GenConfig {
    int num_classes = 16;      // must be divisible by 4
    int images_per_class = 50;
    int image_size = 64;       // must be divisible by 8
    std::uint64_t seed = 7;
};

/// Disjoint train/test class partition. test_classes is one contiguous
/// quarter of the class ids, train_classes is the remainder.
struct SplitConfig {
    int split_index = 0;  // 0..3
    std::vector<int> train_classes;
    std::vector<int> test_classes;
};

struct SupportPair {
    Tensor<float> image;            // [3, H, W]
    Tensor<std::uint8_t> mask;      // [H, W], values {0,1}
    Tensor<std::uint8_t> label_map; // [H, W], dense labels for the same image
    int sample_index = -1;
};

/// One sampled task: k annotated supports plus a query, all containing
/// target_class. The dense label maps ride along for the multi-class
/// guidance branch during training.
struct Episode {
    std::vector<SupportPair> supports;
    Tensor<float> query_image;
    Tensor<std::uint8_t> query_mask;
    Tensor<std::uint8_t> query_label_map;
    int query_index = -1;
    int target_class = 0;
};

enum class Phase { train, test };
enum class WeakMode { scribble, bbox };

std::vector<ImageSample> generate_dataset(const GenConfig& config);

SplitConfig make_splits(int num_classes, int split_index);

Tensor<std::uint8_t> binarize_mask(const Tensor<std::uint8_t>& label_map, int class_id);

/// Dataset with a class index for episode sampling.
struct Dataset {
    std::vector<ImageSample> samples;
    GenConfig config;
    std::map<int, std::vector<int>> by_class;

    static Dataset build(std::vector<ImageSample> samples, const GenConfig& config);
};

Episode sample_episode(const Dataset& dataset, const SplitConfig& split, Phase phase, int k,
                       Rng& rng);

/// Degrades a dense binary mask to a weak annotation. Scribble: a dilated
/// random walk inside the largest foreground component, capped at 20% of
/// the foreground. Bbox: the filled tight bounding box of one randomly
/// chosen connected component (8-connectivity).
Tensor<std::uint8_t> weaken_annotation(const Tensor<std::uint8_t>& mask, WeakMode mode, Rng& rng);

// Disk layout: <dir>/manifest.txt, <dir>/images/NNNNN.png (RGB),
// <dir>/labels/NNNNN.png (grayscale, pixel value = class id).
void save_dataset(const std::string& dir, const std::vector<ImageSample>& samples,
                  const GenConfig& config);
Dataset load_dataset(const std::string& dir);

}  // namespace protoseg

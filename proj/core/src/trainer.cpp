// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "protoseg/trainer.hpp"

#include "protoseg/evaluation.hpp"
#include "protoseg/inference.hpp"
#include "protoseg/metrics.hpp"

namespace protoseg {

LossBundle train_step(OneShotModel<float>& model, SgdOptimizer<float>& optimizer,
                      const Episode& episode, double lr, const TrainConfig& config,
                      const SplitConfig& split, Rng& rng) {
    model.zero_grads();
    const EpisodeInputs<float> inputs =
        prepare_episode<float>(episode, split, config.flags.use_mcl, &rng);
    const LossBundle bundle =
        episode_loss(model, inputs, config.flags, config.lambda_mcl, /*backprop=*/true);
    optimizer.step(lr);
    return bundle;
}

ModelConfig default_model_config(const Dataset& dataset, const SplitConfig& split,
                                 const TrainConfig& config) {
    ModelConfig mc;
    mc.image_size = dataset.config.image_size;
    mc.use_pff = config.flags.use_pff;
    mc.multiclass_channels =
        config.flags.use_mcl ? static_cast<int>(split.train_classes.size()) + 1 : 0;
    mc.reduction = config.reduction;
    return mc;
}

namespace {

/// Held-in validation: fresh episodes from train classes, support-guided
/// single pass. Never touches test classes.
double validation_mean_iou(const OneShotModel<float>& model, const Dataset& dataset,
                           const SplitConfig& split, int episodes, Rng& rng) {
    MetricsAccumulator acc(split.train_classes);
    for (int e = 0; e < episodes; ++e) {
        const Episode ep = sample_episode(dataset, split, Phase::train, 1, rng);
        const PredMask pred = segment_support_guided(model, ep);
        acc.add(pred.mask, ep.query_mask, ep.target_class, kIgnoreLabel);
    }
    return acc.report().mean_iou;
}

}  // namespace

TrainingResult run_training(const Dataset& dataset, const SplitConfig& split,
                            const TrainConfig& config) {
    config.validate();
    if (dataset.samples.empty()) throw std::invalid_argument("run_training: empty dataset");

    TrainingResult result;
    result.train_config = config;
    result.split = split;
    result.model_config = default_model_config(dataset, split, config);
    result.model = OneShotModel<float>(result.model_config);

    Rng init_rng = Rng::derive(config.seed, 0);
    result.model.init(init_rng);

    // Optimizer over the trainable groups only.
    std::vector<ParamRef<float>> trainable;
    for (auto& p : result.model.params()) {
        if (config.flags.freeze_encoder && p.group == "encoder") continue;
        trainable.push_back(p);
    }
    SgdOptimizer<float> optimizer(std::move(trainable), config.momentum, config.weight_decay);

    Rng episode_rng = Rng::derive(config.seed, 1);
    const long total_steps =
        (static_cast<long>(config.episodes) + config.batch_size - 1) / config.batch_size;

    result.trace.reserve(static_cast<std::size_t>(config.episodes));
    long step_index = 0;
    int in_batch = 0;
    result.model.zero_grads();
    double lr = poly_lr(0, total_steps, config.lr0, config.poly_power);

    for (int e = 0; e < config.episodes; ++e) {
        const Episode episode = sample_episode(dataset, split, Phase::train, 1, episode_rng);
        const EpisodeInputs<float> inputs =
            prepare_episode<float>(episode, split, config.flags.use_mcl, &episode_rng);
        const LossBundle bundle =
            episode_loss(result.model, inputs, config.flags, config.lambda_mcl, /*backprop=*/true);
        result.trace.push_back({e, lr, bundle});

        if (++in_batch == config.batch_size || e + 1 == config.episodes) {
            optimizer.step(lr, 1.0 / in_batch);
            result.model.zero_grads();
            in_batch = 0;
            ++step_index;
            if (step_index < total_steps)
                lr = poly_lr(step_index, total_steps, config.lr0, config.poly_power);
        }

        if (config.val_interval > 0 && (e + 1) % config.val_interval == 0) {
            Rng val_rng = Rng::derive(config.seed, 1000 + static_cast<std::uint64_t>(e));
            result.validation.push_back(
                {e + 1, validation_mean_iou(result.model, dataset, split, config.val_episodes,
                                            val_rng)});
        }
    }
    return result;
}

}  // namespace protoseg

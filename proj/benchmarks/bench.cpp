// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "protoseg/evaluation.hpp"
#include "protoseg/inference.hpp"
#include "protoseg/trainer.hpp"

using namespace protoseg;

namespace {

struct BenchFixture {
    Dataset dataset;
    SplitConfig split;
    OneShotModel<float> model;
    Episode episode;

    BenchFixture() {
        GenConfig gen;
        gen.num_classes = 16;
        gen.images_per_class = 8;
        gen.image_size = 64;
        gen.seed = 7;
        dataset = Dataset::build(generate_dataset(gen), gen);
        split = make_splits(16, 0);
        TrainConfig cfg;
        ModelConfig mc = default_model_config(dataset, split, cfg);
        model = OneShotModel<float>(mc);
        Rng rng(1);
        model.init(rng);
        Rng ep_rng(2);
        episode = sample_episode(dataset, split, Phase::train, 1, ep_rng);
    }
};

BenchFixture& fixture() {
    static BenchFixture fx;
    return fx;
}

}  // namespace

static void BM_EncoderForward(benchmark::State& state) {
    auto& fx = fixture();
    const Tensor<float> image = fx.episode.query_image;
    for (auto _ : state) {
        auto f = fx.model.encoder().forward(image);
        benchmark::DoNotOptimize(f.data());
    }
}
BENCHMARK(BM_EncoderForward);

static void BM_MaskedAveragePool(benchmark::State& state) {
    auto& fx = fixture();
    const Tensor<float> features = fx.model.encoder().forward(fx.episode.supports[0].image);
    for (auto _ : state) {
        auto p = masked_average_pool(features, fx.episode.supports[0].mask);
        benchmark::DoNotOptimize(p.vector.data());
    }
}
BENCHMARK(BM_MaskedAveragePool);

static void BM_PyramidFusion(benchmark::State& state) {
    auto& fx = fixture();
    const Tensor<float> features = fx.model.encoder().forward(fx.episode.query_image);
    const Prototype<float> proto =
        masked_average_pool(fx.model.encoder().forward(fx.episode.supports[0].image),
                            fx.episode.supports[0].mask);
    for (auto _ : state) {
        auto fused = fx.model.pff()->fuse(features, proto);
        benchmark::DoNotOptimize(fused.data());
    }
}
BENCHMARK(BM_PyramidFusion);

static void BM_TrainStep(benchmark::State& state) {
    auto& fx = fixture();
    TrainConfig cfg;
    SgdOptimizer<float> opt(fx.model.params(), cfg.momentum, cfg.weight_decay);
    Rng rng(3);
    for (auto _ : state) {
        const LossBundle b = train_step(fx.model, opt, fx.episode, 1e-4, cfg, fx.split, rng);
        benchmark::DoNotOptimize(b.total);
    }
}
BENCHMARK(BM_TrainStep);

static void BM_SupportGuidedInference(benchmark::State& state) {
    auto& fx = fixture();
    for (auto _ : state) {
        auto pred = segment_support_guided(fx.model, fx.episode);
        benchmark::DoNotOptimize(pred.mask.data());
    }
}
BENCHMARK(BM_SupportGuidedInference);

static void BM_PrototypeFusedInference(benchmark::State& state) {
    auto& fx = fixture();
    for (auto _ : state) {
        auto pred = segment_prototype_fused(fx.model, fx.episode);
        benchmark::DoNotOptimize(pred.mask.data());
    }
}
BENCHMARK(BM_PrototypeFusedInference);

static void BM_DatasetGeneration(benchmark::State& state) {
    GenConfig gen;
    gen.num_classes = 4;
    gen.images_per_class = static_cast<int>(state.range(0));
    gen.image_size = 64;
    gen.seed = 11;
    for (auto _ : state) {
        auto samples = generate_dataset(gen);
        benchmark::DoNotOptimize(samples.data());
    }
    state.SetItemsProcessed(state.iterations() * gen.num_classes * gen.images_per_class);
}
BENCHMARK(BM_DatasetGeneration)->Arg(2)->Arg(8);

BENCHMARK_MAIN();

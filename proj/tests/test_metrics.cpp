// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "protoseg/metrics.hpp"

using namespace protoseg;

namespace {

/// Exhaustive pixel enumeration oracle.
ConfusionCounts enumerate_confusion(const Tensor<std::uint8_t>& pred,
                                    const Tensor<std::uint8_t>& gt) {
    ConfusionCounts c;
    for (int y = 0; y < pred.dim(0); ++y) {
        for (int x = 0; x < pred.dim(1); ++x) {
            const int p = pred.at(y, x) ? 1 : 0;
            const int g = gt.at(y, x) ? 1 : 0;
            if (p == 1 && g == 1) ++c.tp;
            if (p == 1 && g == 0) ++c.fp;
            if (p == 0 && g == 1) ++c.fn;
        }
    }
    return c;
}

Tensor<std::uint8_t> mask_from_bits(std::uint16_t bits) {
    Tensor<std::uint8_t> m({4, 4});
    for (int i = 0; i < 16; ++i) m[static_cast<std::size_t>(i)] = (bits >> i) & 1;
    return m;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("confusion basics") {
    Rng rng(601);
    const auto gt = oracle::random_mask(6, 6, rng, 0.5);

    SUBCASE("pred == gt has no errors") {
        const auto c = confusion(gt, gt);
        CHECK(c.fp == 0);
        CHECK(c.fn == 0);
    }
    SUBCASE("pred == !gt has no true positives") {
        Tensor<std::uint8_t> inv(gt.shape());
        for (std::size_t i = 0; i < gt.size(); ++i) inv[i] = gt[i] ? 0 : 1;
        CHECK(confusion(inv, gt).tp == 0);
    }
    SUBCASE("shape mismatch rejected") {
        Tensor<std::uint8_t> other({5, 6});
        CHECK_THROWS(confusion(other, gt));
    }
    SUBCASE("ignored pixels are skipped") {
        Tensor<std::uint8_t> gt2 = gt;
        Tensor<std::uint8_t> pred(gt.shape());
        pred.fill(1);
        gt2[0] = 255;
        const auto with = confusion(pred, gt2, 255);
        const auto without = confusion(pred, gt2);
        CHECK(with.tp + with.fp + 1 == without.tp + without.fp);
    }
}

TEST_CASE("confusion and IoU match exhaustive enumeration on random 4x4 pairs") {
    Rng rng(602);
    for (int trial = 0; trial < 5000; ++trial) {
        const auto pred = mask_from_bits(static_cast<std::uint16_t>(rng.uniform_int(0, 65535)));
        const auto gt = mask_from_bits(static_cast<std::uint16_t>(rng.uniform_int(0, 65535)));
        const auto c = confusion(pred, gt);
        const auto ref = enumerate_confusion(pred, gt);
        REQUIRE(c.tp == ref.tp);
        REQUIRE(c.fp == ref.fp);
        REQUIRE(c.fn == ref.fn);

        // Symmetry: swapping pred and gt swaps fp and fn, leaving IoU fixed.
        const auto swapped = confusion(gt, pred);
        REQUIRE(swapped.tp == c.tp);
        REQUIRE(swapped.fp == c.fn);
        REQUIRE(iou(swapped) == iou(c));
        REQUIRE(iou(c) >= 0.0);
        REQUIRE(iou(c) <= 1.0);
    }
}

TEST_CASE("iou pinned values") {
    CHECK(iou({5, 0, 0}) == 1.0);
    CHECK(iou({1, 1, 1}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(iou({0, 0, 0}) == 1.0);  // empty-vs-empty convention
    CHECK(iou({0, 3, 2}) == 0.0);
}

TEST_CASE("split report: perfect predictions give IoU 1 everywhere") {
    Rng rng(603);
    MetricsAccumulator acc({1, 2, 3, 4});
    for (int e = 0; e < 12; ++e) {
        const auto gt = oracle::random_mask(8, 8, rng, 0.4);
        acc.add(gt, gt, 1 + e % 4);
    }
    const MetricsReport r = acc.report();
    CHECK(r.mean_iou == 1.0);
    CHECK(r.binary_iou == 1.0);
    for (const auto& [cls, v] : r.per_class_iou) CHECK(v == 1.0);
    CHECK(r.episodes_per_run == 12);
}

TEST_CASE("split report: unweighted average over classes") {
    MetricsAccumulator acc({1, 2});
    Tensor<std::uint8_t> ones({4, 4}), zeros({4, 4});
    ones.fill(1);
    acc.add(ones, ones, 1);   // class 1: IoU 1
    acc.add(zeros, ones, 2);  // class 2: IoU 0
    const MetricsReport r = acc.report();
    CHECK(r.per_class_iou.at(1) == 1.0);
    CHECK(r.per_class_iou.at(2) == 0.0);
    CHECK(r.mean_iou == doctest::Approx(0.5));
}

TEST_CASE("split report matches a from-scratch global recount oracle") {
    Rng rng(604);
    std::vector<std::tuple<Tensor<std::uint8_t>, Tensor<std::uint8_t>, int>> episodes;
    for (int e = 0; e < 40; ++e)
        episodes.emplace_back(oracle::random_mask(8, 8, rng, 0.4),
                              oracle::random_mask(8, 8, rng, 0.4), 1 + e % 3);

    MetricsAccumulator acc({1, 2, 3});
    for (const auto& [p, g, c] : episodes) acc.add(p, g, c);
    const MetricsReport r = acc.report();

    // Oracle: recount everything per class in one pass.
    for (int cls = 1; cls <= 3; ++cls) {
        ConfusionCounts total;
        for (const auto& [p, g, c] : episodes)
            if (c == cls) total += enumerate_confusion(p, g);
        CHECK(r.per_class_iou.at(cls) == doctest::Approx(iou(total)).epsilon(1e-15));
    }

    // Order invariance: shuffled episode order gives the identical report.
    MetricsAccumulator acc2({1, 2, 3});
    std::vector<std::size_t> order(episodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    for (std::size_t i : order) {
        const auto& [p, g, c] = episodes[i];
        acc2.add(p, g, c);
    }
    const MetricsReport r2 = acc2.report();
    CHECK(r2.mean_iou == r.mean_iou);
    CHECK(r2.binary_iou == r.binary_iou);
}

TEST_CASE("unknown class id is rejected") {
    MetricsAccumulator acc({1, 2});
    Tensor<std::uint8_t> m({4, 4});
    m.fill(1);
    CHECK_THROWS(acc.add(m, m, 7));
}

TEST_CASE("aggregate_runs") {
    MetricsReport a, b;
    a.mean_iou = 0.4;
    a.binary_iou = 0.5;
    a.episodes_per_run = 10;
    b.mean_iou = 0.6;
    b.binary_iou = 0.7;
    b.episodes_per_run = 10;

    SUBCASE("pair averages to the midpoint") {
        const auto agg = aggregate_runs({a, b});
        CHECK(agg.mean_iou == doctest::Approx(0.5));
        CHECK(agg.binary_iou == doctest::Approx(0.6));
        CHECK(agg.runs == 2);
    }
    SUBCASE("identical reports are unchanged") {
        const auto agg = aggregate_runs({a, a, a, a, a});
        CHECK(agg.mean_iou == doctest::Approx(a.mean_iou));
        CHECK(agg.binary_iou == doctest::Approx(a.binary_iou));
        CHECK(agg.runs == 5);
    }
    SUBCASE("empty input rejected") { CHECK_THROWS(aggregate_runs({})); }
}

TEST_CASE("per-episode averaging alternative") {
    MetricsAccumulator acc({1}, EpisodeAveraging::per_episode_mean);
    Tensor<std::uint8_t> ones({2, 2}), zeros({2, 2});
    ones.fill(1);
    acc.add(ones, ones, 1);   // episode IoU 1
    acc.add(zeros, ones, 1);  // episode IoU 0
    // Episode-mean: (1+0)/2; split-accumulate would give 4/8.
    CHECK(acc.report().per_class_iou.at(1) == doctest::Approx(0.5));
}

}  // TEST_SUITE

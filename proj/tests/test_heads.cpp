// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "oracles.hpp"
#include "protoseg/heads.hpp"

using namespace protoseg;

namespace {
constexpr int kIgnore = 255;
}

TEST_SUITE("heads") {

TEST_CASE("binary head shape: fused 64x8x8 up to 2x64x64") {
    Rng rng(501);
    AsppHead<float> head(64, 2);
    head.init(rng);
    const auto fused = oracle::random_tensor<float>({64, 8, 8}, rng);
    CHECK(head.forward(fused, 64, 64).shape() == std::vector<int>{2, 64, 64});
}

TEST_CASE("zero input with zero biases gives zero logits") {
    Rng rng(502);
    AsppHead<double> head(16, 2);
    head.init(rng);
    Tensor<double> zeros({16, 8, 8});
    const auto logits = head.forward(zeros, 64, 64);
    for (std::size_t i = 0; i < logits.size(); ++i) CHECK(logits[i] == 0.0);
}

TEST_CASE("single-rate head equals the plain dilated conv oracle") {
    Rng rng(503);
    for (int rate : {1, 2, 4}) {
        AsppHead<float> head(8, 2, {rate});
        head.init(rng);
        const auto x = oracle::random_tensor<float>({8, 8, 8}, rng);
        const auto y = head.forward_lowres(x);
        const auto& conv = head.branches()[0];
        const auto ref = oracle::conv2d(x, conv.weight, conv.bias, 1, rate, rate);
        for (std::size_t i = 0; i < y.size(); ++i)
            CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-5));
    }
}

TEST_CASE("multi-rate head equals the per-rate branch-sum oracle") {
    Rng rng(504);
    AsppHead<double> head(8, 5, {1, 2, 4});
    head.init(rng);
    const auto x = oracle::random_tensor<double>({8, 8, 8}, rng);
    const auto y = head.forward_lowres(x);
    Tensor<double> ref({5, 8, 8});
    for (std::size_t b = 0; b < head.branches().size(); ++b) {
        const auto& conv = head.branches()[b];
        const auto part = oracle::conv2d(x, conv.weight, conv.bias, 1, conv.padding(),
                                         conv.dilation());
        add_inplace(ref, part);
    }
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("multiclass head emits |C_train|+1 channels and shares parameters") {
    Rng rng(505);
    AsppHead<float> head(64, 13);  // 12 train classes + background
    head.init(rng);
    const auto features = oracle::random_tensor<float>({64, 8, 8}, rng);
    const auto a = head.forward(features, 64, 64);
    CHECK(a.shape() == std::vector<int>{13, 64, 64});
    // Same parameters applied to identical features give identical logits.
    const auto b = head.forward(features, 64, 64);
    CHECK(a == b);
}

TEST_CASE("cross entropy: saturated-correct logits give ~zero loss") {
    Tensor<float> logits({2, 4, 4});
    Tensor<std::uint8_t> target({4, 4});
    for (int i = 0; i < 16; ++i) {
        const int t = i % 2;
        target[i] = static_cast<std::uint8_t>(t);
        logits.data()[t * 16 + i] = 25.0f;  // margin >= 20
    }
    const auto r = cross_entropy_mask(logits, target, kIgnore, Reduction::sum);
    CHECK(r.loss < 1e-6);
    CHECK(r.loss >= 0.0);
}

TEST_CASE("cross entropy: uniform binary logits sum to P*ln2") {
    Tensor<double> logits({2, 8, 8});
    Tensor<std::uint8_t> target({8, 8});
    const auto r = cross_entropy_mask(logits, target, kIgnore, Reduction::sum);
    CHECK(r.loss == doctest::Approx(64.0 * std::log(2.0)).epsilon(1e-12));
    const auto m = cross_entropy_mask(logits, target, kIgnore, Reduction::mean);
    CHECK(m.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy matches the per-pixel oracle and finite differences") {
    Rng rng(506);
    auto logits = oracle::random_tensor<double>({5, 6, 6}, rng, -3.0, 3.0);
    Tensor<std::uint8_t> target({6, 6});
    for (std::size_t i = 0; i < target.size(); ++i)
        target[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 4));
    target[7] = kIgnore;
    target[20] = kIgnore;

    const auto r = cross_entropy_mask(logits, target, kIgnore, Reduction::sum, true);
    const double ref = oracle::cross_entropy(logits, target, kIgnore);
    CHECK(std::fabs(r.loss - ref) < 1e-7);
    CHECK(r.counted_pixels == 34);

    auto loss = [&]() {
        return cross_entropy_mask(logits, target, kIgnore, Reduction::sum).loss;
    };
    for (int t = 0; t < 10; ++t) {
        const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(logits.size()) - 1));
        const double fd = oracle::central_difference(loss, logits[i], 1e-6);
        if (std::fabs(fd) < 1e-10 && std::fabs(r.grad_logits[i]) < 1e-10) continue;
        CHECK(oracle::relative_error(fd, r.grad_logits[i]) < 1e-4);
    }
}

TEST_CASE("ignored pixels contribute exactly zero gradient") {
    Rng rng(507);
    auto logits = oracle::random_tensor<double>({3, 4, 4}, rng);
    Tensor<std::uint8_t> target({4, 4});
    target.fill(1);
    target[5] = kIgnore;

    const auto r = cross_entropy_mask(logits, target, kIgnore, Reduction::sum, true);
    auto loss = [&]() {
        return cross_entropy_mask(logits, target, kIgnore, Reduction::sum).loss;
    };
    for (int c = 0; c < 3; ++c) {
        const std::size_t idx = static_cast<std::size_t>(c) * 16 + 5;
        CHECK(r.grad_logits[idx] == 0.0);
        CHECK(std::fabs(oracle::central_difference(loss, logits[idx], 1e-6)) < 1e-12);
    }
}

TEST_CASE("cross entropy validation and invariances") {
    Rng rng(508);
    auto logits = oracle::random_tensor<double>({2, 4, 4}, rng);
    Tensor<std::uint8_t> target({4, 4});

    SUBCASE("target out of range") {
        target[3] = 2;
        CHECK_THROWS(cross_entropy_mask(logits, target, kIgnore, Reduction::sum));
    }
    SUBCASE("logit shift invariance at a pixel") {
        const double before = cross_entropy_mask(logits, target, kIgnore, Reduction::sum).loss;
        logits.at(0, 1, 1) += 7.5;
        logits.at(1, 1, 1) += 7.5;
        const double after = cross_entropy_mask(logits, target, kIgnore, Reduction::sum).loss;
        CHECK(std::fabs(before - after) < 1e-9);
    }
    SUBCASE("loss is nonnegative on random instances") {
        for (int t = 0; t < 20; ++t) {
            const auto l = oracle::random_tensor<double>({2, 3, 3}, rng, -10, 10);
            Tensor<std::uint8_t> tgt({3, 3});
            for (std::size_t i = 0; i < tgt.size(); ++i)
                tgt[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
            CHECK(cross_entropy_mask(l, tgt, kIgnore, Reduction::sum).loss >= 0.0);
        }
    }
}

TEST_CASE("softmax normalization: per-pixel probabilities sum to 1") {
    // The CE gradient at a pixel is softmax(logits) minus the target one-hot,
    // so adding 1 back at the target channel recovers the probabilities.
    Rng rng(509);
    const auto logits = oracle::random_tensor<double>({6, 5, 5}, rng, -4.0, 4.0);
    Tensor<std::uint8_t> target({5, 5});
    for (std::size_t i = 0; i < target.size(); ++i)
        target[i] = static_cast<std::uint8_t>(rng.uniform_int(0, 5));
    const auto r = cross_entropy_mask(logits, target, kIgnore, Reduction::sum, true);
    for (std::size_t i = 0; i < target.size(); ++i) {
        double sum = 1.0;  // the subtracted one-hot
        for (int c = 0; c < 6; ++c) sum += r.grad_logits[static_cast<std::size_t>(c) * 25 + i];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("total_loss composes the objective") {
    SUBCASE("the default weighting") {
        const LossBundle b = total_loss(1.0, 1.0, 1.0, 0.1);
        CHECK(b.total == doctest::Approx(2.1));
        CHECK(b.lambda_mcl == 0.1);
    }
    SUBCASE("lambda 0 drops the guidance term") {
        const LossBundle b = total_loss(0.7, 0.2, 5.0, 0.0);
        CHECK(b.total == doctest::Approx(0.9));
    }
    SUBCASE("total is affine in lambda") {
        const double lseg = 2.25;
        const LossBundle b1 = total_loss(0.4, 0.3, lseg, 0.05);
        const LossBundle b2 = total_loss(0.4, 0.3, lseg, 0.8);
        CHECK(b2.total - b1.total == doctest::Approx((0.8 - 0.05) * lseg).epsilon(1e-12));
    }
    SUBCASE("negative lambda rejected") { CHECK_THROWS(total_loss(1, 1, 1, -0.1)); }
}

}  // TEST_SUITE

// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "protoseg/prototype.hpp"

using namespace protoseg;

TEST_SUITE("prototype") {

TEST_CASE("pooling constant features returns the constant") {
    Rng rng(301);
    Tensor<float> features({4, 8, 8});
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 64; ++i)
            features.data()[c * 64 + i] = static_cast<float>(c) * 0.5f + 0.25f;
    const auto mask = oracle::random_mask(64, 64, rng, 0.4);
    const auto p = masked_average_pool(features, mask);
    for (int c = 0; c < 4; ++c)
        CHECK(p.vector[c] == doctest::Approx(c * 0.5f + 0.25f).epsilon(1e-6));
}

TEST_CASE("single-pixel mask selects that pixel's channel column") {
    Rng rng(302);
    const auto features = oracle::random_tensor<float>({6, 8, 8}, rng);
    Tensor<std::uint8_t> mask({8, 8});
    mask.at(3, 5) = 1;
    const auto p = masked_average_pool_presized(features, mask);
    for (int c = 0; c < 6; ++c) CHECK(p.vector[c] == doctest::Approx(features.at(c, 3, 5)));
}

TEST_CASE("pooling matches the brute-force double-loop oracle within 1e-6") {
    Rng rng(303);
    for (int trial = 0; trial < 5; ++trial) {
        const auto features = oracle::random_tensor<float>({64, 8, 8}, rng);
        const auto mask = oracle::random_mask(64, 64, rng, 0.3);
        const auto p = masked_average_pool(features, mask);
        const auto up = oracle::resize_bilinear(features, 64, 64);
        const auto ref = oracle::masked_pool(up, mask);
        for (int c = 0; c < 64; ++c)
            CHECK(std::fabs(static_cast<double>(p.vector[c]) - ref[c]) < 1e-6);
    }
}

TEST_CASE("empty mask raises the explicit empty-mask error") {
    Rng rng(304);
    const auto features = oracle::random_tensor<float>({4, 8, 8}, rng);
    Tensor<std::uint8_t> empty({64, 64});
    CHECK_THROWS_AS(masked_average_pool(features, empty), std::invalid_argument);
}

TEST_CASE("pooling properties") {
    Rng rng(305);
    const auto features = oracle::random_tensor<double>({8, 16, 16}, rng);
    const auto mask = oracle::random_mask(16, 16, rng, 0.35);

    SUBCASE("joint spatial permutation leaves the result unchanged") {
        std::vector<int> perm(256);
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = 255; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
        Tensor<double> pf({8, 16, 16});
        Tensor<std::uint8_t> pm({16, 16});
        for (int i = 0; i < 256; ++i) {
            pm[i] = mask[perm[i]];
            for (int c = 0; c < 8; ++c) pf.data()[c * 256 + i] = features.data()[c * 256 + perm[i]];
        }
        const auto a = masked_average_pool_presized(features, mask);
        const auto b = masked_average_pool_presized(pf, pm);
        for (int c = 0; c < 8; ++c) CHECK(a.vector[c] == doctest::Approx(b.vector[c]).epsilon(1e-9));
    }

    SUBCASE("scaling equivariance") {
        Tensor<double> scaled = features;
        scale_inplace(scaled, 3.25);
        const auto a = masked_average_pool_presized(features, mask);
        const auto b = masked_average_pool_presized(scaled, mask);
        for (int c = 0; c < 8; ++c) CHECK(b.vector[c] == doctest::Approx(3.25 * a.vector[c]));
    }

    SUBCASE("prototype lies within per-channel min/max bounds") {
        const auto p = masked_average_pool_presized(features, mask);
        for (int c = 0; c < 8; ++c) {
            double lo = 1e300, hi = -1e300;
            for (int i = 0; i < 256; ++i) {
                const double v = features.data()[c * 256 + i];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            CHECK(p.vector[c] >= lo - 1e-12);
            CHECK(p.vector[c] <= hi + 1e-12);
        }
    }
}

TEST_CASE("fuse_prototypes") {
    Rng rng(306);
    auto make_proto = [&](PrototypeSource src) {
        Prototype<double> p;
        p.class_id = 3;
        p.source = src;
        p.vector.resize(16);
        for (auto& v : p.vector) v = rng.uniform(-2, 2);
        return p;
    };

    SUBCASE("[p, p] uniform returns p") {
        const auto p = make_proto(PrototypeSource::support);
        const auto f = fuse_prototypes<double>({p, p});
        for (int c = 0; c < 16; ++c) CHECK(f.vector[c] == doctest::Approx(p.vector[c]));
        CHECK(f.source == PrototypeSource::kshot);  // both inputs support-sourced
    }

    SUBCASE("[p, p'] uniform is the elementwise midpoint") {
        const auto p = make_proto(PrototypeSource::support);
        const auto q = make_proto(PrototypeSource::pseudo);
        const auto f = fuse_prototypes<double>({p, q});
        CHECK(f.source == PrototypeSource::fused);
        for (int c = 0; c < 16; ++c)
            CHECK(f.vector[c] == doctest::Approx(0.5 * (p.vector[c] + q.vector[c])));
    }

    SUBCASE("five prototypes match the arithmetic-mean oracle within 1e-9") {
        std::vector<Prototype<double>> ps;
        for (int i = 0; i < 5; ++i) ps.push_back(make_proto(PrototypeSource::support));
        const auto f = fuse_prototypes(ps);
        for (int c = 0; c < 16; ++c) {
            double mean = 0.0;
            for (const auto& p : ps) mean += p.vector[c];
            mean /= 5.0;
            CHECK(std::fabs(f.vector[c] - mean) < 1e-9);
        }
    }

    SUBCASE("singleton is the identity") {
        const auto p = make_proto(PrototypeSource::support);
        const auto f = fuse_prototypes<double>({p});
        CHECK(f.vector == p.vector);
        CHECK(f.source == PrototypeSource::support);
    }

    SUBCASE("commutative under uniform weights") {
        const auto a = make_proto(PrototypeSource::support);
        const auto b = make_proto(PrototypeSource::pseudo);
        const auto ab = fuse_prototypes<double>({a, b});
        const auto ba = fuse_prototypes<double>({b, a});
        for (int c = 0; c < 16; ++c) CHECK(ab.vector[c] == doctest::Approx(ba.vector[c]));
    }

    SUBCASE("validation errors") {
        CHECK_THROWS(fuse_prototypes<double>({}));
        auto a = make_proto(PrototypeSource::support);
        auto b = make_proto(PrototypeSource::support);
        b.vector.resize(8);
        CHECK_THROWS(fuse_prototypes<double>({a, b}));
        const std::vector<double> bad_sum{0.7, 0.7};
        CHECK_THROWS(fuse_prototypes<double>({a, a}, &bad_sum));
        const std::vector<double> negative{1.5, -0.5};
        CHECK_THROWS(fuse_prototypes<double>({a, a}, &negative));
        const std::vector<double> ok{0.25, 0.75};
        const auto f = fuse_prototypes<double>({a, a}, &ok);
        for (int c = 0; c < 16; ++c) CHECK(f.vector[c] == doctest::Approx(a.vector[c]));
    }
}

TEST_CASE("broadcast_prototype") {
    Rng rng(307);
    Prototype<float> p;
    p.vector = {1.5f, -2.0f, 0.25f};

    SUBCASE("1x1 equals the vector") {
        const auto m = broadcast_prototype(p, 1, 1);
        CHECK(m.shape() == std::vector<int>{3, 1, 1});
        for (int c = 0; c < 3; ++c) CHECK(m.at(c, 0, 0) == p.vector[c]);
    }

    SUBCASE("every spatial column is identical") {
        const auto m = broadcast_prototype(p, 8, 8);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) CHECK(m.at(c, y, x) == p.vector[c]);
    }

    SUBCASE("pooling a broadcast recovers the prototype") {
        Prototype<float> q;
        q.vector.resize(16);
        for (auto& v : q.vector) v = static_cast<float>(rng.uniform(-1, 1));
        const auto m = broadcast_prototype(q, 8, 8);
        const auto mask = oracle::random_mask(64, 64, rng, 0.5);
        const auto back = masked_average_pool(m, mask);
        for (int c = 0; c < 16; ++c)
            CHECK(std::fabs(back.vector[c] - q.vector[c]) < 1e-6);
    }

    SUBCASE("bad sizes rejected") { CHECK_THROWS(broadcast_prototype(p, 0, 4)); }
}

TEST_CASE("pooling backward is the adjoint of the forward map") {
    Rng rng(308);
    auto features = oracle::random_tensor<double>({6, 8, 8}, rng);
    const auto mask = oracle::random_mask(32, 32, rng, 0.3);
    std::vector<double> grad_proto(6);
    for (auto& g : grad_proto) g = rng.uniform(-1, 1);

    const auto p = masked_average_pool(features, mask);
    const auto gx = masked_average_pool_backward<double>(grad_proto, mask, 8, 8);

    double lhs = 0.0;
    for (int c = 0; c < 6; ++c) lhs += p.vector[c] * grad_proto[c];
    double rhs = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) rhs += features[i] * gx[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

}  // TEST_SUITE

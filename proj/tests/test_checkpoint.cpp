// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "protoseg/checkpoint.hpp"

using namespace protoseg;

namespace {

std::filesystem::path temp_file(const char* name) {
    const auto dir = std::filesystem::temp_directory_path() / "protoseg_ckpt_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("save/load round-trips parameters bit-exactly") {
    Rng rng(801);
    ModelConfig mc;
    mc.image_size = 32;
    mc.encoder.channel_widths = {4, 8, 16, 16};
    mc.multiclass_channels = 7;
    mc.use_pff = true;
    OneShotModel<float> model(mc);
    model.init(rng);

    TrainConfig tc;
    tc.episodes = 123;
    tc.lr0 = 3.5e-4;
    tc.lambda_mcl = 0.2;
    tc.seed = 99;
    const SplitConfig split = make_splits(8, 2);
    const std::vector<ValidationRecord> history{{100, 0.25}, {200, 0.375}};

    const auto path = temp_file("roundtrip.ckpt");
    save_checkpoint(path.string(), model, tc, split, history, 123);

    LoadedCheckpoint back = load_checkpoint(path.string());
    CHECK(back.model_config.image_size == 32);
    CHECK(back.model_config.use_pff);
    CHECK(back.model_config.multiclass_channels == 7);
    CHECK(back.train_config.lr0 == tc.lr0);
    CHECK(back.train_config.lambda_mcl == tc.lambda_mcl);
    CHECK(back.train_config.seed == tc.seed);
    CHECK(back.split.split_index == 2);
    CHECK(back.split.test_classes == split.test_classes);
    CHECK(back.episodes_completed == 123);
    REQUIRE(back.history.size() == 2);
    CHECK(back.history[1].episode == 200);
    CHECK(back.history[1].mean_iou == 0.375);

    auto orig = model.params();
    auto loaded = back.model.params();
    REQUIRE(orig.size() == loaded.size());
    for (std::size_t i = 0; i < orig.size(); ++i) {
        CHECK(orig[i].name == loaded[i].name);
        CHECK(*orig[i].value == *loaded[i].value);
    }
}

TEST_CASE("save/save produces identical bytes (deterministic serialization)") {
    Rng rng(802);
    ModelConfig mc;
    mc.image_size = 32;
    mc.encoder.channel_widths = {4, 8, 16, 16};
    mc.use_pff = false;
    OneShotModel<float> model(mc);
    model.init(rng);
    TrainConfig tc;
    const SplitConfig split = make_splits(8, 0);

    const auto p1 = temp_file("det_a.ckpt");
    const auto p2 = temp_file("det_b.ckpt");
    save_checkpoint(p1.string(), model, tc, split, {}, 0);
    save_checkpoint(p2.string(), model, tc, split, {}, 0);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string a((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(a == b);
}

TEST_CASE("config snapshot suffices to rebuild the exact graph") {
    Rng rng(803);
    ModelConfig mc;
    mc.image_size = 32;
    mc.encoder.channel_widths = {4, 8, 16, 16};
    mc.use_pff = false;  // base-fusion arm
    mc.multiclass_channels = 0;
    OneShotModel<float> model(mc);
    model.init(rng);
    TrainConfig tc;
    tc.flags.use_pff = false;
    tc.flags.use_mcl = false;
    const SplitConfig split = make_splits(8, 1);

    const auto path = temp_file("graph.ckpt");
    save_checkpoint(path.string(), model, tc, split, {}, 7);
    LoadedCheckpoint back = load_checkpoint(path.string());
    CHECK(!back.model.pff().has_value());
    CHECK(back.model.base_fusion().has_value());
    CHECK(!back.model.multiclass_head().has_value());
    CHECK(back.model.param_count() == model.param_count());
}

TEST_CASE("corrupted files are rejected with context") {
    Rng rng(804);
    ModelConfig mc;
    mc.image_size = 32;
    mc.encoder.channel_widths = {4, 8, 16, 16};
    OneShotModel<float> model(mc);
    model.init(rng);
    TrainConfig tc;
    const SplitConfig split = make_splits(8, 0);
    const auto path = temp_file("corrupt.ckpt");
    save_checkpoint(path.string(), model, tc, split, {}, 0);

    SUBCASE("truncated blob") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 64));
        out.close();
        CHECK_THROWS(load_checkpoint(path.string()));
    }
    SUBCASE("missing file") { CHECK_THROWS(load_checkpoint("/nonexistent/x.ckpt")); }
    SUBCASE("not a checkpoint") {
        std::ofstream out(path, std::ios::trunc);
        out << "format: something-else\n---\n";
        out.close();
        CHECK_THROWS(load_checkpoint(path.string()));
    }
}

}  // TEST_SUITE

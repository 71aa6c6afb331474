// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "protoseg/textconf.hpp"

using protoseg::TextConfig;

TEST_SUITE("textconf") {

TEST_CASE("parse flat and nested keys") {
    const TextConfig c = TextConfig::parse(
        "# comment\n"
        "name: demo\n"
        "train:\n"
        "  episodes: 2000\n"
        "  optimizer:\n"
        "    lr0: 2.5e-4\n"
        "  batch: 1\n"
        "top: back\n");
    CHECK(c.get("name") == "demo");
    CHECK(c.get_int("train.episodes") == 2000);
    CHECK(c.get_double("train.optimizer.lr0") == doctest::Approx(2.5e-4));
    CHECK(c.get_int("train.batch") == 1);
    CHECK(c.get("top") == "back");
    CHECK(!c.has("missing"));
    CHECK(c.get_or("missing", "x") == "x");
}

TEST_CASE("dump/parse round-trip preserves values") {
    TextConfig c;
    c.set("a", 3);
    c.set("sec.x", 1.5);
    c.set("sec.y", true);
    c.set("sec.inner.z", "hello world");
    c.set("tail", 9);
    const TextConfig back = TextConfig::parse(c.dump());
    CHECK(back.get_int("a") == 3);
    CHECK(back.get_double("sec.x") == 1.5);
    CHECK(back.get_bool("sec.y"));
    CHECK(back.get("sec.inner.z") == "hello world");
    CHECK(back.get_int("tail") == 9);
    CHECK(back.entries().size() == c.entries().size());
}

TEST_CASE("parse errors") {
    CHECK_THROWS(TextConfig::parse("no colon here\n"));
    CHECK_THROWS(TextConfig::parse(" odd: indent\n"));
    CHECK_THROWS(TextConfig::parse("    over: indented\n"));
    const TextConfig c = TextConfig::parse("k: v\n");
    CHECK_THROWS(c.get("nope"));
    CHECK_THROWS(c.get_int("k"));
}

TEST_CASE("format_double round-trips exactly") {
    for (double v : {2.5e-4, 0.1, 1.0 / 3.0, 1e-12, 123456.789, 0.0}) {
        const std::string s = protoseg::format_double(v);
        CHECK(std::stod(s) == v);
    }
}

TEST_CASE("keys_with_prefix") {
    TextConfig c;
    c.set("samples.s0.class", 1);
    c.set("samples.s1.class", 2);
    c.set("other", 3);
    CHECK(c.keys_with_prefix("samples.").size() == 2);
}

}  // TEST_SUITE

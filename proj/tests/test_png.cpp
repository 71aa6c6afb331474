// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>
#include <zlib.h>

#include <cstring>
#include <filesystem>

#include "protoseg/png_io.hpp"
#include "protoseg/rng.hpp"

using protoseg::PngImage;
using protoseg::Rng;

namespace {

PngImage random_image(int w, int h, int channels, Rng& rng) {
    PngImage img;
    img.width = w;
    img.height = h;
    img.channels = channels;
    img.pixels.resize(static_cast<std::size_t>(w) * h * channels);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(static_cast<std::uint8_t>(x >> 24));
    v.push_back(static_cast<std::uint8_t>(x >> 16));
    v.push_back(static_cast<std::uint8_t>(x >> 8));
    v.push_back(static_cast<std::uint8_t>(x));
}

void add_chunk(std::vector<std::uint8_t>& out, const char* type,
               const std::vector<std::uint8_t>& data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + start, static_cast<uInt>(4 + data.size()));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

// Builds a grayscale PNG by hand with one chosen filter type per row, so the
// decoder's unfiltering paths are exercised independently of our encoder.
std::vector<std::uint8_t> build_filtered_png(const PngImage& ref, const std::vector<int>& filters) {
    const int w = ref.width, h = ref.height;
    std::vector<std::uint8_t> raw;
    for (int y = 0; y < h; ++y) {
        const int f = filters[static_cast<std::size_t>(y) % filters.size()];
        raw.push_back(static_cast<std::uint8_t>(f));
        for (int x = 0; x < w; ++x) {
            const int cur = ref.at(y, x);
            const int left = x > 0 ? ref.at(y, x - 1) : 0;
            const int up = y > 0 ? ref.at(y - 1, x) : 0;
            const int ul = (x > 0 && y > 0) ? ref.at(y - 1, x - 1) : 0;
            int v = cur;
            switch (f) {
                case 0: break;
                case 1: v = cur - left; break;
                case 2: v = cur - up; break;
                case 3: v = cur - (left + up) / 2; break;
                case 4: {
                    const int p = left + up - ul;
                    const int pa = std::abs(p - left), pb = std::abs(p - up), pc = std::abs(p - ul);
                    const int pred = (pa <= pb && pa <= pc) ? left : (pb <= pc ? up : ul);
                    v = cur - pred;
                    break;
                }
            }
            raw.push_back(static_cast<std::uint8_t>(v & 0xff));
        }
    }

    uLongf clen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(clen);
    REQUIRE(compress2(comp.data(), &clen, raw.data(), static_cast<uLong>(raw.size()), 6) == Z_OK);
    comp.resize(clen);

    std::vector<std::uint8_t> out{137, 80, 78, 71, 13, 10, 26, 10};
    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(w));
    put_u32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});
    add_chunk(out, "IHDR", ihdr);
    add_chunk(out, "IDAT", comp);
    add_chunk(out, "IEND", {});
    return out;
}

}  // namespace

TEST_SUITE("png") {

TEST_CASE("grayscale round-trip") {
    Rng rng(11);
    const PngImage img = random_image(37, 21, 1, rng);
    const auto bytes = protoseg::encode_png(img);
    const PngImage back = protoseg::decode_png(bytes.data(), bytes.size());
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.channels == 1);
    CHECK(back.pixels == img.pixels);
}

TEST_CASE("rgb round-trip through a file") {
    Rng rng(12);
    const PngImage img = random_image(64, 64, 3, rng);
    const auto dir = std::filesystem::temp_directory_path() / "protoseg_png_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "roundtrip.png").string();
    protoseg::write_png(path, img);
    const PngImage back = protoseg::read_png(path);
    CHECK(back.channels == 3);
    CHECK(back.pixels == img.pixels);
}

TEST_CASE("decoder handles all five filter types") {
    Rng rng(13);
    const PngImage ref = random_image(19, 23, 1, rng);
    for (int f = 0; f <= 4; ++f) {
        const auto bytes = build_filtered_png(ref, {f});
        const PngImage back = protoseg::decode_png(bytes.data(), bytes.size());
        CHECK(back.pixels == ref.pixels);
    }
    const auto mixed = build_filtered_png(ref, {0, 1, 2, 3, 4});
    CHECK(protoseg::decode_png(mixed.data(), mixed.size()).pixels == ref.pixels);
}

TEST_CASE("error paths") {
    Rng rng(14);
    const PngImage img = random_image(8, 8, 1, rng);
    auto bytes = protoseg::encode_png(img);

    SUBCASE("bad signature") {
        bytes[0] ^= 0xff;
        CHECK_THROWS(protoseg::decode_png(bytes.data(), bytes.size()));
    }
    SUBCASE("corrupted chunk payload fails CRC") {
        bytes[bytes.size() / 2] ^= 0x55;
        CHECK_THROWS(protoseg::decode_png(bytes.data(), bytes.size()));
    }
    SUBCASE("truncated file") {
        CHECK_THROWS(protoseg::decode_png(bytes.data(), bytes.size() / 2));
    }
    SUBCASE("empty image rejected by encoder") {
        PngImage empty;
        CHECK_THROWS(protoseg::encode_png(empty));
    }
}

}  // TEST_SUITE

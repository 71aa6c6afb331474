// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace protoseg {

/// 8-bit image, rows top to bottom, channels interleaved.
/// channels == 1 is grayscale, channels == 3 is RGB.
struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;

    std::uint8_t& at(int y, int x, int c = 0) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c = 0) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

std::vector<std::uint8_t> encode_png(const PngImage& image);
PngImage decode_png(const std::uint8_t* data, std::size_t size);

void write_png(const std::string& path, const PngImage& image);
PngImage read_png(const std::string& path);

}  // namespace protoseg

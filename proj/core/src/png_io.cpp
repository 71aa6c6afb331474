// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "protoseg/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace protoseg {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::uint8_t* data, std::size_t len) {
    put_u32(out, static_cast<std::uint32_t>(len));
    const std::size_t type_pos = out.size();
    out.insert(out.end(), type, type + 4);
    if (len) out.insert(out.end(), data, data + len);
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + type_pos, static_cast<uInt>(4 + len));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a);
    const int pb = std::abs(p - b);
    const int pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace

std::vector<std::uint8_t> encode_png(const PngImage& image) {
    if (image.width <= 0 || image.height <= 0)
        throw std::invalid_argument("encode_png: empty image");
    if (image.channels != 1 && image.channels != 3)
        throw std::invalid_argument("encode_png: only 1- or 3-channel images supported");
    const std::size_t row_bytes = static_cast<std::size_t>(image.width) * image.channels;
    if (image.pixels.size() != row_bytes * image.height)
        throw std::invalid_argument("encode_png: pixel buffer size mismatch");

    // Raw scanlines, filter type 0 on every row.
    std::vector<std::uint8_t> raw;
    raw.reserve((row_bytes + 1) * image.height);
    for (int y = 0; y < image.height; ++y) {
        raw.push_back(0);
        const std::uint8_t* row = image.pixels.data() + static_cast<std::size_t>(y) * row_bytes;
        raw.insert(raw.end(), row, row + row_bytes);
    }

    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()),
                  Z_DEFAULT_COMPRESSION) != Z_OK) {
        throw std::runtime_error("encode_png: deflate failed");
    }
    comp.resize(comp_len);

    std::vector<std::uint8_t> out;
    out.insert(out.end(), kSignature, kSignature + 8);

    std::uint8_t ihdr[13];
    ihdr[0] = static_cast<std::uint8_t>(image.width >> 24);
    ihdr[1] = static_cast<std::uint8_t>(image.width >> 16);
    ihdr[2] = static_cast<std::uint8_t>(image.width >> 8);
    ihdr[3] = static_cast<std::uint8_t>(image.width);
    ihdr[4] = static_cast<std::uint8_t>(image.height >> 24);
    ihdr[5] = static_cast<std::uint8_t>(image.height >> 16);
    ihdr[6] = static_cast<std::uint8_t>(image.height >> 8);
    ihdr[7] = static_cast<std::uint8_t>(image.height);
    ihdr[8] = 8;                                          // bit depth
    ihdr[9] = image.channels == 1 ? 0 : 2;                // grayscale / truecolor
    ihdr[10] = 0;                                         // compression
    ihdr[11] = 0;                                         // filter method
    ihdr[12] = 0;                                         // no interlace
    append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
    append_chunk(out, "IDAT", comp.data(), comp.size());
    append_chunk(out, "IEND", nullptr, 0);
    return out;
}

PngImage decode_png(const std::uint8_t* data, std::size_t size) {
    if (size < 8 || std::memcmp(data, kSignature, 8) != 0)
        throw std::runtime_error("decode_png: not a PNG file");

    PngImage img;
    int bit_depth = 0, color_type = 0;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    bool saw_iend = false;

    while (pos + 12 <= size) {
        const std::uint32_t len = get_u32(data + pos);
        if (pos + 12 + len > size) throw std::runtime_error("decode_png: truncated chunk");
        char type[5] = {0};
        std::memcpy(type, data + pos + 4, 4);
        const std::uint8_t* payload = data + pos + 8;

        uLong crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, data + pos + 4, 4 + len);
        if (static_cast<std::uint32_t>(crc) != get_u32(data + pos + 8 + len))
            throw std::runtime_error("decode_png: chunk CRC mismatch");

        if (std::strcmp(type, "IHDR") == 0) {
            if (len != 13) throw std::runtime_error("decode_png: bad IHDR");
            img.width = static_cast<int>(get_u32(payload));
            img.height = static_cast<int>(get_u32(payload + 4));
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw std::runtime_error("decode_png: interlacing unsupported");
            if (bit_depth != 8 || (color_type != 0 && color_type != 2))
                throw std::runtime_error("decode_png: only 8-bit grayscale/RGB supported");
            img.channels = color_type == 0 ? 1 : 3;
        } else if (std::strcmp(type, "IDAT") == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::strcmp(type, "IEND") == 0) {
            saw_iend = true;
            break;
        }
        pos += 12 + len;
    }
    if (img.width <= 0 || img.height <= 0) throw std::runtime_error("decode_png: missing IHDR");
    if (!saw_iend) throw std::runtime_error("decode_png: missing IEND");

    const std::size_t row_bytes = static_cast<std::size_t>(img.width) * img.channels;
    const std::size_t raw_len = (row_bytes + 1) * img.height;
    std::vector<std::uint8_t> raw(raw_len);
    uLongf dest_len = static_cast<uLongf>(raw_len);
    const int zrc = uncompress(raw.data(), &dest_len, idat.data(), static_cast<uLong>(idat.size()));
    if (zrc != Z_OK || dest_len != raw_len)
        throw std::runtime_error("decode_png: inflate failed");

    // Undo per-row filtering.
    img.pixels.assign(row_bytes * img.height, 0);
    const int bpp = img.channels;
    for (int y = 0; y < img.height; ++y) {
        const std::uint8_t filter = raw[(row_bytes + 1) * y];
        const std::uint8_t* src = raw.data() + (row_bytes + 1) * y + 1;
        std::uint8_t* dst = img.pixels.data() + row_bytes * y;
        const std::uint8_t* prev = y > 0 ? img.pixels.data() + row_bytes * (y - 1) : nullptr;
        for (std::size_t x = 0; x < row_bytes; ++x) {
            const int a = x >= static_cast<std::size_t>(bpp) ? dst[x - bpp] : 0;
            const int b = prev ? prev[x] : 0;
            const int c = (prev && x >= static_cast<std::size_t>(bpp)) ? prev[x - bpp] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw std::runtime_error("decode_png: unknown filter type");
            }
            dst[x] = static_cast<std::uint8_t>(v & 0xff);
        }
    }
    return img;
}

void write_png(const std::string& path, const PngImage& image) {
    const std::vector<std::uint8_t> bytes = encode_png(image);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_png: cannot open " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write_png: write failed for " + path);
}

PngImage read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_png: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return decode_png(bytes.data(), bytes.size());
}

}  // namespace protoseg

/*
 * Copyright (C) 2026 The mvaug authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvaug/image.hpp"

namespace mvaug {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

inline uint32_t get_be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | p[3];
}

inline void png_chunk(std::vector<uint8_t>& out, const char type[4],
                      const std::vector<uint8_t>& payload) {
    put_be32(out, uint32_t(payload.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uint32_t crc = uint32_t(::crc32(0, out.data() + start, uInt(out.size() - start)));
    put_be32(out, crc);
}

inline int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace detail

inline std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open file: " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path,
                             const void* data, size_t size) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open file for writing: " + path.string());
    f.write(static_cast<const char*>(data), std::streamsize(size));
    if (!f) throw IoError("write failed: " + path.string());
}

// Encodes an 8-bit image (1 = gray, 3 = RGB, 4 = RGBA channels) as a PNG.
// Rows use filter type 0 so output bytes depend only on pixel values and the
// zlib build, which keeps batch outputs reproducible.
inline std::vector<uint8_t> encode_png(const Image8& img) {
    if (img.width <= 0 || img.height <= 0) throw IoError("encode_png: empty image");
    int color_type;
    switch (img.channels) {
        case 1: color_type = 0; break;
        case 3: color_type = 2; break;
        case 4: color_type = 6; break;
        default: throw IoError("encode_png: unsupported channel count");
    }

    size_t stride = size_t(img.width) * img.channels;
    std::vector<uint8_t> raw;
    raw.reserve((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter: none
        const uint8_t* row = img.data.data() + size_t(y) * stride;
        raw.insert(raw.end(), row, row + stride);
    }

    uLongf comp_size = compressBound(uLong(raw.size()));
    std::vector<uint8_t> comp(comp_size);
    if (compress2(comp.data(), &comp_size, raw.data(), uLong(raw.size()), 4) != Z_OK)
        throw IoError("encode_png: deflate failed");
    comp.resize(comp_size);

    std::vector<uint8_t> out = {137, 80, 78, 71, 13, 10, 26, 10};
    std::vector<uint8_t> ihdr;
    detail::put_be32(ihdr, uint32_t(img.width));
    detail::put_be32(ihdr, uint32_t(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(uint8_t(color_type));
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    detail::png_chunk(out, "IHDR", ihdr);
    detail::png_chunk(out, "IDAT", comp);
    detail::png_chunk(out, "IEND", {});
    return out;
}

// Decodes 8-bit, non-interlaced gray/RGB/RGBA PNGs (the subset this pipeline
// writes); all five scanline filters are handled.
inline Image8 decode_png(const std::vector<uint8_t>& bytes) {
    static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
        throw IoError("decode_png: not a PNG file");

    int width = 0, height = 0, bit_depth = 0, color_type = 0;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        uint32_t len = detail::get_be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) throw IoError("decode_png: truncated chunk");
        std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
        const uint8_t* payload = &bytes[pos + 8];
        if (type == "IHDR") {
            width = int(detail::get_be32(payload));
            height = int(detail::get_be32(payload + 4));
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw IoError("decode_png: interlaced PNG unsupported");
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (width <= 0 || height <= 0) throw IoError("decode_png: missing IHDR");
    if (bit_depth != 8) throw IoError("decode_png: only 8-bit PNGs supported");
    int channels;
    switch (color_type) {
        case 0: channels = 1; break;
        case 2: channels = 3; break;
        case 6: channels = 4; break;
        default: throw IoError("decode_png: unsupported color type");
    }

    size_t stride = size_t(width) * channels;
    std::vector<uint8_t> raw((stride + 1) * height);
    uLongf raw_size = uLongf(raw.size());
    if (uncompress(raw.data(), &raw_size, idat.data(), uLong(idat.size())) != Z_OK ||
        raw_size != raw.size())
        throw IoError("decode_png: inflate failed");

    Image8 img(width, height, channels);
    std::vector<uint8_t> prev(stride, 0);
    int bpp = channels;
    for (int y = 0; y < height; ++y) {
        uint8_t filter = raw[size_t(y) * (stride + 1)];
        const uint8_t* src = &raw[size_t(y) * (stride + 1) + 1];
        uint8_t* dst = img.data.data() + size_t(y) * stride;
        for (size_t i = 0; i < stride; ++i) {
            int a = i >= size_t(bpp) ? dst[i - bpp] : 0;
            int b = prev[i];
            int c = i >= size_t(bpp) ? prev[i - bpp] : 0;
            int x = src[i];
            switch (filter) {
                case 0: dst[i] = uint8_t(x); break;
                case 1: dst[i] = uint8_t(x + a); break;
                case 2: dst[i] = uint8_t(x + b); break;
                case 3: dst[i] = uint8_t(x + (a + b) / 2); break;
                case 4: dst[i] = uint8_t(x + detail::paeth(a, b, c)); break;
                default: throw IoError("decode_png: bad filter type");
            }
        }
        std::memcpy(prev.data(), dst, stride);
    }
    return img;
}

inline void write_png(const std::filesystem::path& path, const Image8& img) {
    auto bytes = encode_png(img);
    write_file_bytes(path, bytes.data(), bytes.size());
}

inline Image8 read_png(const std::filesystem::path& path) {
    return decode_png(read_file_bytes(path));
}

// Encodes a linear-radiance RGB image as a Radiance HDR (.hdr) stream using
// flat (non-RLE) RGBE scanlines.
inline std::vector<uint8_t> encode_hdr(const Image& img) {
    if (img.channels != 3) throw IoError("encode_hdr: image must have 3 channels");
    std::string header = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " +
                         std::to_string(img.height) + " +X " + std::to_string(img.width) +
                         "\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + size_t(img.width) * img.height * 4);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            float r = img.at(x, y, 0), g = img.at(x, y, 1), b = img.at(x, y, 2);
            float m = std::max(r, std::max(g, b));
            uint8_t rgbe[4] = {0, 0, 0, 0};
            if (m > 1e-32f) {
                int e;
                float f = std::frexp(m, &e);
                float s = f * 256.0f / m;
                rgbe[0] = uint8_t(r * s);
                rgbe[1] = uint8_t(g * s);
                rgbe[2] = uint8_t(b * s);
                rgbe[3] = uint8_t(e + 128);
            }
            out.insert(out.end(), rgbe, rgbe + 4);
        }
    }
    return out;
}

inline void write_hdr(const std::filesystem::path& path, const Image& img) {
    auto bytes = encode_hdr(img);
    write_file_bytes(path, bytes.data(), bytes.size());
}

}  // namespace mvaug

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

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mvaug/math.hpp"

namespace mvaug {

// Planar-interleaved float image, row-major, `channels` floats per pixel.
// Continuous image coordinates place the center of pixel (i, j) at
// (i + 0.5, j + 0.5); integer indices address whole pixels.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int c, float fill = 0.f)
        : width(w), height(h), channels(c), data(size_t(w) * h * c, fill) {}

    bool empty() const { return data.empty(); }
    size_t index(int x, int y, int c) const {
        return (size_t(y) * width + x) * channels + c;
    }
    float& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    float at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

    Vec3 rgb(int x, int y) const {
        size_t i = index(x, y, 0);
        return {data[i], data[i + 1], data[i + 2]};
    }
    void set_rgb(int x, int y, const Vec3& v) {
        size_t i = index(x, y, 0);
        data[i] = float(v.x);
        data[i + 1] = float(v.y);
        data[i + 2] = float(v.z);
    }

    bool contains(double px, double py) const {
        return px >= 0.0 && py >= 0.0 && px <= double(width) && py <= double(height);
    }

    // Bilinear sample at continuous coordinates, clamped at the border.
    float bilinear(double px, double py, int c) const {
        double fx = px - 0.5, fy = py - 0.5;
        int x0 = int(std::floor(fx)), y0 = int(std::floor(fy));
        double tx = fx - x0, ty = fy - y0;
        int x1 = x0 + 1, y1 = y0 + 1;
        auto cx = [&](int v) { return std::min(std::max(v, 0), width - 1); };
        auto cy = [&](int v) { return std::min(std::max(v, 0), height - 1); };
        double a = at(cx(x0), cy(y0), c), b = at(cx(x1), cy(y0), c);
        double d = at(cx(x0), cy(y1), c), e = at(cx(x1), cy(y1), c);
        return float((a * (1 - tx) + b * tx) * (1 - ty) + (d * (1 - tx) + e * tx) * ty);
    }

    Vec3 bilinear_rgb(double px, double py) const {
        return {bilinear(px, py, 0), bilinear(px, py, 1), bilinear(px, py, 2)};
    }
};

// 8-bit image as stored in PNG files.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint8_t> data;

    Image8() = default;
    Image8(int w, int h, int c, uint8_t fill = 0)
        : width(w), height(h), channels(c), data(size_t(w) * h * c, fill) {}

    size_t index(int x, int y, int c) const {
        return (size_t(y) * width + x) * channels + c;
    }
    uint8_t& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    uint8_t at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
};

// The color pipeline assumes a pure power-law transfer curve of exponent 2.2.
inline double linearize_gamma22(double encoded) {
    return std::pow(std::max(encoded, 0.0), 2.2);
}
inline double delinearize_gamma22(double linear) {
    return std::pow(std::max(linear, 0.0), 1.0 / 2.2);
}

// Decode an 8-bit image to linear radiance in [0, 1].
inline Image decode_linear(const Image8& in) {
    Image out(in.width, in.height, in.channels);
    // 256-entry LUT keeps decode exact and cheap.
    float lut[256];
    for (int i = 0; i < 256; ++i) lut[i] = float(linearize_gamma22(i / 255.0));
    for (size_t i = 0; i < in.data.size(); ++i) out.data[i] = lut[in.data[i]];
    return out;
}

// Encode linear radiance to 8-bit with rounding; clamps to [0, 1] first.
inline Image8 encode_srgb8(const Image& in) {
    Image8 out(in.width, in.height, in.channels);
    for (size_t i = 0; i < in.data.size(); ++i) {
        double v = delinearize_gamma22(std::min(std::max(double(in.data[i]), 0.0), 1.0));
        out.data[i] = uint8_t(std::lround(v * 255.0));
    }
    return out;
}

}  // namespace mvaug

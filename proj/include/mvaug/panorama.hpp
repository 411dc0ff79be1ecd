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

#include <stdexcept>
#include <vector>

#include "mvaug/geometry.hpp"
#include "mvaug/image.hpp"
#include "mvaug/math.hpp"

namespace mvaug {

// Viewing direction of equirectangular pixel (u, v):
// azimuth 2*pi*(u+0.5)/W - pi, elevation pi/2 - pi*(v+0.5)/H.
inline Vec3 equirect_direction(int u, int v, int width, int height) {
    double azimuth = 2.0 * kPi * (u + 0.5) / width - kPi;
    double elevation = kPi / 2.0 - kPi * (v + 0.5) / height;
    return direction_from_angles(azimuth, elevation);
}

// Solid angle subtended by one pixel of row v.
inline double equirect_pixel_solid_angle(int v, int width, int height) {
    double elevation = kPi / 2.0 - kPi * (v + 0.5) / height;
    return (2.0 * kPi / width) * (kPi / height) * std::cos(elevation);
}

// Equirectangular radiance image (linear color) with a per-pixel coverage
// mask. Width is always twice the height.
struct Panorama {
    Image pixels;                   // H x W x 3
    std::vector<uint8_t> coverage;  // H x W, 1 where pixels were written

    Panorama() = default;
    Panorama(int width, int height) {
        if (width != 2 * height || height <= 0)
            throw std::invalid_argument("Panorama: width must equal 2 * height");
        pixels = Image(width, height, 3);
        coverage.assign(size_t(width) * height, 0);
    }

    int width() const { return pixels.width; }
    int height() const { return pixels.height; }
    bool covered(int x, int y) const { return coverage[size_t(y) * width() + x] != 0; }
    void set_covered(int x, int y, bool c) { coverage[size_t(y) * width() + x] = c ? 1 : 0; }
    bool fully_covered() const {
        for (uint8_t c : coverage)
            if (!c) return false;
        return true;
    }
    size_t covered_count() const {
        size_t n = 0;
        for (uint8_t c : coverage) n += c;
        return n;
    }
};

// Per-pixel unit viewing directions for an equirectangular panorama.
inline Image direction_encoding(int width, int height) {
    if (width != 2 * height || height <= 0)
        throw std::invalid_argument("direction_encoding: width must equal 2 * height");
    Image pe(width, height, 3);
    for (int v = 0; v < height; ++v)
        for (int u = 0; u < width; ++u)
            pe.set_rgb(u, v, equirect_direction(u, v, width, height));
    return pe;
}

struct StitchInput {
    const Image* image = nullptr;  // linear radiance, 3 channels, camera resolution
    const CameraModel* camera = nullptr;
};

// Builds an LDR panorama from surround cameras. Each panorama direction is
// projected into every camera (scene-at-infinity model) and the per-channel
// maximum of the bilinear samples wins, so the result is independent of the
// camera order. Inputs must already be linearized.
inline Panorama stitch(const std::vector<StitchInput>& inputs, int width, int height) {
    if (inputs.empty()) throw std::invalid_argument("stitch: camera list is empty");
    for (const auto& in : inputs) {
        if (!in.image || !in.camera) throw std::invalid_argument("stitch: null input");
        if (in.image->width != in.camera->width || in.image->height != in.camera->height)
            throw std::invalid_argument("stitch: image resolution does not match camera");
        if (in.image->channels != 3)
            throw std::invalid_argument("stitch: images must have 3 channels");
    }

    Panorama pano(width, height);
    // Per-row/column trig tables and camera-frame rotations, hoisted out of
    // the per-pixel loop.
    std::vector<double> cos_az(static_cast<size_t>(width));
    std::vector<double> sin_az(static_cast<size_t>(width));
    for (int u = 0; u < width; ++u) {
        double az = 2.0 * kPi * (u + 0.5) / width - kPi;
        cos_az[size_t(u)] = std::cos(az);
        sin_az[size_t(u)] = std::sin(az);
    }
    std::vector<Mat3> ego_to_cam;
    std::vector<double> min_cam_z;  // FOV early-out on the camera-frame z
    ego_to_cam.reserve(inputs.size());
    for (const auto& in : inputs) {
        ego_to_cam.push_back(in.camera->extrinsics.rotation.transposed());
        min_cam_z.push_back(in.camera->kind == CameraKind::kPinhole
                                ? 0.0
                                : std::cos(in.camera->theta_max));
    }

    for (int v = 0; v < height; ++v) {
        double el = kPi / 2.0 - kPi * (v + 0.5) / height;
        double cos_el = std::cos(el), sin_el = std::sin(el);
        for (int u = 0; u < width; ++u) {
            Vec3 dir{cos_el * cos_az[size_t(u)], cos_el * sin_az[size_t(u)], sin_el};
            Vec3 best{0, 0, 0};
            bool seen = false;
            for (size_t ci = 0; ci < inputs.size(); ++ci) {
                const auto& in = inputs[ci];
                Vec3 dc = ego_to_cam[ci] * dir;
                if (dc.z < min_cam_z[ci] || (dc.z <= 0.0 && min_cam_z[ci] >= 0.0))
                    continue;
                auto pd = in.camera->project_camera(dc);
                if (!pd) continue;
                if (!in.camera->pixel_in_bounds(pd->pixel)) continue;
                Vec3 s = in.image->bilinear_rgb(pd->pixel.x, pd->pixel.y);
                best.x = std::max(best.x, std::clamp(s.x, 0.0, 1.0));
                best.y = std::max(best.y, std::clamp(s.y, 0.0, 1.0));
                best.z = std::max(best.z, std::clamp(s.z, 0.0, 1.0));
                seen = true;
            }
            if (seen) {
                pano.pixels.set_rgb(u, v, best);
                pano.set_covered(u, v, true);
            }
        }
    }
    return pano;
}

namespace detail {

// One Gauss-Seidel sweep of Laplacian diffusion over the listed hole pixels
// (raster order). The x axis wraps (azimuth), y clamps at the poles.
// Returns the max absolute change.
inline double diffusion_sweep(Image& img, const std::vector<std::pair<int, int>>& holes) {
    int w = img.width, h = img.height;
    double max_delta = 0.0;
    for (auto [x, y] : holes) {
        int xl = (x + w - 1) % w, xr = (x + 1) % w;
        int yu = std::max(y - 1, 0), yd = std::min(y + 1, h - 1);
        for (int c = 0; c < img.channels; ++c) {
            float avg = 0.25f * (img.at(xl, y, c) + img.at(xr, y, c) + img.at(x, yu, c) +
                                 img.at(x, yd, c));
            max_delta = std::max(max_delta, double(std::abs(avg - img.at(x, y, c))));
            img.at(x, y, c) = avg;
        }
    }
    return max_delta;
}

}  // namespace detail

// Fills uncovered pixels by Laplacian diffusion run to convergence
// (max per-sweep change < 1e-4), seeded coarse-to-fine so large holes
// converge quickly. Covered pixels are returned bit-for-bit unchanged and
// the output is fully covered.
inline Panorama inpaint(const Panorama& input, double tol = 1e-4) {
    size_t n_covered = input.covered_count();
    if (n_covered == 0) throw std::invalid_argument("inpaint: no covered pixels");

    Panorama out = input;
    if (n_covered == out.coverage.size()) return out;

    int w = out.width(), h = out.height();

    // Coarse pyramid of covered-pixel means seeds the hole values.
    struct Level {
        Image img;
        std::vector<uint8_t> cover;
    };
    std::vector<Level> pyramid;
    pyramid.push_back({out.pixels, out.coverage});
    while (pyramid.back().img.width > 8) {
        const Level& fine = pyramid.back();
        int cw = fine.img.width / 2, ch = std::max(fine.img.height / 2, 1);
        Level coarse{Image(cw, ch, 3), std::vector<uint8_t>(size_t(cw) * ch, 0)};
        for (int y = 0; y < ch; ++y) {
            for (int x = 0; x < cw; ++x) {
                Vec3 sum{};
                int cnt = 0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        int fx = std::min(2 * x + dx, fine.img.width - 1);
                        int fy = std::min(2 * y + dy, fine.img.height - 1);
                        if (fine.cover[size_t(fy) * fine.img.width + fx]) {
                            sum += fine.img.rgb(fx, fy);
                            ++cnt;
                        }
                    }
                if (cnt > 0) {
                    coarse.img.set_rgb(x, y, sum * (1.0 / cnt));
                    coarse.cover[size_t(y) * cw + x] = 1;
                }
            }
        }
        pyramid.push_back(std::move(coarse));
    }

    // Mean of covered pixels seeds the coarsest level.
    Vec3 mean{};
    {
        size_t cnt = 0;
        const Level& base = pyramid.front();
        for (int y = 0; y < base.img.height; ++y)
            for (int x = 0; x < base.img.width; ++x)
                if (base.cover[size_t(y) * base.img.width + x]) {
                    mean += base.img.rgb(x, y);
                    ++cnt;
                }
        mean = mean * (1.0 / double(cnt));
    }

    const int max_sweeps = 20000;
    for (int li = int(pyramid.size()) - 1; li >= 0; --li) {
        Level& lv = pyramid[li];
        int lw = lv.img.width, lh = lv.img.height;
        std::vector<std::pair<int, int>> holes;
        for (int y = 0; y < lh; ++y)
            for (int x = 0; x < lw; ++x) {
                if (lv.cover[size_t(y) * lw + x]) continue;
                holes.emplace_back(x, y);
                if (li == int(pyramid.size()) - 1) {
                    lv.img.set_rgb(x, y, mean);
                } else {
                    const Level& coarser = pyramid[li + 1];
                    int cx = std::min(x / 2, coarser.img.width - 1);
                    int cy = std::min(y / 2, coarser.img.height - 1);
                    lv.img.set_rgb(x, y, coarser.img.rgb(cx, cy));
                }
            }
        for (int sweep = 0; sweep < max_sweeps; ++sweep)
            if (detail::diffusion_sweep(lv.img, holes) < tol) break;
    }

    out.pixels = std::move(pyramid.front().img);
    std::fill(out.coverage.begin(), out.coverage.end(), 1);
    return out;
}

}  // namespace mvaug

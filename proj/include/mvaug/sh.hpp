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

#include <array>

#include "mvaug/panorama.hpp"

namespace mvaug {

// Second-order (9 coefficient) spherical-harmonic expansion of an RGB
// radiance field. Basis order: (0,0), (1,-1), (1,0), (1,1), (2,-2), (2,-1),
// (2,0), (2,1), (2,2).
struct ShIrradiance {
    std::array<Vec3, 9> coeffs{};
};

inline std::array<double, 9> sh2_basis(const Vec3& d) {
    return {
        0.282095,
        0.488603 * d.y,
        0.488603 * d.z,
        0.488603 * d.x,
        1.092548 * d.x * d.y,
        1.092548 * d.y * d.z,
        0.315392 * (3.0 * d.z * d.z - 1.0),
        1.092548 * d.x * d.z,
        0.546274 * (d.x * d.x - d.y * d.y),
    };
}

// Projects an equirectangular radiance map onto the SH-2 basis using the
// per-row solid-angle quadrature weight.
inline ShIrradiance project_sh2(const Panorama& env) {
    ShIrradiance sh;
    int w = env.width(), h = env.height();
    for (int v = 0; v < h; ++v) {
        double weight = equirect_pixel_solid_angle(v, w, h);
        for (int u = 0; u < w; ++u) {
            Vec3 dir = equirect_direction(u, v, w, h);
            Vec3 radiance = env.pixels.rgb(u, v);
            auto basis = sh2_basis(dir);
            for (int k = 0; k < 9; ++k) sh.coeffs[k] += radiance * (basis[k] * weight);
        }
    }
    return sh;
}

// Diffuse irradiance arriving at a surface with the given unit normal,
// via the clamped-cosine convolution (A0 = pi, A1 = 2*pi/3, A2 = pi/4).
inline Vec3 sh_irradiance(const ShIrradiance& sh, const Vec3& normal) {
    static constexpr double kA[9] = {kPi,
                                     2.0 * kPi / 3.0, 2.0 * kPi / 3.0, 2.0 * kPi / 3.0,
                                     kPi / 4.0, kPi / 4.0, kPi / 4.0, kPi / 4.0, kPi / 4.0};
    auto basis = sh2_basis(normal);
    Vec3 e{};
    for (int k = 0; k < 9; ++k) e += sh.coeffs[k] * (kA[k] * basis[k]);
    return {std::max(e.x, 0.0), std::max(e.y, 0.0), std::max(e.z, 0.0)};
}

}  // namespace mvaug

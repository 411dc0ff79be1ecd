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
#include <stdexcept>
#include <vector>

#include "mvaug/image.hpp"
#include "mvaug/lighting.hpp"
#include "mvaug/placement.hpp"
#include "mvaug/raster.hpp"
#include "mvaug/rng.hpp"
#include "mvaug/sh.hpp"

namespace mvaug {

// Per-camera render output: premultiplied-alpha object layer, scalar shadow
// occlusion layer (1 = fully shadowed) and per-pixel depth (+inf where empty).
struct RenderLayers {
    Image object;  // H x W x 4, linear RGB + alpha
    Image shadow;  // H x W x 1
    DepthBuffer depth;
    int degenerate_triangles = 0;

    RenderLayers() = default;
    RenderLayers(int w, int h) : object(w, h, 4), shadow(w, h, 1), depth(w, h) {}
};

namespace detail {

inline Vec3 apply_saturation(const Vec3& rgb, double factor) {
    double luma = luminance(rgb);
    return {luma + factor * (rgb.x - luma), luma + factor * (rgb.y - luma),
            luma + factor * (rgb.z - luma)};
}

// Direct irradiance from a conic point light at a surface point.
inline Vec3 ego_light_irradiance(const EgoLight& light, const Vec3& point,
                                 const Vec3& normal) {
    Vec3 to_point = point - light.position;
    double dist2 = to_point.dot(to_point);
    if (dist2 < 1e-12) return {};
    Vec3 dir = to_point * (1.0 / std::sqrt(dist2));
    if (dir.dot(light.axis) < std::cos(light.half_angle)) return {};
    double cos_in = normal.dot(-dir);
    if (cos_in <= 0.0) return {};
    return light.color * (cos_in / dist2);
}

}  // namespace detail

// Rasterizes the placed instances with Lambertian image-based lighting
// (SH-2 diffuse irradiance) plus ego-light cones. Hidden surfaces are
// resolved with a depth buffer; pixels behind existing scene geometry
// (`proxies`) stay empty so partially occluded assets composite correctly.
inline RenderLayers render_objects(const std::vector<AssetInstance>& instances,
                                   const CameraModel& camera, const ShIrradiance& sh,
                                   const std::vector<EgoLight>& lights,
                                   const DepthBuffer* proxies = nullptr) {
    RenderLayers layers(camera.width, camera.height);
    for (const AssetInstance& inst : instances) {
        if (!inst.mesh) throw std::invalid_argument("render_objects: instance without mesh");
        MeshAsset posed = transformed(*inst.mesh, inst.pose);
        for (const auto& tri : posed.triangles) {
            const Vec3& a = posed.vertices[tri.v[0]];
            const Vec3& b = posed.vertices[tri.v[1]];
            const Vec3& c = posed.vertices[tri.v[2]];
            if ((b - a).cross(c - a).norm() < 1e-12) {
                ++layers.degenerate_triangles;
                continue;
            }
            Vec3 albedo = detail::apply_saturation(tri.albedo, inst.saturation_jitter);
            rasterize_triangle(
                camera, {a, posed.normals[tri.v[0]]}, {b, posed.normals[tri.v[1]]},
                {c, posed.normals[tri.v[2]]},
                [&](int x, int y, double d, const RasterVertex& v) {
                    if (float(d) >= layers.depth.at(x, y)) return;
                    if (proxies && proxies->at(x, y) < float(d)) return;
                    Vec3 irradiance = sh_irradiance(sh, v.normal);
                    for (const EgoLight& l : lights)
                        irradiance += detail::ego_light_irradiance(l, v.position, v.normal);
                    Vec3 out = albedo.cwise_mul(irradiance) * (1.0 / kPi);
                    layers.depth.at(x, y) = float(d);
                    size_t i = layers.object.index(x, y, 0);
                    layers.object.data[i] = float(out.x);
                    layers.object.data[i + 1] = float(out.y);
                    layers.object.data[i + 2] = float(out.z);
                    layers.object.data[i + 3] = 1.0f;
                });
        }
    }
    return layers;
}

// Convenience overload that projects the environment map internally.
inline RenderLayers render_objects(const std::vector<AssetInstance>& instances,
                                   const CameraModel& camera, const EnvironmentMap& env,
                                   const std::vector<EgoLight>& lights,
                                   const DepthBuffer* proxies = nullptr) {
    return render_objects(instances, camera, project_sh2(env.radiance), lights, proxies);
}

struct ShadowParams {
    int taps = 16;                            // 1 = hard shadow
    double cone_half_angle = deg_to_rad(2.0); // softness around the peak
};

// Deterministic tap directions on a cone around `axis` (tap 0 is the axis).
inline std::vector<Vec3> cone_taps(const Vec3& axis, double half_angle, int taps) {
    std::vector<Vec3> out;
    out.reserve(size_t(taps));
    Vec3 w = axis.normalized();
    Vec3 helper = std::abs(w.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    Vec3 u = w.cross(helper).normalized();
    Vec3 v = w.cross(u);
    out.push_back(w);
    constexpr double golden = 2.39996322972865332;
    for (int k = 1; k < taps; ++k) {
        double alpha = half_angle * std::sqrt(double(k) / double(taps - 1));
        double phi = golden * k;
        Vec3 d = w * std::cos(alpha) +
                 (u * std::cos(phi) + v * std::sin(phi)) * std::sin(alpha);
        out.push_back(d.normalized());
    }
    return out;
}

// Renders the shadow layer on the ground-plane shadow catcher: for every
// visible ground pixel, the blocked fraction of rays cast toward the peak
// light direction. Returns an empty (all-zero) layer when the light sits at
// or below the horizon.
inline Image render_shadows(const std::vector<AssetInstance>& instances,
                            const CameraModel& camera, const SkyFeatures& sky,
                            double ground_z = 0.0, const ShadowParams& params = {}) {
    Image shadow(camera.width, camera.height, 1);
    if (instances.empty()) return shadow;
    Vec3 light = sky.peak_direction.normalized();
    if (light.z <= 0.0) return shadow;  // light below horizon: no catcher shadow

    struct Caster {
        MeshAsset mesh;
        Vec2 lo, hi;  // conservative ground-plane bound of the shadow
    };
    std::vector<Caster> casters;
    casters.reserve(instances.size());
    for (const AssetInstance& inst : instances) {
        Caster c{transformed(*inst.mesh, inst.pose), {}, {}};
        double spread = std::tan(params.cone_half_angle);
        Vec2 lo{1e300, 1e300}, hi{-1e300, -1e300};
        for (int k = 0; k < 8; ++k) {
            Vec3 p{(k & 1) ? c.mesh.bbox_max.x : c.mesh.bbox_min.x,
                   (k & 2) ? c.mesh.bbox_max.y : c.mesh.bbox_min.y,
                   (k & 4) ? c.mesh.bbox_max.z : c.mesh.bbox_min.z};
            double h = p.z - ground_z;
            // Footprint corner and its projection along the light direction.
            for (const Vec2& s : {Vec2{p.x, p.y},
                                  Vec2{p.x - light.x * h / light.z,
                                       p.y - light.y * h / light.z}}) {
                double margin = spread * std::max(h, 0.0) / light.z + 1e-3;
                lo = {std::min(lo.x, s.x - margin), std::min(lo.y, s.y - margin)};
                hi = {std::max(hi.x, s.x + margin), std::max(hi.y, s.y + margin)};
            }
        }
        c.lo = lo;
        c.hi = hi;
        casters.push_back(std::move(c));
    }

    std::vector<Vec3> taps = cone_taps(light, params.cone_half_angle, params.taps);
    Vec3 cam_pos = camera.position();
    std::vector<uint8_t> done(size_t(camera.width) * camera.height, 0);

    for (const Caster& caster : casters) {
        // Pixel bound: project a coarse grid over the ground-plane rect.
        double min_px = 1e300, max_px = -1e300, min_py = 1e300, max_py = -1e300;
        const int kGrid = 12;
        for (int gy = 0; gy <= kGrid; ++gy)
            for (int gx = 0; gx <= kGrid; ++gx) {
                Vec3 p{caster.lo.x + (caster.hi.x - caster.lo.x) * gx / kGrid,
                       caster.lo.y + (caster.hi.y - caster.lo.y) * gy / kGrid, ground_z};
                auto px = camera.project(p);
                if (!px) continue;
                min_px = std::min(min_px, px->pixel.x);
                max_px = std::max(max_px, px->pixel.x);
                min_py = std::min(min_py, px->pixel.y);
                max_py = std::max(max_py, px->pixel.y);
            }
        if (min_px > max_px) continue;
        int x0 = std::max(0, int(std::floor(min_px)) - 8);
        int x1 = std::min(camera.width - 1, int(std::ceil(max_px)) + 8);
        int y0 = std::max(0, int(std::floor(min_py)) - 8);
        int y1 = std::min(camera.height - 1, int(std::ceil(max_py)) + 8);

        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                if (done[size_t(y) * camera.width + x]) continue;
                done[size_t(y) * camera.width + x] = 1;
                auto ray = camera.unproject({x + 0.5, y + 0.5});
                if (!ray || ray->z >= 0.0) continue;
                double t = (ground_z - cam_pos.z) / ray->z;
                if (t <= 0.0) continue;
                Vec3 g = cam_pos + *ray * t;
                bool near_any = false;
                for (const Caster& c : casters)
                    if (g.x >= c.lo.x && g.x <= c.hi.x && g.y >= c.lo.y && g.y <= c.hi.y) {
                        near_any = true;
                        break;
                    }
                if (!near_any) continue;
                int blocked = 0;
                for (const Vec3& tap : taps) {
                    Vec3 origin = g + tap * 1e-4;
                    for (const Caster& c : casters)
                        if (ray_mesh(origin, tap, c.mesh)) {
                            ++blocked;
                            break;
                        }
                }
                shadow.at(x, y) = float(double(blocked) / taps.size());
            }
        }
    }
    return shadow;
}

struct PostProcessParams {
    double shadow_strength = 1.0;  // [0, 1]
    double saturation = 1.0;       // [0.7, 1.3]
    double blur_sigma = 0.0;       // [0, 1.5] pixels
    double noise_sigma = 0.0;      // [0, 0.25] linear units
    uint64_t noise_seed = 0;

    void validate() const {
        if (shadow_strength < 0.0 || shadow_strength > 1.0)
            throw std::invalid_argument("PostProcessParams: shadow_strength out of [0,1]");
        if (saturation < 0.0 || saturation > 1.3)
            throw std::invalid_argument("PostProcessParams: saturation out of [0,1.3]");
        if (blur_sigma < 0.0 || blur_sigma > 1.5)
            throw std::invalid_argument("PostProcessParams: blur_sigma out of [0,1.5]");
        if (noise_sigma < 0.0 || noise_sigma > 0.25)
            throw std::invalid_argument("PostProcessParams: noise_sigma out of [0,0.25]");
    }
};

namespace detail {

// Separable Gaussian blur over the color channels; alpha is untouched.
inline void blur_object_rgb(Image& object, double sigma) {
    int radius = int(std::ceil(3.0 * sigma));
    if (radius <= 0) return;
    std::vector<double> kernel(size_t(radius) * 2 + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[size_t(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[size_t(i + radius)];
    }
    for (double& k : kernel) k /= sum;

    Image tmp = object;
    for (int y = 0; y < object.height; ++y)
        for (int x = 0; x < object.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    int xi = std::clamp(x + i, 0, object.width - 1);
                    acc += kernel[size_t(i + radius)] * object.at(xi, y, c);
                }
                tmp.at(x, y, c) = float(acc);
            }
    for (int y = 0; y < object.height; ++y)
        for (int x = 0; x < object.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    int yi = std::clamp(y + i, 0, object.height - 1);
                    acc += kernel[size_t(i + radius)] * tmp.at(x, yi, c);
                }
                object.at(x, y, c) = float(acc);
            }
}

}  // namespace detail

// Scales the shadow layer, jitters object-layer saturation, and applies the
// optional sensor model (Gaussian blur, per-channel noise). Alpha and depth
// are untouched.
inline RenderLayers postprocess(const RenderLayers& layers, const PostProcessParams& params) {
    params.validate();
    RenderLayers out = layers;

    for (float& s : out.shadow.data) s = float(s * params.shadow_strength);

    if (params.saturation != 1.0)
        for (int y = 0; y < out.object.height; ++y)
            for (int x = 0; x < out.object.width; ++x) {
                size_t i = out.object.index(x, y, 0);
                Vec3 rgb{out.object.data[i], out.object.data[i + 1], out.object.data[i + 2]};
                Vec3 adj = detail::apply_saturation(rgb, params.saturation);
                out.object.data[i] = float(adj.x);
                out.object.data[i + 1] = float(adj.y);
                out.object.data[i + 2] = float(adj.z);
            }

    if (params.blur_sigma > 0.0) detail::blur_object_rgb(out.object, params.blur_sigma);

    if (params.noise_sigma > 0.0) {
        Rng rng(params.noise_seed);
        for (int y = 0; y < out.object.height; ++y)
            for (int x = 0; x < out.object.width; ++x) {
                if (out.object.at(x, y, 3) <= 0.f) continue;
                size_t i = out.object.index(x, y, 0);
                for (int c = 0; c < 3; ++c) {
                    double v = out.object.data[i + c] + rng.normal(0.0, params.noise_sigma);
                    out.object.data[i + c] = float(std::max(v, 0.0));
                }
            }
    }
    return out;
}

// Premultiplied over-operator on linear images:
// out = object.rgb + (1 - alpha) * real * (1 - shadow), clamped to [0, 1].
inline Image composite_linear(const Image& real_linear, const RenderLayers& layers) {
    if (real_linear.width != layers.object.width ||
        real_linear.height != layers.object.height || real_linear.channels != 3)
        throw std::invalid_argument("composite: resolution mismatch");
    Image out(real_linear.width, real_linear.height, 3);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            float shadow = layers.shadow.at(x, y);
            float alpha = layers.object.at(x, y, 3);
            for (int c = 0; c < 3; ++c) {
                float darkened = real_linear.at(x, y, c) * (1.0f - shadow);
                float v = layers.object.at(x, y, c) + (1.0f - alpha) * darkened;
                out.at(x, y, c) = std::min(std::max(v, 0.0f), 1.0f);
            }
        }
    return out;
}

// 8-bit entry point: linearize, composite, de-linearize. Pixels with no
// object coverage and no shadow pass through unchanged; the gamma round
// trip maps every 8-bit value back to itself, so this equals the full
// decode/encode path bit for bit. With empty layers it is the identity.
inline Image8 composite(const Image8& real, const RenderLayers& layers) {
    if (real.width != layers.object.width || real.height != layers.object.height ||
        real.channels != 3)
        throw std::invalid_argument("composite: resolution mismatch");
    static const auto lut = [] {
        std::array<float, 256> t{};
        for (int i = 0; i < 256; ++i) t[size_t(i)] = float(linearize_gamma22(i / 255.0));
        return t;
    }();
    Image8 out = real;
    for (int y = 0; y < real.height; ++y)
        for (int x = 0; x < real.width; ++x) {
            float shadow = layers.shadow.at(x, y);
            float alpha = layers.object.at(x, y, 3);
            if (shadow == 0.0f && alpha == 0.0f) continue;
            for (int c = 0; c < 3; ++c) {
                float lin = lut[real.at(x, y, c)];
                float darkened = lin * (1.0f - shadow);
                float v = layers.object.at(x, y, c) + (1.0f - alpha) * darkened;
                double enc = delinearize_gamma22(std::min(std::max(double(v), 0.0), 1.0));
                out.at(x, y, c) = uint8_t(std::lround(enc * 255.0));
            }
        }
    return out;
}

}  // namespace mvaug

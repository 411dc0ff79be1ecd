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

#include <algorithm>
#include <memory>
#include <stdexcept>
#include <vector>

#include "mvaug/panorama.hpp"

namespace mvaug {

// Compact description of the dominant light in a panorama.
struct SkyFeatures {
    Vec3 peak_direction{0, 0, 1};   // unit vector toward the brightest region
    Vec3 peak_intensity{0, 0, 0};   // linear radiance, componentwise >= 0
    std::vector<double> latent;     // estimator-owned, 64 entries

    void validate() const {
        if (std::abs(peak_direction.norm() - 1.0) > 1e-6)
            throw std::invalid_argument("SkyFeatures: peak_direction must be unit length");
        if (peak_intensity.x < 0 || peak_intensity.y < 0 || peak_intensity.z < 0)
            throw std::invalid_argument("SkyFeatures: peak_intensity must be >= 0");
    }
};

// HDR radiance panorama plus the sky features that produced it.
struct EnvironmentMap {
    Panorama radiance;
    SkyFeatures sky;
};

// Rec. 709 luma of linear RGB.
inline double luminance(const Vec3& rgb) {
    return 0.2126 * rgb.x + 0.7152 * rgb.y + 0.0722 * rgb.z;
}

// Scalar map exp(100 * (dot(pixel_direction, f_d) - 1)), in (0, 1].
inline Image peak_direction_map(const Image& pe, const Vec3& peak_dir) {
    if (std::abs(peak_dir.norm() - 1.0) > 1e-6)
        throw std::invalid_argument("peak_direction_map: direction must be unit length");
    Image out(pe.width, pe.height, 1);
    for (int y = 0; y < pe.height; ++y)
        for (int x = 0; x < pe.width; ++x) {
            // Unit inputs keep the dot product <= 1; clamp float rounding noise
            // so the map stays in (0, 1].
            double d = std::min(pe.rgb(x, y).dot(peak_dir), 1.0);
            out.at(x, y) = float(std::exp(100.0 * (d - 1.0)));
        }
    return out;
}

// 3-channel map equal to f_i where the peak map is >= 0.98 and zero elsewhere.
inline Image peak_intensity_map(const Image& peak_map, const Vec3& peak_intensity) {
    Image out(peak_map.width, peak_map.height, 3);
    for (int y = 0; y < peak_map.height; ++y)
        for (int x = 0; x < peak_map.width; ++x)
            if (peak_map.at(x, y) >= 0.98f) out.set_rgb(x, y, peak_intensity);
    return out;
}

// LDR -> HDR expansion interface. Implementations must be deterministic and
// safe to call concurrently on different scenes.
class HdrEstimator {
  public:
    virtual ~HdrEstimator() = default;
    virtual std::pair<Panorama, SkyFeatures> expand(const Panorama& ldr,
                                                    const Image& pe) const = 0;
};

// Deterministic closed-form estimator: the peak direction is the
// radiance-weighted mean direction of the top-percentile pixels, the peak
// intensity amplifies the brightest pixel, and the HDR image adds the peak
// encoding over saturated pixels only. Stands in for a learned model behind
// the same interface.
class AnalyticHdrEstimator final : public HdrEstimator {
  public:
    struct Params {
        double sun_scale = 50.0;             // f_i multiplier when saturation exists
        double saturation_threshold = 0.9;   // linear, per channel
        double top_fraction = 0.01;          // luminance percentile defining the peak
    };

    AnalyticHdrEstimator() = default;
    explicit AnalyticHdrEstimator(const Params& p) : params_(p) {}

    std::pair<Panorama, SkyFeatures> expand(const Panorama& ldr,
                                            const Image& pe) const override {
        int w = ldr.width(), h = ldr.height();

        std::vector<float> lum(size_t(w) * h);
        double max_lum = -1.0;
        Vec3 max_rgb{};
        bool any_saturated = false;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                Vec3 c = ldr.pixels.rgb(x, y);
                double l = luminance(c);
                lum[size_t(y) * w + x] = float(l);
                if (l > max_lum) {
                    max_lum = l;
                    max_rgb = c;
                }
                if (c.max_component() >= params_.saturation_threshold) any_saturated = true;
            }

        // Radiance-weighted mean direction over the top-percentile pixels.
        std::vector<float> sorted = lum;
        size_t qi = size_t(double(sorted.size() - 1) * (1.0 - params_.top_fraction));
        std::nth_element(sorted.begin(), sorted.begin() + qi, sorted.end());
        float threshold = sorted[qi];
        Vec3 dir_sum{};
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float l = lum[size_t(y) * w + x];
                if (l >= threshold && l > 0.f)
                    dir_sum += equirect_direction(x, y, w, h) * double(l);
            }
        SkyFeatures sky;
        sky.peak_direction = dir_sum.norm() > 0.0 ? dir_sum.normalized() : Vec3{0, 0, 1};
        sky.latent.assign(64, 0.0);

        Panorama hdr = ldr;
        if (!any_saturated) {
            sky.peak_intensity = max_rgb;
            return {std::move(hdr), std::move(sky)};
        }

        sky.peak_intensity = max_rgb * params_.sun_scale;
        Image peak = peak_direction_map(pe, sky.peak_direction);
        Image intensity = peak_intensity_map(peak, sky.peak_intensity);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c) {
                    float v = hdr.pixels.at(x, y, c);
                    if (v >= float(params_.saturation_threshold))
                        hdr.pixels.at(x, y, c) = v + intensity.at(x, y, c) * peak.at(x, y);
                }
        return {std::move(hdr), std::move(sky)};
    }

  private:
    Params params_;
};

// Runs the estimator on an inpainted LDR panorama.
inline std::pair<Panorama, SkyFeatures> expand_hdr(const Panorama& ldr, const Image& pe,
                                                   const HdrEstimator& estimator) {
    if (!ldr.fully_covered())
        throw std::invalid_argument("expand_hdr: panorama must be fully covered (inpainted)");
    if (pe.width != ldr.width() || pe.height != ldr.height())
        throw std::invalid_argument("expand_hdr: direction encoding size mismatch");
    return estimator.expand(ldr, pe);
}

// Per-pixel, per-channel selection: HDR where the LDR channel is saturated
// (>= 0.9), LDR otherwise.
inline EnvironmentMap fuse_envmap(const Panorama& ldr, const Panorama& hdr,
                                  const SkyFeatures& sky,
                                  double saturation_threshold = 0.9) {
    if (ldr.width() != hdr.width() || ldr.height() != hdr.height())
        throw std::invalid_argument("fuse_envmap: dimension mismatch");
    EnvironmentMap env;
    env.radiance = ldr;
    env.sky = sky;
    for (size_t i = 0; i < env.radiance.pixels.data.size(); ++i) {
        float l = ldr.pixels.data[i];
        env.radiance.pixels.data[i] = l >= float(saturation_threshold) ? hdr.pixels.data[i] : l;
    }
    std::fill(env.radiance.coverage.begin(), env.radiance.coverage.end(), 1);
    return env;
}

// Solid-angle-weighted mean luminance of an environment map.
inline double mean_luminance(const Panorama& env) {
    double sum = 0.0, wsum = 0.0;
    int w = env.width(), h = env.height();
    for (int v = 0; v < h; ++v) {
        double weight = equirect_pixel_solid_angle(v, w, h);
        for (int u = 0; u < w; ++u) {
            sum += luminance(env.pixels.rgb(u, v)) * weight;
            wsum += weight;
        }
    }
    return wsum > 0.0 ? sum / wsum : 0.0;
}

// Conic point light attached to the ego vehicle.
struct EgoLight {
    Vec3 position;          // ego frame, meters
    Vec3 axis;              // unit
    double half_angle = 0;  // radians, in (0, pi/2]
    Vec3 color;             // radiant intensity, linear RGB

    void validate() const {
        if (half_angle <= 0.0 || half_angle > kPi / 2.0)
            throw std::invalid_argument("EgoLight: half angle must be in (0, pi/2]");
        if (color.x < 0 || color.y < 0 || color.z < 0)
            throw std::invalid_argument("EgoLight: color must be >= 0");
    }
};

// Rig light geometry; defaults model a passenger car with the ego origin at
// the center of the rear axle, x forward.
struct RigLightConfig {
    double headlight_intensity = 20.0;
    double rear_intensity = 4.0;
    double half_angle = deg_to_rad(30.0);
    Vec3 headlight_color{1.0, 0.95, 0.85};
    Vec3 rear_color{1.0, 0.1, 0.1};
    std::vector<Vec3> headlight_positions{{3.7, 0.6, 0.65}, {3.7, -0.6, 0.65}};
    std::vector<Vec3> rear_positions{{-1.0, 0.6, 0.8}, {-1.0, -0.6, 0.8}};
    Vec3 headlight_axis = Vec3{1.0, 0.0, -0.12}.normalized();
    Vec3 rear_axis = Vec3{-1.0, 0.0, -0.12}.normalized();
};

// Ego lights trigger when the mean luminance *falls below* 0.5; exactly 0.5
// keeps them off.
inline bool ego_lights_active(double mean_lum) { return mean_lum < 0.5; }

// Headlight and rear-light cones, active only when the mean luminance of the
// environment map falls below 0.5 (night scenes).
inline std::vector<EgoLight> ego_lights(const EnvironmentMap& env,
                                        const RigLightConfig& config = {}) {
    if (!ego_lights_active(mean_luminance(env.radiance))) return {};
    std::vector<EgoLight> lights;
    for (const Vec3& p : config.headlight_positions)
        lights.push_back({p, config.headlight_axis, config.half_angle,
                          config.headlight_color * config.headlight_intensity});
    for (const Vec3& p : config.rear_positions)
        lights.push_back({p, config.rear_axis, config.half_angle,
                          config.rear_color * config.rear_intensity});
    for (const auto& l : lights) l.validate();
    return lights;
}

}  // namespace mvaug

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mvaug/lighting.hpp"
#include "mvaug/sh.hpp"

using namespace mvaug;

namespace {

Panorama uniform_panorama(int w, int h, const Vec3& rgb) {
    Panorama p(w, h);
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) p.pixels.set_rgb(u, v, rgb);
    std::fill(p.coverage.begin(), p.coverage.end(), 1);
    return p;
}

}  // namespace

TEST_CASE("peak direction map matches the exponential formula exactly") {
    const int w = 16, h = 8;
    Image pe = direction_encoding(w, h);
    Vec3 f_d = pe.rgb(5, 3).normalized();
    Image map = peak_direction_map(pe, f_d);

    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            double dot = std::min(pe.rgb(u, v).dot(f_d), 1.0);
            CHECK(map.at(u, v) == float(std::exp(100.0 * (dot - 1.0))));
            CHECK(map.at(u, v) <= 1.0f);
        }
    // The aligned pixel evaluates to exp(0) = 1.
    CHECK(map.at(5, 3) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("peak direction values for orthogonal and opposite directions") {
    // exp(-100) is a float denormal, exp(-200) flushes to zero; both equal
    // the formula rounded to storage precision.
    CHECK(float(std::exp(100.0 * (0.0 - 1.0))) == doctest::Approx(3.72008e-44).epsilon(0.05));
    Image pe(1, 1, 3);
    pe.set_rgb(0, 0, {0, 0, 1});
    Image ortho = peak_direction_map(pe, {1, 0, 0});
    CHECK(ortho.at(0, 0) == float(std::exp(-100.0)));
    Image opposite = peak_direction_map(pe, {0, 0, -1});
    CHECK(opposite.at(0, 0) == float(std::exp(-200.0)));
}

TEST_CASE("peak direction map rejects non-unit directions") {
    Image pe = direction_encoding(8, 4);
    CHECK_THROWS_AS(peak_direction_map(pe, {0, 0, 2}), std::invalid_argument);
}

TEST_CASE("peak intensity map thresholds at 0.98 inclusive") {
    Image peak(3, 1, 1);
    peak.at(0, 0) = 0.99f;
    peak.at(1, 0) = 0.97f;
    peak.at(2, 0) = 0.98f;
    Image out = peak_intensity_map(peak, {2, 3, 4});
    CHECK(out.rgb(0, 0).x == 2.0);
    CHECK(out.rgb(0, 0).y == 3.0);
    CHECK(out.rgb(0, 0).z == 4.0);
    CHECK(out.rgb(1, 0).norm() == 0.0);
    CHECK(out.rgb(2, 0).x == 2.0);  // boundary is inclusive
}

TEST_CASE("environment fusion selects per channel at 0.9 inclusive") {
    Panorama ldr(4, 2), hdr(4, 2);
    std::fill(ldr.coverage.begin(), ldr.coverage.end(), 1);
    ldr.pixels.set_rgb(0, 0, {0.95, 0.5, 0.9});
    hdr.pixels.set_rgb(0, 0, {5.0, 5.0, 5.0});
    SkyFeatures sky;
    EnvironmentMap env = fuse_envmap(ldr, hdr, sky);
    CHECK(env.radiance.pixels.at(0, 0, 0) == 5.0f);   // saturated -> hdr
    CHECK(env.radiance.pixels.at(0, 0, 1) == 0.5f);   // below -> ldr
    CHECK(env.radiance.pixels.at(0, 0, 2) == 5.0f);   // exactly 0.9 -> hdr

    // Purity: every output channel equals one of the two inputs bit-for-bit.
    for (size_t i = 0; i < env.radiance.pixels.data.size(); ++i) {
        float v = env.radiance.pixels.data[i];
        CHECK((v == ldr.pixels.data[i] || v == hdr.pixels.data[i]));
    }

    Panorama mismatched(8, 4);
    CHECK_THROWS_AS(fuse_envmap(ldr, mismatched, sky), std::invalid_argument);
}

TEST_CASE("luminance coefficients") {
    CHECK(luminance({1, 1, 1}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(luminance({1, 0, 0}) == 0.2126);
    CHECK(luminance({0, 1, 0}) == 0.7152);
    CHECK(luminance({0, 0, 1}) == 0.0722);
    CHECK(luminance({0, 0, 0}) == 0.0);
}

TEST_CASE("analytic estimator: dark panorama passes through") {
    Panorama ldr = uniform_panorama(32, 16, {0.1, 0.2, 0.3});
    ldr.pixels.set_rgb(7, 4, {0.25, 0.3, 0.2});  // brightest pixel
    Image pe = direction_encoding(32, 16);
    AnalyticHdrEstimator estimator;

    auto [hdr, sky] = expand_hdr(ldr, pe, estimator);
    CHECK(hdr.pixels.data == ldr.pixels.data);
    // f_i is the brightest pixel's value, un-amplified.
    CHECK(sky.peak_intensity.x == doctest::Approx(0.25));
    CHECK(sky.peak_intensity.y == doctest::Approx(0.3));
    CHECK(sky.peak_intensity.z == doctest::Approx(0.2));
}

TEST_CASE("analytic estimator: saturated disc drives the peak direction") {
    const int w = 128, h = 64;
    Panorama ldr(w, h);
    std::fill(ldr.coverage.begin(), ldr.coverage.end(), 1);
    Vec3 disc_center = direction_from_angles(deg_to_rad(40.0), deg_to_rad(35.0));
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            Vec3 d = equirect_direction(u, v, w, h);
            bool in_disc = d.dot(disc_center) > std::cos(deg_to_rad(8.0));
            ldr.pixels.set_rgb(u, v, in_disc ? Vec3{1.0, 1.0, 1.0} : Vec3{0.05, 0.05, 0.08});
        }
    Image pe = direction_encoding(w, h);
    AnalyticHdrEstimator estimator;
    auto [hdr, sky] = expand_hdr(ldr, pe, estimator);

    // Oracle: centroid of the top-percentile (the disc itself).
    double angle = rad_to_deg(std::acos(std::clamp(sky.peak_direction.dot(disc_center), -1.0, 1.0)));
    CHECK(angle < 2.0);

    // Expansion only brightens: hdr >= ldr everywhere, strictly above 1 at the peak.
    double total_ldr = 0, total_hdr = 0;
    for (size_t i = 0; i < ldr.pixels.data.size(); ++i) {
        CHECK(hdr.pixels.data[i] >= ldr.pixels.data[i]);
        total_ldr += ldr.pixels.data[i];
        total_hdr += hdr.pixels.data[i];
    }
    CHECK(total_hdr > total_ldr);
    CHECK(sky.peak_intensity.x == doctest::Approx(50.0));  // sun scale x max pixel

    // Determinism: bit-identical on a second run.
    auto [hdr2, sky2] = expand_hdr(ldr, pe, estimator);
    CHECK(hdr2.pixels.data == hdr.pixels.data);
    CHECK((sky2.peak_direction - sky.peak_direction).norm() == 0.0);
}

TEST_CASE("expand_hdr requires full coverage") {
    Panorama holey(32, 16);
    holey.set_covered(0, 0, true);
    Image pe = direction_encoding(32, 16);
    AnalyticHdrEstimator estimator;
    CHECK_THROWS_AS(expand_hdr(holey, pe, estimator), std::invalid_argument);
}

TEST_CASE("ego light activation threshold") {
    CHECK(ego_lights_active(0.4));
    CHECK(!ego_lights_active(0.5));  // "falls below" excludes the boundary
    CHECK(!ego_lights_active(0.6));

    SkyFeatures sky;
    EnvironmentMap night{uniform_panorama(32, 16, {0.1, 0.1, 0.1}), sky};
    EnvironmentMap day{uniform_panorama(32, 16, {0.9, 0.9, 0.9}), sky};
    auto lights_on = ego_lights(night);
    auto lights_off = ego_lights(day);
    CHECK(lights_on.size() == 4);  // two headlights + two rear lights
    CHECK(lights_off.empty());

    // Monotonicity: scaling a dark map darker never turns lights off.
    EnvironmentMap darker{uniform_panorama(32, 16, {0.01, 0.01, 0.01}), sky};
    CHECK(ego_lights(darker).size() == 4);
}

TEST_CASE("mean luminance is solid-angle weighted") {
    // Top half bright, bottom half dark: with cos(elevation) weighting the
    // mean is exactly the average of the two (hemispheres have equal area).
    const int w = 64, h = 32;
    Panorama p(w, h);
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
            p.pixels.set_rgb(u, v, v < h / 2 ? Vec3{1, 1, 1} : Vec3{0, 0, 0});
    CHECK(mean_luminance(p) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("sh irradiance of a constant environment is exact") {
    Panorama env = uniform_panorama(128, 64, {1.0, 1.0, 1.0});
    ShIrradiance sh = project_sh2(env);
    for (const Vec3& n : {Vec3{0, 0, 1}, Vec3{1, 0, 0}, Vec3{0.6, -0.48, 0.64}}) {
        Vec3 e = sh_irradiance(sh, n.normalized());
        CHECK(e.x == doctest::Approx(kPi).epsilon(0.002));
        CHECK(e.y == doctest::Approx(kPi).epsilon(0.002));
        CHECK(e.z == doctest::Approx(kPi).epsilon(0.002));
    }
}

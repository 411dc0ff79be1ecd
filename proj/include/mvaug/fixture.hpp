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

#include "mvaug/pipeline.hpp"

namespace mvaug {

enum class FixtureKind { kSurroundFisheye, kStereoPinhole, kParking };

inline FixtureKind fixture_kind_from_string(const std::string& s) {
    if (s == "surround-fisheye") return FixtureKind::kSurroundFisheye;
    if (s == "stereo-pinhole") return FixtureKind::kStereoPinhole;
    if (s == "parking") return FixtureKind::kParking;
    throw std::invalid_argument("unknown fixture kind: " + s);
}

struct FixtureOptions {
    int scenes = 6;
    int image_width = 640;
    int image_height = 480;
};

namespace detail {

// Analytic toy world: gradient sky with a saturating sun disc, a checkered
// ground plane, and box-shaped parked vehicles. Everything the fixture
// renders is consistent with the labels it writes.
struct ToyWorld {
    Vec3 sun_direction;
    std::vector<Cuboid3D> vehicles;
    std::vector<MeshAsset> vehicle_meshes;  // posed
    double ground_z = 0.0;

    Vec3 sky(const Vec3& dir) const {
        if (dir.dot(sun_direction) > std::cos(deg_to_rad(1.5))) return {1.0, 1.0, 1.0};
        double t = std::clamp(dir.z, 0.0, 1.0);
        Vec3 horizon{0.80, 0.85, 0.90}, zenith{0.45, 0.60, 0.95};
        return horizon * (1.0 - t) + zenith * t;
    }

    Vec3 ground(const Vec3& p) const {
        bool odd = (int(std::floor(p.x)) + int(std::floor(p.y))) & 1;
        double base = odd ? 0.60 : 0.45;
        return {base, base, base * 0.98};
    }

    // Radiance seen along a camera ray (linear).
    Vec3 trace(const Vec3& origin, const Vec3& dir) const {
        double best_t = std::numeric_limits<double>::infinity();
        int hit_vehicle = -1;
        for (size_t i = 0; i < vehicle_meshes.size(); ++i) {
            auto t = ray_mesh(origin, dir, vehicle_meshes[i]);
            if (t && *t < best_t) {
                best_t = *t;
                hit_vehicle = int(i);
            }
        }
        if (dir.z < 0.0) {
            double t_ground = (ground_z - origin.z) / dir.z;
            if (t_ground > 0.0 && t_ground < best_t)
                return ground(origin + dir * t_ground);
        }
        if (hit_vehicle >= 0) {
            // Flat-shaded gray box with a little sun modulation.
            Vec3 p = origin + dir * best_t;
            Vec3 n = box_normal(vehicle_meshes[size_t(hit_vehicle)], p);
            double shade = 0.35 + 0.45 * std::max(0.0, n.dot(sun_direction));
            return {shade, shade, shade};
        }
        return sky(dir);
    }

    static Vec3 box_normal(const MeshAsset& mesh, const Vec3& p) {
        Vec3 mid = (mesh.bbox_min + mesh.bbox_max) * 0.5;
        Vec3 half = (mesh.bbox_max - mesh.bbox_min) * 0.5;
        Vec3 d = p - mid;
        double rx = std::abs(d.x) / half.x, ry = std::abs(d.y) / half.y,
               rz = std::abs(d.z) / half.z;
        if (rx >= ry && rx >= rz) return {d.x > 0 ? 1.0 : -1.0, 0, 0};
        if (ry >= rz) return {0, d.y > 0 ? 1.0 : -1.0, 0};
        return {0, 0, d.z > 0 ? 1.0 : -1.0};
    }
};

inline CameraModel fixture_fisheye(const Vec3& position, const Vec3& forward, int w, int h) {
    CameraModel cam;
    cam.kind = CameraKind::kFtheta;
    cam.width = w;
    cam.height = h;
    cam.principal_point = {w / 2.0, h / 2.0};
    // Lens scales with resolution so reduced-size fixtures keep their FOV.
    double s = w / 640.0;
    cam.ftheta_coeffs = {210.0 * s, 0.0, -8.0 * s, 0.0};
    cam.theta_max = 1.55;
    cam.extrinsics = {look_rotation(forward), position};
    return cam;
}

inline CameraModel fixture_pinhole(const Vec3& position, const Vec3& forward, int w, int h) {
    CameraModel cam;
    cam.kind = CameraKind::kPinhole;
    cam.width = w;
    cam.height = h;
    cam.principal_point = {w / 2.0, h / 2.0};
    cam.fx = cam.fy = 400.0 * (w / 640.0);
    cam.extrinsics = {look_rotation(forward), position};
    return cam;
}

inline Image8 render_toy_camera(const ToyWorld& world, const CameraModel& cam) {
    Image linear(cam.width, cam.height, 3);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            auto ray = cam.unproject({x + 0.5, y + 0.5});
            Vec3 color = ray ? world.trace(cam.position(), *ray) : Vec3{0, 0, 0};
            linear.set_rgb(x, y, color);
        }
    return encode_srgb8(linear);
}

inline void write_fixture_catalog(const fs::path& dir, FixtureKind kind) {
    fs::create_directories(dir / "meshes");
    json assets = json::array();
    auto add = [&](const std::string& id, const std::string& cls, int group,
                   const MeshAsset& mesh) {
        save_obj(dir / "meshes" / (id + ".obj"), mesh, id);
        assets.push_back(json{{"id", id},
                              {"class", cls},
                              {"group", group},
                              {"mesh", "meshes/" + id + ".obj"}});
    };
    if (kind == FixtureKind::kParking) {
        add("lock_locked", "ground_lock_locked", 0,
            make_box({0.45, 0.35, 0.40}, {0.85, 0.75, 0.15}));
        add("lock_unlocked", "ground_lock_unlocked", 1,
            make_box({0.45, 0.35, 0.08}, {0.85, 0.75, 0.15}));
    } else if (kind == FixtureKind::kStereoPinhole) {
        add("cube", "hazard", 0, make_box({1.0, 1.0, 1.0}, {0.8, 0.3, 0.25}));
    } else {
        add("box_small", "hazard", 0, make_box({0.5, 0.5, 0.5}, {0.8, 0.3, 0.25}));
        add("box_tall", "hazard", 1, make_box({0.4, 0.4, 1.0}, {0.25, 0.45, 0.8}));
        add("box_wide", "hazard", 2, make_box({1.2, 0.8, 0.7}, {0.9, 0.7, 0.2}));
    }
    write_text_file(dir / "catalog.json", json{{"assets", assets}}.dump(2) + "\n");
}

inline void write_fixture_config(const fs::path& dir, FixtureKind kind, uint64_t seed) {
    json policy;
    if (kind == FixtureKind::kParking) {
        policy = {{"counts", {1, 2}},
                  {"count_probs", {0.5, 0.5}},
                  {"group_probs", {0.5, 0.5}},
                  {"region", {{"kind", "parking_spots"}}},
                  {"max_attempts", 10},
                  {"parking_noise_sigma", 0.15}};
    } else if (kind == FixtureKind::kStereoPinhole) {
        policy = {{"counts", {1}},
                  {"count_probs", {1.0}},
                  {"group_probs", {1.0}},
                  {"region", {{"kind", "rectangle"}, {"longitudinal", 10.0}, {"lateral", 3.0}}},
                  {"max_attempts", 30}};
    } else {
        policy = {{"counts", {3}},
                  {"count_probs", {1.0}},
                  {"group_probs", {0.5, 0.25, 0.25}},
                  {"region", {{"kind", "rectangle"}, {"longitudinal", 12.0}, {"lateral", 6.0}}},
                  {"max_attempts", 10}};
    }
    json render = {{"panorama_width", 1024},
                   {"panorama_height", 512},
                   {"shadow_taps", 16},
                   {"min_coverage", kind == FixtureKind::kStereoPinhole ? 0.05 : 0.6}};
    json cfg = {{"dataset", "."},
                {"output", "augmented"},
                {"catalog", "catalog.json"},
                {"seed", seed},
                {"jobs", 2},
                {"policy", policy},
                {"estimator", {{"type", "analytic"}, {"sun_scale", 50.0}}},
                {"render", render}};
    write_text_file(dir / "config.json", cfg.dump(2) + "\n");
}

}  // namespace detail

// Writes a small synthetic dataset with procedurally rendered images, known
// cameras, and exact analytic ground truth, plus a matching asset catalog
// and run configuration. Byte-identical for a fixed seed.
inline void gen_fixture(FixtureKind kind, const fs::path& out_dir, uint64_t seed,
                        const FixtureOptions& options = {}) {
    fs::create_directories(out_dir);
    detail::write_fixture_catalog(out_dir, kind);
    detail::write_fixture_config(out_dir, kind, seed);

    int w = options.image_width, h = options.image_height;
    for (int s = 0; s < options.scenes; ++s) {
        char id_buf[32];
        std::snprintf(id_buf, sizeof(id_buf), "scene_%04d", s);
        std::string scene_id(id_buf);
        Rng rng = Rng::stream(seed, "fixture_" + scene_id);

        detail::ToyWorld world;
        world.sun_direction = direction_from_angles(rng.uniform(-kPi, kPi),
                                                    deg_to_rad(rng.uniform(25.0, 55.0)));

        SceneManifest manifest;
        manifest.scene_id = scene_id;
        manifest.directory = out_dir;

        // Parked vehicles: in front and behind, outside the hazard region
        // used by the surround config's lateral band where possible.
        int n_vehicles = kind == FixtureKind::kParking ? 0 : 2 + int(rng.uniform_index(2));
        for (int i = 0; i < n_vehicles; ++i) {
            double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
            Cuboid3D car;
            car.dimensions = {4.4, 1.8, 1.5};
            car.center = {rng.uniform(8.0, 18.0) * side, rng.uniform(-5.0, 5.0), 0.75};
            car.yaw = rng.uniform(-kPi, kPi);
            car.class_label = "vehicle";
            car.visibility = 1.0;
            manifest.labels.cuboids.push_back(car);
            world.vehicles.push_back(car);
            world.vehicle_meshes.push_back(transformed(
                make_box(car.dimensions), {Mat3::rotation_z(car.yaw), car.center}));
        }

        // Cameras.
        if (kind == FixtureKind::kStereoPinhole) {
            manifest.cameras.push_back(
                {"left", scene_id + "_left.png",
                 detail::fixture_pinhole({2.2, 0.3, 1.2}, {1, 0, 0}, w, h)});
            manifest.cameras.push_back(
                {"right", scene_id + "_right.png",
                 detail::fixture_pinhole({2.2, -0.3, 1.2}, {1, 0, 0}, w, h)});
        } else {
            manifest.cameras.push_back(
                {"front", scene_id + "_front.png",
                 detail::fixture_fisheye({2.2, 0.0, 1.0}, {1, 0, 0}, w, h)});
            manifest.cameras.push_back(
                {"left", scene_id + "_left.png",
                 detail::fixture_fisheye({0.5, 0.9, 1.0}, {0, 1, 0}, w, h)});
            manifest.cameras.push_back(
                {"rear", scene_id + "_rear.png",
                 detail::fixture_fisheye({-1.2, 0.0, 1.0}, {-1, 0, 0}, w, h)});
            manifest.cameras.push_back(
                {"right", scene_id + "_right.png",
                 detail::fixture_fisheye({0.5, -0.9, 1.0}, {0, -1, 0}, w, h)});
        }

        // Freespace ground truth from the placed vehicles.
        manifest.labels.freespace = RadialDistanceMap::unbounded(360);
        for (const auto& car : manifest.labels.cuboids)
            manifest.labels.freespace =
                rdm_update(manifest.labels.freespace, car, "vehicle");

        // Parking spots along the right side; one pre-occupied.
        if (kind == FixtureKind::kParking) {
            for (int i = 0; i < 6; ++i) {
                double y0 = -9.0 + 3.0 * i;
                ParkingSpot spot;
                spot.polygon = {{3.0, y0}, {5.6, y0}, {5.6, y0 + 1.6}, {3.0, y0 + 1.6}};
                spot.available = i != 2;
                spot.lock_state = "none";
                manifest.labels.parking.push_back(spot);
            }
        }

        for (const auto& cam : manifest.cameras) {
            Image8 img = detail::render_toy_camera(world, cam.model);
            write_png(out_dir / cam.image, img);
        }
        save_manifest(out_dir / (scene_id + ".json"), manifest);
    }
}

}  // namespace mvaug

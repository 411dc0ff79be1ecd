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

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "mvaug/io.hpp"
#include "mvaug/labels.hpp"
#include "mvaug/lighting.hpp"
#include "mvaug/panorama.hpp"
#include "mvaug/placement.hpp"
#include "mvaug/render.hpp"

namespace mvaug {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kManifestSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Dataset manifest

struct ManifestCamera {
    std::string name;
    std::string image;  // path relative to the manifest
    CameraModel model;
};

struct SceneManifest {
    std::string scene_id;
    RigidTransform ego_pose;
    double ground_z = 0.0;
    std::vector<ManifestCamera> cameras;
    LabelSet labels;
    std::map<std::string, std::string> depth_paths;         // optional
    std::map<std::string, std::string> segmentation_paths;  // optional
    fs::path directory;  // where the manifest was loaded from
};

namespace detail {

inline json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
inline Vec3 vec3_from_json(const json& j) { return {j.at(0), j.at(1), j.at(2)}; }

inline json transform_to_json(const RigidTransform& t) {
    json r = json::array();
    for (double v : t.rotation.m) r.push_back(v);
    return json{{"rotation", r}, {"translation", vec3_to_json(t.translation)}};
}

inline RigidTransform transform_from_json(const json& j) {
    RigidTransform t;
    const auto& r = j.at("rotation");
    for (int i = 0; i < 9; ++i) t.rotation.m[size_t(i)] = r.at(size_t(i));
    t.translation = vec3_from_json(j.at("translation"));
    return t;
}

inline json camera_to_json(const ManifestCamera& cam) {
    json j{{"name", cam.name},
           {"image", cam.image},
           {"width", cam.model.width},
           {"height", cam.model.height},
           {"principal_point", json::array({cam.model.principal_point.x,
                                            cam.model.principal_point.y})},
           {"extrinsics", transform_to_json(cam.model.extrinsics)}};
    if (cam.model.kind == CameraKind::kPinhole) {
        j["model"] = "pinhole";
        j["fx"] = cam.model.fx;
        j["fy"] = cam.model.fy;
    } else {
        j["model"] = "ftheta";
        j["ftheta_coeffs"] = cam.model.ftheta_coeffs;
        j["theta_max"] = cam.model.theta_max;
    }
    return j;
}

inline ManifestCamera camera_from_json(const json& j) {
    ManifestCamera cam;
    cam.name = j.at("name");
    cam.image = j.at("image");
    cam.model.width = j.at("width");
    cam.model.height = j.at("height");
    cam.model.principal_point = {j.at("principal_point").at(0),
                                 j.at("principal_point").at(1)};
    cam.model.extrinsics = transform_from_json(j.at("extrinsics"));
    std::string kind = j.at("model");
    if (kind == "pinhole") {
        cam.model.kind = CameraKind::kPinhole;
        cam.model.fx = j.at("fx");
        cam.model.fy = j.at("fy");
    } else if (kind == "ftheta") {
        cam.model.kind = CameraKind::kFtheta;
        cam.model.ftheta_coeffs = j.at("ftheta_coeffs").get<std::vector<double>>();
        cam.model.theta_max = j.at("theta_max");
    } else {
        throw std::invalid_argument("unknown camera model: " + kind);
    }
    return cam;
}

inline json cuboid_to_json(const Cuboid3D& c) {
    return json{{"center", vec3_to_json(c.center)},
                {"dimensions", vec3_to_json(c.dimensions)},
                {"yaw", c.yaw},
                {"class", c.class_label},
                {"visibility", c.visibility}};
}

inline Cuboid3D cuboid_from_json(const json& j) {
    Cuboid3D c;
    c.center = vec3_from_json(j.at("center"));
    c.dimensions = vec3_from_json(j.at("dimensions"));
    c.yaw = j.at("yaw");
    c.class_label = j.at("class");
    c.visibility = j.value("visibility", 1.0);
    return c;
}

inline json labels_to_json(const LabelSet& labels) {
    json j;
    j["cuboids"] = json::array();
    for (const auto& c : labels.cuboids) j["cuboids"].push_back(cuboid_to_json(c));
    json boxes = json::object();
    for (const auto& [cam, list] : labels.bboxes2d) {
        json arr = json::array();
        for (const auto& b : list)
            arr.push_back(json{{"cuboid_index", b.cuboid_index},
                               {"box", json::array({b.x_min, b.y_min, b.x_max, b.y_max})},
                               {"class", b.class_label},
                               {"truncation", b.truncation},
                               {"occlusion", b.occlusion}});
        boxes[cam] = std::move(arr);
    }
    j["bboxes2d"] = std::move(boxes);
    if (!labels.freespace.distances.empty()) {
        json d = json::array();
        for (double v : labels.freespace.distances)
            d.push_back(std::isfinite(v) ? json(v) : json(nullptr));
        j["freespace"] = json{{"bins", labels.freespace.bins()},
                              {"distances", std::move(d)},
                              {"semantics", labels.freespace.semantics}};
    }
    json parking = json::array();
    for (const auto& spot : labels.parking) {
        json poly = json::array();
        for (const Vec2& p : spot.polygon) poly.push_back(json::array({p.x, p.y}));
        parking.push_back(json{{"polygon", std::move(poly)},
                               {"available", spot.available},
                               {"lock_state", spot.lock_state}});
    }
    j["parking"] = std::move(parking);
    return j;
}

inline LabelSet labels_from_json(const json& j) {
    LabelSet labels;
    for (const auto& c : j.value("cuboids", json::array()))
        labels.cuboids.push_back(cuboid_from_json(c));
    if (j.contains("bboxes2d"))
        for (const auto& [cam, list] : j.at("bboxes2d").items())
            for (const auto& b : list) {
                BBox2D box;
                box.cuboid_index = b.value("cuboid_index", -1);
                box.x_min = b.at("box").at(0);
                box.y_min = b.at("box").at(1);
                box.x_max = b.at("box").at(2);
                box.y_max = b.at("box").at(3);
                box.class_label = b.value("class", "");
                box.truncation = b.value("truncation", 0.0);
                box.occlusion = b.value("occlusion", 0.0);
                labels.bboxes2d[cam].push_back(box);
            }
    if (j.contains("freespace")) {
        const auto& f = j.at("freespace");
        for (const auto& d : f.at("distances"))
            labels.freespace.distances.push_back(d.is_null() ? kUnboundedDistance
                                                             : d.get<double>());
        labels.freespace.semantics = f.at("semantics").get<std::vector<std::string>>();
        if (labels.freespace.semantics.size() != labels.freespace.distances.size())
            throw std::invalid_argument("freespace distances/semantics size mismatch");
    }
    for (const auto& s : j.value("parking", json::array())) {
        ParkingSpot spot;
        for (const auto& p : s.at("polygon"))
            spot.polygon.push_back({p.at(0), p.at(1)});
        spot.available = s.value("available", true);
        spot.lock_state = s.value("lock_state", "none");
        labels.parking.push_back(std::move(spot));
    }
    return labels;
}

}  // namespace detail

inline json manifest_to_json(const SceneManifest& m) {
    json j;
    j["schema_version"] = kManifestSchemaVersion;
    j["scene_id"] = m.scene_id;
    j["ego_pose"] = detail::transform_to_json(m.ego_pose);
    j["ground_z"] = m.ground_z;
    j["cameras"] = json::array();
    for (const auto& cam : m.cameras) j["cameras"].push_back(detail::camera_to_json(cam));
    j["labels"] = detail::labels_to_json(m.labels);
    if (!m.depth_paths.empty()) j["depth_paths"] = m.depth_paths;
    if (!m.segmentation_paths.empty()) j["segmentation_paths"] = m.segmentation_paths;
    return j;
}

inline SceneManifest manifest_from_json(const json& j, const fs::path& directory) {
    SceneManifest m;
    int version = j.value("schema_version", 0);
    if (version != kManifestSchemaVersion)
        throw std::invalid_argument("unsupported manifest schema version " +
                                    std::to_string(version));
    m.scene_id = j.at("scene_id");
    m.ego_pose = detail::transform_from_json(j.at("ego_pose"));
    m.ground_z = j.value("ground_z", 0.0);
    for (const auto& cam : j.at("cameras"))
        m.cameras.push_back(detail::camera_from_json(cam));
    m.labels = detail::labels_from_json(j.at("labels"));
    if (j.contains("depth_paths"))
        m.depth_paths = j.at("depth_paths").get<std::map<std::string, std::string>>();
    if (j.contains("segmentation_paths"))
        m.segmentation_paths =
            j.at("segmentation_paths").get<std::map<std::string, std::string>>();
    m.directory = directory;
    return m;
}

inline SceneManifest load_manifest(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest: " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw IoError("manifest parse error in " + path.string() + ": " + e.what());
    }
    try {
        return manifest_from_json(j, path.parent_path());
    } catch (const json::exception& e) {
        throw std::invalid_argument("manifest field error in " + path.string() + ": " +
                                    e.what());
    }
}

inline void write_text_file(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    write_file_bytes(tmp, text.data(), text.size());
    fs::rename(tmp, path);
}

inline void save_manifest(const fs::path& path, const SceneManifest& m) {
    write_text_file(path, manifest_to_json(m).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Run configuration

struct EstimatorConfig {
    std::string type = "analytic";
    AnalyticHdrEstimator::Params analytic;
};

struct RenderConfig {
    int panorama_width = 1024;
    int panorama_height = 512;
    ShadowParams shadows;
    double occlusion_threshold = 0.95;
    PostProcessRanges post_ranges;
    double blur_sigma = 0.0;
    double noise_sigma = 0.0;
    double min_coverage = 0.6;  // solid-angle fraction for input validation
    bool debug_panoramas = false;
    RigLightConfig rig_lights;
};

struct RunConfig {
    fs::path dataset;
    fs::path output;
    fs::path catalog_path;
    uint64_t seed = 0;
    int jobs = 1;
    bool overwrite = false;
    PlacementPolicy policy;
    EstimatorConfig estimator;
    RenderConfig render;
    std::vector<std::string> load_warnings;
};

inline RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
    RunConfig cfg;
    auto resolve = [&base_dir](const std::string& p) {
        fs::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    };
    cfg.dataset = resolve(j.at("dataset"));
    cfg.output = resolve(j.at("output"));
    cfg.catalog_path = resolve(j.at("catalog"));
    cfg.seed = j.value("seed", 0ull);
    cfg.jobs = j.value("jobs", 1);
    cfg.overwrite = j.value("overwrite", false);

    const auto& p = j.at("policy");
    cfg.policy.counts = p.at("counts").get<std::vector<int>>();
    cfg.policy.count_probs = p.at("count_probs").get<std::vector<double>>();
    cfg.policy.group_probs = p.at("group_probs").get<std::vector<double>>();
    cfg.policy.max_attempts = p.value("max_attempts", 10);
    cfg.policy.parking_noise_sigma = p.value("parking_noise_sigma", 0.15);
    const auto& r = p.at("region");
    std::string kind = r.at("kind");
    if (kind == "rectangle") {
        cfg.policy.region.kind = RegionKind::kRectangle;
        cfg.policy.region.longitudinal = r.value("longitudinal", 12.0);
        cfg.policy.region.lateral = r.value("lateral", 6.0);
    } else if (kind == "annulus") {
        cfg.policy.region.kind = RegionKind::kAnnulus;
        cfg.policy.region.r_min = r.value("r_min", 2.0);
        cfg.policy.region.r_max = r.value("r_max", 15.0);
    } else if (kind == "parking_spots") {
        cfg.policy.region.kind = RegionKind::kParkingSpots;
        // Polygons are injected per scene from the manifest's parking labels.
    } else {
        throw std::invalid_argument("unknown region kind: " + kind);
    }

    if (j.contains("estimator")) {
        const auto& e = j.at("estimator");
        cfg.estimator.type = e.value("type", "analytic");
        cfg.estimator.analytic.sun_scale = e.value("sun_scale", 50.0);
        if (cfg.estimator.type != "analytic")
            throw std::invalid_argument("unknown estimator type: " + cfg.estimator.type);
    }
    if (j.contains("render")) {
        const auto& rd = j.at("render");
        cfg.render.panorama_width = rd.value("panorama_width", 1024);
        cfg.render.panorama_height = rd.value("panorama_height", 512);
        cfg.render.shadows.taps = rd.value("shadow_taps", 16);
        cfg.render.shadows.cone_half_angle =
            deg_to_rad(rd.value("shadow_cone_deg", 2.0));
        cfg.render.occlusion_threshold = rd.value("occlusion_threshold", 0.95);
        if (rd.contains("saturation_range")) {
            cfg.render.post_ranges.saturation_lo = rd.at("saturation_range").at(0);
            cfg.render.post_ranges.saturation_hi = rd.at("saturation_range").at(1);
        }
        if (rd.contains("shadow_strength_range")) {
            cfg.render.post_ranges.shadow_lo = rd.at("shadow_strength_range").at(0);
            cfg.render.post_ranges.shadow_hi = rd.at("shadow_strength_range").at(1);
        }
        cfg.render.blur_sigma = rd.value("blur_sigma", 0.0);
        cfg.render.noise_sigma = rd.value("noise_sigma", 0.0);
        cfg.render.min_coverage = rd.value("min_coverage", 0.6);
        cfg.render.debug_panoramas = rd.value("debug_panoramas", false);
    }
    cfg.load_warnings = cfg.policy.normalize();
    if (cfg.jobs < 1) throw std::invalid_argument("jobs must be >= 1");
    return cfg;
}

inline RunConfig load_run_config(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config: " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw IoError("config parse error: " + std::string(e.what()));
    }
    return run_config_from_json(j, path.parent_path());
}

// Catalog file: {"assets": [{"id", "class", "group", "mesh": "<obj path>"}]}
inline AssetCatalog load_catalog(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open catalog: " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw IoError("catalog parse error: " + std::string(e.what()));
    }
    AssetCatalog catalog;
    for (const auto& a : j.at("assets")) {
        CatalogEntry entry;
        entry.id = a.at("id");
        entry.class_label = a.at("class");
        entry.group = a.at("group");
        fs::path mesh_path = a.at("mesh").get<std::string>();
        if (!mesh_path.is_absolute()) mesh_path = path.parent_path() / mesh_path;
        entry.mesh = load_obj(mesh_path);
        catalog.entries.push_back(std::move(entry));
    }
    if (catalog.entries.empty()) throw std::invalid_argument("catalog has no assets");
    return catalog;
}

// ---------------------------------------------------------------------------
// Input validation

struct ValidationResult {
    bool ok = false;
    std::string reason;  // machine-readable: "", "coverage", "calibration", "no_cameras"
    std::string detail;
    double coverage = 0.0;
};

// Deterministic Fibonacci-sphere probe directions.
inline std::vector<Vec3> sphere_probes(int count) {
    std::vector<Vec3> dirs;
    dirs.reserve(size_t(count));
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        double z = 1.0 - 2.0 * (i + 0.5) / count;
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        double phi = golden * i;
        dirs.push_back({r * std::cos(phi), r * std::sin(phi), z});
    }
    return dirs;
}

// Fraction of the sphere seen by at least one camera.
inline double rig_coverage(const std::vector<ManifestCamera>& cameras, int probes = 4000) {
    auto dirs = sphere_probes(probes);
    int seen = 0;
    for (const Vec3& d : dirs)
        for (const auto& cam : cameras)
            if (cam.model.sees_direction(d)) {
                ++seen;
                break;
            }
    return double(seen) / double(probes);
}

// Accepts scenes with full calibration and enough panoramic coverage.
// Unreadable image files raise IoError (distinct from a validation
// rejection).
inline ValidationResult validate_input(const SceneManifest& manifest,
                                       double min_coverage = 0.6) {
    ValidationResult result;
    if (manifest.cameras.empty()) {
        result.reason = "no_cameras";
        result.detail = "manifest lists no cameras";
        return result;
    }
    for (const auto& cam : manifest.cameras) {
        try {
            cam.model.validate();
        } catch (const std::exception& e) {
            result.reason = "calibration";
            result.detail = cam.name + ": " + e.what();
            return result;
        }
        fs::path img = manifest.directory / cam.image;
        if (!fs::exists(img))
            throw IoError("referenced image does not exist: " + img.string());
    }
    result.coverage = rig_coverage(manifest.cameras);
    if (result.coverage < min_coverage) {
        result.reason = "coverage";
        result.detail = "rig covers " + std::to_string(result.coverage) +
                        " of the sphere, needs " + std::to_string(min_coverage);
        return result;
    }
    result.ok = true;
    return result;
}

// ---------------------------------------------------------------------------
// Scene pipeline

struct StageTimings {
    // milliseconds, keyed by stage name, insertion-ordered
    std::vector<std::pair<std::string, double>> entries;
    void add(const std::string& name, double ms) { entries.emplace_back(name, ms); }
};

struct SceneResult {
    std::map<std::string, std::vector<uint8_t>> images;  // camera name -> PNG bytes
    LabelSet labels;
    PlacementStats placement;
    StageTimings timings;
    std::vector<std::string> warnings;
    double mean_env_luminance = 0.0;
    bool ego_lights_on = false;
    std::map<std::string, std::vector<uint8_t>> debug_hdr;  // optional .hdr dumps
};

class StageClock {
  public:
    explicit StageClock(StageTimings& t) : timings_(t) {}
    template <typename F>
    auto run(const std::string& name, F&& f) {
        auto start = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            timings_.add(name, elapsed_ms(start));
        } else {
            auto value = f();
            timings_.add(name, elapsed_ms(start));
            return value;
        }
    }

  private:
    static double elapsed_ms(std::chrono::steady_clock::time_point start) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start)
            .count();
    }
    StageTimings& timings_;
};

// Runs the full augmentation pipeline on one scene:
// stitch -> inpaint -> expand_hdr -> fuse_envmap -> ego_lights ->
// place_assets -> render (objects + shadows) -> postprocess -> composite ->
// synthetic labels -> existing-label update.
inline SceneResult run_scene(const SceneManifest& manifest, const RunConfig& config,
                             const AssetCatalog& catalog, const HdrEstimator& estimator,
                             Rng& rng) {
    SceneResult result;
    StageClock clock(result.timings);

    // Load the real frames (bytes kept for bit-exact pass-through).
    std::map<std::string, std::vector<uint8_t>> input_bytes;
    std::map<std::string, Image8> input_images;
    clock.run("load", [&] {
        for (const auto& cam : manifest.cameras) {
            fs::path img_path = manifest.directory / cam.image;
            auto bytes = read_file_bytes(img_path);
            Image8 img = decode_png(bytes);
            if (img.channels != 3)
                throw std::invalid_argument("expected RGB PNG: " + img_path.string());
            if (img.width != cam.model.width || img.height != cam.model.height)
                throw std::invalid_argument("image size does not match camera: " +
                                            img_path.string());
            input_bytes[cam.name] = std::move(bytes);
            input_images[cam.name] = std::move(img);
        }
    });

    std::map<std::string, Image> linear_images;
    clock.run("linearize", [&] {
        for (const auto& [name, img] : input_images)
            linear_images[name] = decode_linear(img);
    });

    // Lighting estimation chain.
    Panorama ldr = clock.run("stitch", [&] {
        std::vector<StitchInput> inputs;
        for (const auto& cam : manifest.cameras)
            inputs.push_back({&linear_images.at(cam.name), &cam.model});
        return stitch(inputs, config.render.panorama_width, config.render.panorama_height);
    });
    Panorama inpainted = clock.run("inpaint", [&] { return inpaint(ldr); });
    Image pe = direction_encoding(config.render.panorama_width, config.render.panorama_height);
    auto [hdr, sky] = clock.run("expand_hdr",
                                [&] { return expand_hdr(inpainted, pe, estimator); });
    EnvironmentMap env = clock.run("fuse_envmap",
                                   [&] { return fuse_envmap(inpainted, hdr, sky); });
    result.mean_env_luminance = mean_luminance(env.radiance);
    std::vector<EgoLight> lights = ego_lights(env, config.render.rig_lights);
    result.ego_lights_on = !lights.empty();

    if (config.render.debug_panoramas) {
        result.debug_hdr["ldr_panorama"] = encode_hdr(inpainted.pixels);
        result.debug_hdr["envmap"] = encode_hdr(env.radiance.pixels);
    }

    // Scene occlusion proxies from existing cuboids, one per camera.
    std::vector<DepthBuffer> proxies;
    clock.run("proxies", [&] {
        for (const auto& cam : manifest.cameras)
            proxies.push_back(rasterize_cuboid_proxies(cam.model, manifest.labels.cuboids));
    });

    // Placement. In parking mode the region polygons come from spots that
    // are unoccupied and have no existing ground lock.
    PlacementPolicy policy = config.policy;
    bool placement_possible = true;
    if (policy.region.kind == RegionKind::kParkingSpots) {
        for (const auto& spot : manifest.labels.parking)
            if (spot.available && spot.lock_state == "none")
                policy.region.parking_polygons.push_back(spot.polygon);
        placement_possible = !policy.region.parking_polygons.empty();
    }

    PlacementScene scene;
    scene.cuboids = manifest.labels.cuboids;
    scene.ground_z = manifest.ground_z;
    for (size_t i = 0; i < manifest.cameras.size(); ++i) {
        scene.cameras.push_back(&manifest.cameras[i].model);
        scene.proxy_depth.push_back(&proxies[i]);
    }

    std::vector<AssetInstance> instances;
    if (placement_possible)
        instances = clock.run("place", [&] {
            return place_assets(policy, catalog, scene, rng, &result.placement,
                                config.render.occlusion_threshold,
                                config.render.post_ranges);
        });

    // Map parking-mode spot indices back to manifest spot indices.
    if (policy.region.kind == RegionKind::kParkingSpots && !instances.empty()) {
        std::vector<int> region_to_manifest;
        for (size_t si = 0; si < manifest.labels.parking.size(); ++si) {
            const auto& spot = manifest.labels.parking[si];
            if (spot.available && spot.lock_state == "none")
                region_to_manifest.push_back(int(si));
        }
        for (auto& inst : instances)
            if (inst.parking_spot >= 0)
                inst.parking_spot = region_to_manifest[size_t(inst.parking_spot)];
    }

    // Empty augmentation: pass the input bytes through untouched.
    if (instances.empty()) {
        result.images = std::move(input_bytes);
        result.labels = manifest.labels;
        return result;
    }

    // Per-camera rendering and compositing.
    ShIrradiance sh = clock.run("sh_project", [&] { return project_sh2(env.radiance); });
    PostProcessParams post;
    post.saturation = instances.front().saturation_jitter;
    post.shadow_strength = instances.front().shadow_strength;
    post.blur_sigma = config.render.blur_sigma;
    post.noise_sigma = config.render.noise_sigma;
    post.noise_seed = rng.next_u64();

    std::map<std::string, RenderLayers> layer_store;
    clock.run("render", [&] {
        for (size_t i = 0; i < manifest.cameras.size(); ++i) {
            const auto& cam = manifest.cameras[i];
            RenderLayers layers =
                render_objects(instances, cam.model, sh, lights, &proxies[i]);
            layers.shadow = render_shadows(instances, cam.model, env.sky,
                                           manifest.ground_z, config.render.shadows);
            layer_store[cam.name] = postprocess(layers, post);
        }
    });

    clock.run("composite", [&] {
        for (const auto& cam : manifest.cameras) {
            Image8 out = composite(input_images.at(cam.name), layer_store.at(cam.name));
            result.images[cam.name] = encode_png(out);
        }
    });

    // Ground truth: update existing labels, then append synthetic ones.
    clock.run("labels", [&] {
        std::vector<std::pair<std::string, const CameraModel*>> cam_ptrs;
        std::map<std::string, const RenderLayers*> layer_ptrs;
        for (const auto& cam : manifest.cameras) {
            cam_ptrs.emplace_back(cam.name, &cam.model);
            layer_ptrs[cam.name] = &layer_store.at(cam.name);
        }
        result.labels =
            update_existing_labels(manifest.labels, instances, cam_ptrs, layer_ptrs);

        for (const auto& inst : instances) {
            Cuboid3D cuboid = synth_cuboid(inst);
            int cuboid_index = int(result.labels.cuboids.size());
            double best_visibility = 0.0;
            for (size_t ci = 0; ci < manifest.cameras.size(); ++ci) {
                const auto& cam = manifest.cameras[ci];
                auto box = cuboid_to_bbox2d(cuboid, cam.model, &proxies[ci]);
                if (!box) continue;
                double vis = 1.0 - box->occlusion;
                if (vis <= 0.0) continue;  // no visible area in this camera
                box->cuboid_index = cuboid_index;
                result.labels.bboxes2d[cam.name].push_back(*box);
                best_visibility = std::max(best_visibility, vis);
            }
            cuboid.visibility = best_visibility;
            result.labels.cuboids.push_back(std::move(cuboid));
        }
    });

    return result;
}

// ---------------------------------------------------------------------------
// Batch runner

struct SceneRecord {
    std::string scene_id;
    bool processed = false;
    std::string skip_reason;
    PlacementStats placement;
    StageTimings timings;
    std::vector<std::string> warnings;
};

struct RunReport {
    int scenes_processed = 0;
    int scenes_skipped = 0;
    int total_placed = 0;
    std::vector<int> placed_per_group;
    int placement_attempts = 0;
    int instances_skipped = 0;
    std::vector<SceneRecord> scenes;
    std::map<std::string, double> stage_ms;  // accumulated wall time per stage
    double wall_seconds = 0.0;

    json to_json() const {
        json j;
        j["scenes_processed"] = scenes_processed;
        j["scenes_skipped"] = scenes_skipped;
        j["total_placed"] = total_placed;
        j["placed_per_group"] = placed_per_group;
        j["placement_attempts"] = placement_attempts;
        j["instances_skipped"] = instances_skipped;
        json scene_list = json::array();
        for (const auto& s : scenes) {
            json e{{"scene_id", s.scene_id}, {"processed", s.processed}};
            if (!s.skip_reason.empty()) e["skip_reason"] = s.skip_reason;
            if (!s.warnings.empty()) e["warnings"] = s.warnings;
            scene_list.push_back(std::move(e));
        }
        j["scenes"] = std::move(scene_list);
        json timing = json::object();
        for (const auto& [name, ms] : stage_ms) timing[name] = ms;
        j["timing_ms"] = std::move(timing);
        j["wall_seconds"] = wall_seconds;
        return j;
    }

    std::string table() const {
        char buf[256];
        std::string out;
        out += "scenes    processed " + std::to_string(scenes_processed) + ", skipped " +
               std::to_string(scenes_skipped) + "\n";
        out += "assets    placed " + std::to_string(total_placed) + " (attempts " +
               std::to_string(placement_attempts) + ", skipped " +
               std::to_string(instances_skipped) + ")\n";
        for (size_t g = 0; g < placed_per_group.size(); ++g) {
            std::snprintf(buf, sizeof(buf), "  group %zu  %d\n", g, placed_per_group[g]);
            out += buf;
        }
        for (const auto& [name, ms] : stage_ms) {
            std::snprintf(buf, sizeof(buf), "stage %-12s %10.1f ms\n", name.c_str(), ms);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), "wall time %.2f s\n", wall_seconds);
        out += buf;
        return out;
    }
};

inline std::vector<fs::path> list_scene_manifests(const fs::path& dataset) {
    if (!fs::exists(dataset)) throw IoError("dataset does not exist: " + dataset.string());
    std::vector<fs::path> manifests;
    for (const auto& entry : fs::directory_iterator(dataset))
        if (entry.is_regular_file() && entry.path().extension() == ".json" &&
            entry.path().filename() != "catalog.json" &&
            entry.path().filename() != "config.json" &&
            entry.path().filename() != "report.json")
            manifests.push_back(entry.path());
    std::sort(manifests.begin(), manifests.end());
    return manifests;
}

// Processes every scene in the dataset with a bounded worker pool. Scene
// outputs depend only on (seed, scene id), so results are byte-identical for
// any job count or scene order. Failed scenes are skipped with a recorded
// reason; the batch never aborts.
inline RunReport run_batch(const RunConfig& config) {
    auto t_start = std::chrono::steady_clock::now();
    auto manifests = list_scene_manifests(config.dataset);

    if (fs::exists(config.output) && !fs::is_empty(config.output) && !config.overwrite)
        throw std::invalid_argument("output path exists and is not empty (use overwrite): " +
                                    config.output.string());
    fs::create_directories(config.output);

    AssetCatalog catalog = load_catalog(config.catalog_path);
    AnalyticHdrEstimator estimator(config.estimator.analytic);

    std::vector<SceneRecord> records(manifests.size());
    std::atomic<size_t> next{0};
    int jobs = std::max(1, config.jobs);

    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= manifests.size()) break;
            SceneRecord& rec = records[i];
            rec.scene_id = manifests[i].stem().string();
            try {
                SceneManifest manifest = load_manifest(manifests[i]);
                rec.scene_id = manifest.scene_id;
                ValidationResult valid =
                    validate_input(manifest, config.render.min_coverage);
                if (!valid.ok) {
                    rec.skip_reason = "validation:" + valid.reason;
                    continue;
                }
                Rng rng = Rng::stream(config.seed, manifest.scene_id);
                SceneResult result = run_scene(manifest, config, catalog, estimator, rng);

                // Write images, then the manifest as the completion marker.
                SceneManifest out = manifest;
                out.labels = result.labels;
                out.directory = config.output;
                for (auto& cam : out.cameras) {
                    fs::path img_name = cam.image;
                    fs::path img_out = config.output / img_name;
                    fs::create_directories(img_out.parent_path());
                    const auto& bytes = result.images.at(cam.name);
                    fs::path tmp = img_out;
                    tmp += ".tmp";
                    write_file_bytes(tmp, bytes.data(), bytes.size());
                    fs::rename(tmp, img_out);
                }
                for (const auto& [tag, bytes] : result.debug_hdr) {
                    fs::path dump = config.output / (manifest.scene_id + "_" + tag + ".hdr");
                    write_file_bytes(dump, bytes.data(), bytes.size());
                }
                save_manifest(config.output / manifests[i].filename(), out);

                rec.processed = true;
                rec.placement = result.placement;
                rec.timings = result.timings;
                rec.warnings = result.warnings;
            } catch (const std::exception& e) {
                rec.processed = false;
                rec.skip_reason = std::string("error:") + e.what();
            }
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    // Deterministic aggregation in scene order (timing values excepted).
    RunReport report;
    report.scenes = std::move(records);
    for (const auto& rec : report.scenes) {
        if (rec.processed) {
            ++report.scenes_processed;
            report.total_placed += rec.placement.placed;
            report.placement_attempts += rec.placement.attempts;
            report.instances_skipped += rec.placement.skipped;
            if (report.placed_per_group.size() < rec.placement.per_group.size())
                report.placed_per_group.resize(rec.placement.per_group.size(), 0);
            for (size_t g = 0; g < rec.placement.per_group.size(); ++g)
                report.placed_per_group[g] += rec.placement.per_group[g];
            for (const auto& [name, ms] : rec.timings.entries) report.stage_ms[name] += ms;
        } else {
            ++report.scenes_skipped;
        }
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    write_text_file(config.output / "report.json", report.to_json().dump(2) + "\n");
    return report;
}

// ---------------------------------------------------------------------------
// Evaluation against a ground-truth dataset

// Cuboids plus their detection scores (optional "score" manifest field,
// default 1.0).
inline std::vector<ScoredCuboid> load_scored_cuboids(const fs::path& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw IoError("cannot open manifest: " + manifest_path.string());
    json j;
    f >> j;
    std::vector<ScoredCuboid> out;
    for (const auto& c : j.at("labels").value("cuboids", json::array()))
        out.push_back({detail::cuboid_from_json(c), c.value("score", 1.0)});
    return out;
}

struct ObstacleEvaluation {
    std::map<std::string, DetectionMetrics> per_class;
    int scenes = 0;

    std::string table() const {
        char buf[256];
        std::string out =
            "class              AP   Fscore   PosErr(m)   YawErr(deg)   TP   FP   FN\n";
        for (const auto& [cls, m] : per_class) {
            std::snprintf(buf, sizeof(buf), "%-14s %6.3f   %6.3f   %9.3f   %11.3f %4d %4d %4d\n",
                          cls.c_str(), m.average_precision, m.fscore, m.position_error_m,
                          m.yaw_error_deg, m.tp, m.fp, m.fn);
            out += buf;
        }
        return out;
    }
};

// Per-class pooled detection metrics: matching runs per scene, the PR curve
// pools every scored prediction.
inline ObstacleEvaluation evaluate_obstacles(const fs::path& pred_dir,
                                             const fs::path& gt_dir,
                                             const MatchCriteria& criteria = {}) {
    ObstacleEvaluation eval;
    std::map<std::string, std::vector<ScoredCuboid>> pooled_preds;
    std::map<std::string, std::vector<Cuboid3D>> pooled_gts;
    std::map<std::string, MatchResult> pooled_assignments;

    for (const fs::path& gt_path : list_scene_manifests(gt_dir)) {
        fs::path pred_path = pred_dir / gt_path.filename();
        if (!fs::exists(pred_path)) continue;
        auto gt_manifest = load_manifest(gt_path);
        auto preds = load_scored_cuboids(pred_path);
        ++eval.scenes;

        std::map<std::string, std::vector<ScoredCuboid>> preds_by_class;
        std::map<std::string, std::vector<Cuboid3D>> gts_by_class;
        for (const auto& p : preds) preds_by_class[p.cuboid.class_label].push_back(p);
        for (const auto& g : gt_manifest.labels.cuboids)
            gts_by_class[g.class_label].push_back(g);

        std::set<std::string> classes;
        for (const auto& [c, _] : preds_by_class) classes.insert(c);
        for (const auto& [c, _] : gts_by_class) classes.insert(c);

        for (const std::string& cls : classes) {
            auto& preds_c = preds_by_class[cls];
            auto& gts_c = gts_by_class[cls];
            MatchResult scene_match = match_cuboids(preds_c, gts_c, criteria);
            int pred_off = int(pooled_preds[cls].size());
            int gt_off = int(pooled_gts[cls].size());
            MatchResult& pooled = pooled_assignments[cls];
            for (auto [pi, gi] : scene_match.matches)
                pooled.matches.emplace_back(pi + pred_off, gi + gt_off);
            for (int pi : scene_match.false_positives)
                pooled.false_positives.push_back(pi + pred_off);
            for (int gi : scene_match.false_negatives)
                pooled.false_negatives.push_back(gi + gt_off);
            pooled_preds[cls].insert(pooled_preds[cls].end(), preds_c.begin(), preds_c.end());
            pooled_gts[cls].insert(pooled_gts[cls].end(), gts_c.begin(), gts_c.end());
        }
    }

    for (const auto& [cls, gts] : pooled_gts) {
        if (gts.empty()) continue;
        eval.per_class[cls] =
            detection_metrics(pooled_assignments[cls], pooled_preds[cls], gts);
    }
    return eval;
}

struct FreespaceEvaluation {
    RdmMetrics aggregate;
    int scenes = 0;

    std::string table() const {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "freespace (%d scenes, %d bins)\n"
                      "  abs gap   %.3f m\n  rel gap   %.2f %%\n  success   %.2f %%\n"
                      "  precision %.3f\n  recall    %.3f\n",
                      scenes, aggregate.bins_evaluated, aggregate.abs_gap_m,
                      100.0 * aggregate.rel_gap, 100.0 * aggregate.success_rate,
                      aggregate.precision, aggregate.recall);
        return buf;
    }
};

inline FreespaceEvaluation evaluate_freespace(const fs::path& pred_dir,
                                              const fs::path& gt_dir,
                                              double radius_limit = 10.0) {
    FreespaceEvaluation eval;
    double abs_sum = 0.0, rel_sum = 0.0;
    for (const fs::path& gt_path : list_scene_manifests(gt_dir)) {
        fs::path pred_path = pred_dir / gt_path.filename();
        if (!fs::exists(pred_path)) continue;
        auto gt_manifest = load_manifest(gt_path);
        auto pred_manifest = load_manifest(pred_path);
        if (gt_manifest.labels.freespace.distances.empty()) continue;
        RdmMetrics m = rdm_metrics(pred_manifest.labels.freespace,
                                   gt_manifest.labels.freespace, radius_limit);
        ++eval.scenes;
        abs_sum += m.abs_gap_m * m.bins_evaluated;
        rel_sum += m.rel_gap * m.bins_evaluated;
        eval.aggregate.bins_evaluated += m.bins_evaluated;
        eval.aggregate.successes += m.successes;
        eval.aggregate.hazard_tp += m.hazard_tp;
        eval.aggregate.hazard_fp += m.hazard_fp;
        eval.aggregate.hazard_fn += m.hazard_fn;
    }
    auto& agg = eval.aggregate;
    if (agg.bins_evaluated > 0) {
        agg.abs_gap_m = abs_sum / agg.bins_evaluated;
        agg.rel_gap = rel_sum / agg.bins_evaluated;
        agg.success_rate = double(agg.successes) / agg.bins_evaluated;
    }
    agg.precision = (agg.hazard_tp + agg.hazard_fp) > 0
                        ? double(agg.hazard_tp) / (agg.hazard_tp + agg.hazard_fp)
                        : 0.0;
    agg.recall = (agg.hazard_tp + agg.hazard_fn) > 0
                     ? double(agg.hazard_tp) / (agg.hazard_tp + agg.hazard_fn)
                     : 0.0;
    return eval;
}

}  // namespace mvaug

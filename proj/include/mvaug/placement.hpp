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

#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvaug/mesh.hpp"
#include "mvaug/raster.hpp"
#include "mvaug/rng.hpp"

namespace mvaug {

enum class RegionKind { kRectangle, kAnnulus, kParkingSpots };

// Where assets may be placed, in the ego frame.
struct RegionOfInterest {
    RegionKind kind = RegionKind::kRectangle;
    double longitudinal = 12.0;  // rectangle: x in [-longitudinal, +longitudinal]
    double lateral = 6.0;        // rectangle: y in [-lateral, +lateral]
    double r_min = 2.0;          // annulus
    double r_max = 15.0;
    std::vector<std::vector<Vec2>> parking_polygons;

    void validate() const {
        switch (kind) {
            case RegionKind::kRectangle:
                if (longitudinal <= 0 || lateral <= 0)
                    throw std::invalid_argument("RegionOfInterest: extents must be positive");
                break;
            case RegionKind::kAnnulus:
                if (r_min < 0 || r_max <= r_min)
                    throw std::invalid_argument("RegionOfInterest: need 0 <= r_min < r_max");
                break;
            case RegionKind::kParkingSpots:
                // The polygon list may be empty at configuration time; the
                // pipeline injects eligible spots per scene.
                for (const auto& poly : parking_polygons)
                    if (poly.size() < 3)
                        throw std::invalid_argument("RegionOfInterest: degenerate polygon");
                break;
        }
    }

    bool contains(const Vec2& p) const {
        switch (kind) {
            case RegionKind::kRectangle:
                return std::abs(p.x) <= longitudinal && std::abs(p.y) <= lateral;
            case RegionKind::kAnnulus: {
                double r = p.norm();
                return r >= r_min && r <= r_max;
            }
            case RegionKind::kParkingSpots:
                return true;  // spots carry their own geometry
        }
        return false;
    }
};

// Two-level stratified sampling policy: p(n) over asset counts and p(g)
// over asset groups.
struct PlacementPolicy {
    std::vector<int> counts;          // support of p(n)
    std::vector<double> count_probs;  // p(n), same length
    std::vector<double> group_probs;  // p(g), one per group
    RegionOfInterest region;
    int max_attempts = 10;
    double parking_noise_sigma = 0.15;  // meters

    // Validates and renormalizes the two distributions. Distributions whose
    // sums deviate beyond 1e-9 are renormalized with a warning.
    std::vector<std::string> normalize() {
        std::vector<std::string> warnings;
        auto fix = [&warnings](std::vector<double>& probs, const char* name) {
            if (probs.empty()) throw std::invalid_argument("PlacementPolicy: empty distribution");
            double sum = 0.0;
            for (double p : probs) {
                if (p < 0.0) throw std::invalid_argument("PlacementPolicy: negative probability");
                sum += p;
            }
            if (sum <= 0.0) throw std::invalid_argument("PlacementPolicy: zero-mass distribution");
            if (std::abs(sum - 1.0) > 1e-9) {
                for (double& p : probs) p /= sum;
                warnings.push_back(std::string(name) + " probabilities summed to " +
                                   std::to_string(sum) + "; renormalized");
            }
        };
        fix(count_probs, "count");
        fix(group_probs, "group");
        if (counts.size() != count_probs.size())
            throw std::invalid_argument("PlacementPolicy: counts/probs length mismatch");
        for (int n : counts)
            if (n < 0) throw std::invalid_argument("PlacementPolicy: negative count");
        if (max_attempts <= 0)
            throw std::invalid_argument("PlacementPolicy: max_attempts must be positive");
        region.validate();
        return warnings;
    }

    double average_count() const {
        double a = 0.0;
        for (size_t i = 0; i < counts.size(); ++i) a += counts[i] * count_probs[i];
        return a;
    }
};

// A placed synthetic asset.
struct AssetInstance {
    std::string asset_id;
    std::string class_label;
    int group = 0;
    RigidTransform pose;     // asset -> ego
    OrientedRect footprint;  // ground projection of the posed bounding box
    const MeshAsset* mesh = nullptr;
    int parking_spot = -1;  // index into region polygons, parking mode only
    // Post-processing parameters, sampled once per scene.
    double saturation_jitter = 1.0;
    double shadow_strength = 1.0;
};

// Draws an asset count from p(n) by CDF inversion.
inline int sample_count(const PlacementPolicy& policy, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    for (size_t i = 0; i < policy.counts.size(); ++i) {
        acc += policy.count_probs[i];
        if (u < acc) return policy.counts[i];
    }
    return policy.counts.back();
}

// Splits n across groups with largest-remainder apportionment so the total
// is always conserved; remainder ties go to the lower group index.
inline std::vector<int> allocate_groups(int n, const std::vector<double>& group_probs) {
    if (n < 0) throw std::invalid_argument("allocate_groups: n must be >= 0");
    std::vector<int> out(group_probs.size(), 0);
    std::vector<double> remainder(group_probs.size());
    int assigned = 0;
    for (size_t g = 0; g < group_probs.size(); ++g) {
        double q = n * group_probs[g];
        out[g] = int(std::floor(q));
        remainder[g] = q - out[g];
        assigned += out[g];
    }
    std::vector<size_t> order(group_probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return remainder[a] > remainder[b]; });
    for (size_t k = 0; assigned < n; ++k) {
        ++out[order[k % order.size()]];
        ++assigned;
    }
    return out;
}

namespace detail {

// Yaw of the longest edge of a polygon, used to align assets to parking spots.
inline double polygon_axis_yaw(const std::vector<Vec2>& poly) {
    double best_len = -1.0, yaw = 0.0;
    for (size_t i = 0; i < poly.size(); ++i) {
        Vec2 d = poly[(i + 1) % poly.size()] - poly[i];
        double len = d.norm();
        if (len > best_len) {
            best_len = len;
            yaw = std::atan2(d.y, d.x);
        }
    }
    return yaw;
}

inline Vec2 polygon_centroid(const std::vector<Vec2>& poly) {
    Vec2 c{};
    for (const Vec2& p : poly) c = c + p;
    return c * (1.0 / double(poly.size()));
}

}  // namespace detail

struct PoseCandidate {
    RigidTransform pose;
    double yaw = 0.0;
    int parking_spot = -1;
};

// Draws a candidate pose: uniform position over rectangle/annulus regions
// with uniform yaw, or spot centroid + Gaussian noise with spot-aligned yaw
// in parking mode. The asset is grounded so its lowest vertex touches the
// ground plane.
inline PoseCandidate sample_pose(const RegionOfInterest& region, const MeshAsset& mesh,
                                 Rng& rng, double parking_noise_sigma = 0.15,
                                 double ground_z = 0.0,
                                 const std::vector<int>* allowed_spots = nullptr) {
    PoseCandidate out;
    Vec2 position;
    switch (region.kind) {
        case RegionKind::kRectangle:
            position = {rng.uniform(-region.longitudinal, region.longitudinal),
                        rng.uniform(-region.lateral, region.lateral)};
            out.yaw = kPi - rng.uniform() * 2.0 * kPi;  // uniform in (-pi, pi]
            break;
        case RegionKind::kAnnulus: {
            double u = rng.uniform();
            double r = std::sqrt(region.r_min * region.r_min +
                                 u * (region.r_max * region.r_max -
                                      region.r_min * region.r_min));
            double phi = rng.uniform(0.0, 2.0 * kPi);
            position = {r * std::cos(phi), r * std::sin(phi)};
            out.yaw = kPi - rng.uniform() * 2.0 * kPi;
            break;
        }
        case RegionKind::kParkingSpots: {
            size_t pick;
            if (allowed_spots) {
                if (allowed_spots->empty())
                    throw std::invalid_argument("sample_pose: no parking spots available");
                pick = size_t((*allowed_spots)[rng.uniform_index(allowed_spots->size())]);
            } else {
                pick = size_t(rng.uniform_index(region.parking_polygons.size()));
            }
            const auto& poly = region.parking_polygons[pick];
            Vec2 c = detail::polygon_centroid(poly);
            position = {c.x + rng.normal(0.0, parking_noise_sigma),
                        c.y + rng.normal(0.0, parking_noise_sigma)};
            out.yaw = detail::polygon_axis_yaw(poly);
            out.parking_spot = int(pick);
            break;
        }
    }
    double z = ground_z - mesh.bbox_min.z;
    out.pose = {Mat3::rotation_z(out.yaw), {position.x, position.y, z}};
    return out;
}

// Ground footprint of a mesh under a yaw+translation pose.
inline OrientedRect footprint_of(const MeshAsset& mesh, const PoseCandidate& cand) {
    Vec3 mid = (mesh.bbox_min + mesh.bbox_max) * 0.5;
    Vec3 half = (mesh.bbox_max - mesh.bbox_min) * 0.5;
    Vec3 center = cand.pose.apply(mid);
    return {{center.x, center.y}, {half.x, half.y}, cand.yaw};
}

// Separating-axis intersection test for two oriented ground rectangles;
// touching rectangles count as colliding.
inline bool rects_intersect(const OrientedRect& a, const OrientedRect& b) {
    const OrientedRect* rects[2] = {&a, &b};
    auto corners_a = a.corners();
    auto corners_b = b.corners();
    for (const OrientedRect* r : rects) {
        double c = std::cos(r->yaw), s = std::sin(r->yaw);
        Vec2 axes[2] = {{c, s}, {-s, c}};
        for (const Vec2& axis : axes) {
            double lo_a = 1e300, hi_a = -1e300, lo_b = 1e300, hi_b = -1e300;
            for (const Vec2& p : corners_a) {
                double d = p.dot(axis);
                lo_a = std::min(lo_a, d);
                hi_a = std::max(hi_a, d);
            }
            for (const Vec2& p : corners_b) {
                double d = p.dot(axis);
                lo_b = std::min(lo_b, d);
                hi_b = std::max(hi_b, d);
            }
            if (hi_a < lo_b || hi_b < lo_a) return false;
        }
    }
    return true;
}

// True when the candidate footprint intersects any other footprint.
inline bool collides(const OrientedRect& candidate, const std::vector<OrientedRect>& others) {
    for (const auto& o : others)
        if (rects_intersect(candidate, o)) return true;
    return false;
}

struct OcclusionError {
    std::string message;
};

// Fraction of the candidate's projected silhouette hidden behind existing
// scene geometry (cuboids rasterized as depth proxies). Returns nullopt when
// the candidate does not project into the camera at all.
inline std::optional<double> occlusion_fraction(const MeshAsset& posed_mesh,
                                                const CameraModel& camera,
                                                const DepthBuffer& proxies) {
    DepthBuffer candidate(camera.width, camera.height);
    rasterize_mesh_depth(camera, posed_mesh, candidate);

    size_t covered = 0, occluded = 0;
    for (int y = 0; y < camera.height; ++y)
        for (int x = 0; x < camera.width; ++x) {
            float d = candidate.at(x, y);
            if (!std::isfinite(d)) continue;
            ++covered;
            if (proxies.at(x, y) < d) ++occluded;
        }
    if (covered == 0) return std::nullopt;  // not visible in this camera
    return double(occluded) / double(covered);
}

// Scene context the placement loop checks candidates against.
struct PlacementScene {
    std::vector<Cuboid3D> cuboids;                // existing annotated objects
    std::vector<const CameraModel*> cameras;      // may be empty (no visibility check)
    std::vector<const DepthBuffer*> proxy_depth;  // one per camera
    double ground_z = 0.0;
};

struct PlacementStats {
    int requested = 0;
    int placed = 0;
    int skipped = 0;
    int attempts = 0;
    std::vector<int> per_group;
};

struct CatalogEntry {
    std::string id;
    std::string class_label;
    int group = 0;
    MeshAsset mesh;
};

struct AssetCatalog {
    std::vector<CatalogEntry> entries;

    std::vector<std::vector<int>> by_group(size_t group_count) const {
        std::vector<std::vector<int>> out(group_count);
        for (size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].group < 0 || size_t(entries[i].group) >= group_count)
                throw std::invalid_argument("AssetCatalog: group id out of range");
            out[entries[i].group].push_back(int(i));
        }
        return out;
    }
};

struct PostProcessRanges {
    double saturation_lo = 0.7, saturation_hi = 1.3;
    double shadow_lo = 0.6, shadow_hi = 0.9;
};

// Full placement pass: draws n ~ p(n), splits across groups, then samples
// poses with rejection on region, collision, and occlusion. Each instance is
// retried up to max_attempts and then skipped. Identical seed and inputs
// reproduce the identical instance list.
inline std::vector<AssetInstance> place_assets(const PlacementPolicy& policy,
                                               const AssetCatalog& catalog,
                                               const PlacementScene& scene, Rng& rng,
                                               PlacementStats* stats = nullptr,
                                               double occlusion_threshold = 0.95,
                                               const PostProcessRanges& post = {}) {
    int n = sample_count(policy, rng);
    std::vector<int> per_group = allocate_groups(n, policy.group_probs);
    auto group_index = catalog.by_group(policy.group_probs.size());
    for (size_t g = 0; g < per_group.size(); ++g)
        if (per_group[g] > 0 && group_index[g].empty())
            throw std::invalid_argument("place_assets: catalog has no assets for group " +
                                        std::to_string(g));

    std::vector<OrientedRect> blocked;
    for (const auto& c : scene.cuboids) blocked.push_back(cuboid_footprint(c));

    std::vector<int> free_spots;
    if (policy.region.kind == RegionKind::kParkingSpots)
        for (size_t i = 0; i < policy.region.parking_polygons.size(); ++i)
            free_spots.push_back(int(i));

    std::vector<AssetInstance> placed;
    PlacementStats local;
    local.requested = n;
    local.per_group.assign(policy.group_probs.size(), 0);

    // Post-processing parameters are drawn once per scene and recorded on
    // every instance; the render layers are post-processed with one value.
    double saturation_jitter = rng.uniform(post.saturation_lo, post.saturation_hi);
    double shadow_strength = rng.uniform(post.shadow_lo, post.shadow_hi);

    for (size_t g = 0; g < per_group.size(); ++g) {
        for (int i = 0; i < per_group[g]; ++i) {
            const CatalogEntry& entry =
                catalog.entries[group_index[g][rng.uniform_index(group_index[g].size())]];
            bool accepted = false;
            for (int attempt = 0; attempt < policy.max_attempts && !accepted; ++attempt) {
                ++local.attempts;
                if (policy.region.kind == RegionKind::kParkingSpots && free_spots.empty())
                    break;
                PoseCandidate cand =
                    sample_pose(policy.region, entry.mesh, rng, policy.parking_noise_sigma,
                                scene.ground_z,
                                policy.region.kind == RegionKind::kParkingSpots ? &free_spots
                                                                                : nullptr);
                OrientedRect fp = footprint_of(entry.mesh, cand);
                if (collides(fp, blocked)) continue;

                if (!scene.cameras.empty()) {
                    MeshAsset posed = transformed(entry.mesh, cand.pose);
                    bool visible = false;
                    for (size_t ci = 0; ci < scene.cameras.size() && !visible; ++ci) {
                        auto frac = occlusion_fraction(posed, *scene.cameras[ci],
                                                       *scene.proxy_depth[ci]);
                        if (frac && *frac < occlusion_threshold) visible = true;
                    }
                    if (!visible) continue;
                }

                AssetInstance inst;
                inst.asset_id = entry.id;
                inst.class_label = entry.class_label;
                inst.group = int(g);
                inst.pose = cand.pose;
                inst.footprint = fp;
                inst.mesh = &entry.mesh;
                inst.parking_spot = cand.parking_spot;
                inst.saturation_jitter = saturation_jitter;
                inst.shadow_strength = shadow_strength;
                placed.push_back(inst);
                blocked.push_back(fp);
                if (cand.parking_spot >= 0)
                    free_spots.erase(
                        std::find(free_spots.begin(), free_spots.end(), cand.parking_spot));
                ++local.per_group[g];
                accepted = true;
            }
            if (!accepted) ++local.skipped;
        }
    }
    local.placed = int(placed.size());
    if (stats) *stats = local;
    return placed;
}

}  // namespace mvaug

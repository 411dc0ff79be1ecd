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

#include "mvaug/placement.hpp"

using namespace mvaug;

namespace {

PlacementPolicy basic_policy() {
    PlacementPolicy policy;
    policy.counts = {3};
    policy.count_probs = {1.0};
    policy.group_probs = {1.0};
    policy.region.kind = RegionKind::kRectangle;
    policy.region.longitudinal = 12.0;
    policy.region.lateral = 6.0;
    policy.normalize();
    return policy;
}

AssetCatalog box_catalog() {
    AssetCatalog catalog;
    catalog.entries.push_back({"box_a", "hazard", 0, make_box({1.0, 1.0, 1.0})});
    return catalog;
}

// Monte-Carlo overlap estimate: fraction of points sampled in `a` that land
// inside `b` (plus the reverse), used as an independent oracle for the SAT.
bool sampled_overlap(const OrientedRect& a, const OrientedRect& b, Rng& rng, int samples) {
    auto point_in = [](const OrientedRect& r, const Vec2& p) {
        double c = std::cos(r.yaw), s = std::sin(r.yaw);
        Vec2 d{p.x - r.center.x, p.y - r.center.y};
        double lx = c * d.x + s * d.y;
        double ly = -s * d.x + c * d.y;
        return std::abs(lx) <= r.half_extents.x && std::abs(ly) <= r.half_extents.y;
    };
    auto sample_in = [&rng](const OrientedRect& r) {
        double lx = rng.uniform(-r.half_extents.x, r.half_extents.x);
        double ly = rng.uniform(-r.half_extents.y, r.half_extents.y);
        double c = std::cos(r.yaw), s = std::sin(r.yaw);
        return Vec2{r.center.x + c * lx - s * ly, r.center.y + s * lx + c * ly};
    };
    for (int i = 0; i < samples; ++i) {
        if (point_in(b, sample_in(a))) return true;
        if (point_in(a, sample_in(b))) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("sample_count: degenerate distribution always returns its support") {
    PlacementPolicy policy = basic_policy();
    policy.counts = {2};
    policy.count_probs = {1.0};
    Rng rng(1);
    for (int i = 0; i < 100; ++i) CHECK(sample_count(policy, rng) == 2);
}

TEST_CASE("sample_count: empirical mean approaches the policy average") {
    PlacementPolicy policy = basic_policy();
    policy.counts = {1, 3};
    policy.count_probs = {0.5, 0.5};
    policy.normalize();
    CHECK(policy.average_count() == doctest::Approx(2.0));

    Rng rng(42);
    double sum = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) sum += sample_count(policy, rng);
    double mean = sum / draws;
    CHECK(mean > 1.98);
    CHECK(mean < 2.02);
}

TEST_CASE("average_count evaluates sum p(n) * n") {
    PlacementPolicy policy = basic_policy();
    policy.counts = {1, 2, 3, 4};
    policy.count_probs = {0.25, 0.25, 0.25, 0.25};
    CHECK(policy.average_count() == doctest::Approx(2.5));
}

TEST_CASE("allocate_groups worked examples") {
    CHECK(allocate_groups(4, {0.5, 0.5}) == std::vector<int>{2, 2});
    // Remainder tie: lower group index wins.
    CHECK(allocate_groups(3, {0.5, 0.5}) == std::vector<int>{2, 1});
    CHECK(allocate_groups(1, {0.9, 0.1}) == std::vector<int>{1, 0});
}

TEST_CASE("allocate_groups always conserves the total") {
    Rng rng(7);
    for (int trial = 0; trial < 10000; ++trial) {
        int n = int(rng.uniform_index(20));
        size_t g_count = 1 + rng.uniform_index(6);
        std::vector<double> probs(g_count);
        double sum = 0.0;
        for (double& p : probs) {
            p = rng.uniform() + 1e-6;
            sum += p;
        }
        for (double& p : probs) p /= sum;
        auto alloc = allocate_groups(n, probs);
        int total = 0;
        for (int c : alloc) total += c;
        CHECK(total == n);
    }
}

TEST_CASE("policy normalization renormalizes with a warning") {
    PlacementPolicy policy = basic_policy();
    // Probabilities that sum to 1.1.
    policy.counts = {1, 2, 3, 4};
    policy.count_probs = {0.4, 0.3, 0.2, 0.2};
    auto warnings = policy.normalize();
    REQUIRE(warnings.size() == 1);
    double sum = 0.0;
    for (double p : policy.count_probs) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    PlacementPolicy bad = basic_policy();
    bad.count_probs = {-0.5, 1.5};
    bad.counts = {1, 2};
    CHECK_THROWS_AS(bad.normalize(), std::invalid_argument);
}

TEST_CASE("sample_pose: rectangle samples stay inside the region") {
    RegionOfInterest region;
    region.kind = RegionKind::kRectangle;
    region.longitudinal = 12.0;
    region.lateral = 6.0;
    MeshAsset box = make_box({1, 1, 1});
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        auto cand = sample_pose(region, box, rng);
        CHECK(std::abs(cand.pose.translation.x) <= 12.0);
        CHECK(std::abs(cand.pose.translation.y) <= 6.0);
        CHECK(cand.yaw > -kPi);
        CHECK(cand.yaw <= kPi);
    }
}

TEST_CASE("sample_pose: annulus radius bounds") {
    RegionOfInterest region;
    region.kind = RegionKind::kAnnulus;
    region.r_min = 3.0;
    region.r_max = 9.0;
    MeshAsset box = make_box({1, 1, 1});
    Rng rng(5);
    for (int i = 0; i < 5000; ++i) {
        auto cand = sample_pose(region, box, rng);
        double r = std::hypot(cand.pose.translation.x, cand.pose.translation.y);
        CHECK(r >= 3.0);
        CHECK(r <= 9.0);
    }
}

TEST_CASE("sample_pose: zero parking noise lands exactly on the centroid") {
    RegionOfInterest region;
    region.kind = RegionKind::kParkingSpots;
    region.parking_polygons = {{{4, 2}, {6, 2}, {6, 5}, {4, 5}}};
    MeshAsset box = make_box({0.4, 0.4, 0.3});
    Rng rng(9);
    auto cand = sample_pose(region, box, rng, /*parking_noise_sigma=*/0.0);
    CHECK(cand.pose.translation.x == doctest::Approx(5.0));
    CHECK(cand.pose.translation.y == doctest::Approx(3.5));
    // Yaw aligned with the longest polygon edge (the 3 m vertical edge).
    CHECK(std::abs(std::abs(cand.yaw) - kPi / 2) < 1e-9);
    CHECK(cand.parking_spot == 0);
}

TEST_CASE("sample_pose grounds the asset on the ground plane") {
    RegionOfInterest region;
    region.kind = RegionKind::kRectangle;
    MeshAsset mesh = make_box({1, 1, 1});
    // Shift the mesh so its bbox min z is -0.2 in the local frame.
    for (auto& v : mesh.vertices) v.z += 0.3;
    mesh.compute_bbox();
    CHECK(mesh.bbox_min.z == doctest::Approx(-0.2));
    Rng rng(11);
    auto cand = sample_pose(region, mesh, rng);
    CHECK(cand.pose.translation.z == doctest::Approx(0.2).epsilon(1e-9));

    // Lowest posed vertex touches z = 0 within 1e-4.
    MeshAsset posed = transformed(mesh, cand.pose);
    CHECK(std::abs(posed.bbox_min.z) < 1e-4);
}

TEST_CASE("rects_intersect: trivial cases") {
    OrientedRect a{{0, 0}, {0.5, 0.5}, 0.0};
    CHECK(rects_intersect(a, a));
    OrientedRect far{{100, 0}, {1, 1}, 0.0};
    CHECK(!rects_intersect(a, far));
}

TEST_CASE("rects_intersect: unit squares 1.3 m apart, one at 45 degrees") {
    // Max reach of the rotated square along x is 0.5 * sqrt(2) = 0.707, so
    // the pair has a 0.093 m gap.
    OrientedRect a{{0, 0}, {0.5, 0.5}, 0.0};
    OrientedRect b{{1.3, 0}, {0.5, 0.5}, kPi / 4};
    CHECK(!rects_intersect(a, b));
    Rng rng(13);
    CHECK(!sampled_overlap(a, b, rng, 10000));

    // Moved to 1.1 m the squares overlap (0.5 + 0.707 > 1.1).
    OrientedRect c{{1.1, 0}, {0.5, 0.5}, kPi / 4};
    CHECK(rects_intersect(a, c));
    CHECK(sampled_overlap(a, c, rng, 10000));
}

TEST_CASE("rects_intersect agrees with the point-sampling oracle") {
    Rng rng(17);
    int checked = 0;
    for (int trial = 0; trial < 300; ++trial) {
        OrientedRect a{{rng.uniform(-2, 2), rng.uniform(-2, 2)},
                       {rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5)},
                       rng.uniform(-kPi, kPi)};
        OrientedRect b{{rng.uniform(-2, 2), rng.uniform(-2, 2)},
                       {rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5)},
                       rng.uniform(-kPi, kPi)};
        bool sat = rects_intersect(a, b);
        bool sampled = sampled_overlap(a, b, rng, 4000);
        if (sampled) {
            // A sampled interior point is proof of intersection.
            CHECK(sat);
            ++checked;
        }
        if (!sat) CHECK(!sampled);
    }
    CHECK(checked > 50);  // the generator produces plenty of overlaps
}

TEST_CASE("occlusion_fraction: empty scene sees everything") {
    CameraModel cam;
    cam.kind = CameraKind::kPinhole;
    cam.width = 640;
    cam.height = 480;
    cam.fx = cam.fy = 500;
    cam.principal_point = {320, 240};
    cam.extrinsics = {look_rotation({1, 0, 0}), {0, 0, 0}};

    DepthBuffer empty_proxies(cam.width, cam.height);
    MeshAsset box = transformed(make_box({1, 1, 1}), {Mat3::identity(), {10, 0, 0}});
    auto frac = occlusion_fraction(box, cam, empty_proxies);
    REQUIRE(frac.has_value());
    CHECK(*frac == 0.0);
}

TEST_CASE("occlusion_fraction: fully hidden and half hidden") {
    CameraModel cam;
    cam.kind = CameraKind::kPinhole;
    cam.width = 640;
    cam.height = 480;
    cam.fx = cam.fy = 500;
    cam.principal_point = {320, 240};
    cam.extrinsics = {look_rotation({1, 0, 0}), {0, 0, 0}};

    // Candidate: thin 4x4 wall at x = 10.
    MeshAsset wall = transformed(make_box({0.1, 4, 4}), {Mat3::identity(), {10, 0, 0}});

    // Full occluder: larger, nearer wall.
    std::vector<Cuboid3D> full = {{{5, 0, 0}, {0.1, 4, 4}, 0.0, "wall", 1.0}};
    DepthBuffer full_proxies = rasterize_cuboid_proxies(cam, full);
    auto frac_full = occlusion_fraction(wall, cam, full_proxies);
    REQUIRE(frac_full.has_value());
    CHECK(*frac_full == doctest::Approx(1.0));

    // Half occluder: covers exactly the y > 0 half of the candidate's view
    // (tan range [0, 0.2] from the camera at half the distance).
    std::vector<Cuboid3D> half = {{{5, 0.5, 0}, {0.1, 1.0, 4}, 0.0, "wall", 1.0}};
    DepthBuffer half_proxies = rasterize_cuboid_proxies(cam, half);
    auto frac_half = occlusion_fraction(wall, cam, half_proxies);
    REQUIRE(frac_half.has_value());
    CHECK(*frac_half == doctest::Approx(0.5).epsilon(0.05));

    // Candidate behind the camera: not visible at all.
    MeshAsset behind = transformed(make_box({1, 1, 1}), {Mat3::identity(), {-10, 0, 0}});
    CHECK(!occlusion_fraction(behind, cam, full_proxies).has_value());
}

TEST_CASE("place_assets: unobstructed scene places the full request") {
    PlacementPolicy policy = basic_policy();
    AssetCatalog catalog = box_catalog();
    PlacementScene scene;  // no cuboids, no cameras
    Rng rng(21);
    PlacementStats stats;
    auto placed = place_assets(policy, catalog, scene, rng, &stats);
    CHECK(placed.size() == 3);
    CHECK(stats.placed == 3);
    CHECK(stats.skipped == 0);

    // Every accepted instance is grounded, in-region, non-colliding.
    for (size_t i = 0; i < placed.size(); ++i) {
        CHECK(policy.region.contains(
            {placed[i].pose.translation.x, placed[i].pose.translation.y}));
        MeshAsset posed = transformed(*placed[i].mesh, placed[i].pose);
        CHECK(std::abs(posed.bbox_min.z) < 1e-4);
        for (size_t j = i + 1; j < placed.size(); ++j)
            CHECK(!rects_intersect(placed[i].footprint, placed[j].footprint));
    }
}

TEST_CASE("place_assets: fully blocked region places nothing") {
    PlacementPolicy policy = basic_policy();
    policy.region.longitudinal = 2.0;
    policy.region.lateral = 2.0;
    AssetCatalog catalog = box_catalog();
    PlacementScene scene;
    scene.cuboids.push_back({{0, 0, 0}, {8, 8, 1}, 0.0, "blocker", 1.0});
    Rng rng(23);
    PlacementStats stats;
    auto placed = place_assets(policy, catalog, scene, rng, &stats);
    CHECK(placed.empty());
    CHECK(stats.skipped == 3);
    CHECK(stats.attempts == 3 * policy.max_attempts);
}

TEST_CASE("place_assets: identical seeds give bit-identical results") {
    PlacementPolicy policy = basic_policy();
    policy.counts = {1, 3};
    policy.count_probs = {0.5, 0.5};
    policy.normalize();
    AssetCatalog catalog = box_catalog();
    PlacementScene scene;

    for (uint64_t seed : {1ull, 99ull}) {
        Rng rng_a(seed), rng_b(seed);
        auto a = place_assets(policy, catalog, scene, rng_a);
        auto b = place_assets(policy, catalog, scene, rng_b);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].pose.translation.x == b[i].pose.translation.x);
            CHECK(a[i].pose.translation.y == b[i].pose.translation.y);
            CHECK(a[i].pose.translation.z == b[i].pose.translation.z);
            CHECK(a[i].saturation_jitter == b[i].saturation_jitter);
            CHECK(a[i].asset_id == b[i].asset_id);
        }
    }
}

TEST_CASE("place_assets: long-run group frequencies track p(g)") {
    // p(g) chosen so the deterministic apportionment is unbiased under this
    // p(n); the randomness comes from the count draws.
    PlacementPolicy policy = basic_policy();
    policy.counts = {1, 3};
    policy.count_probs = {0.5, 0.5};
    policy.group_probs = {0.5, 0.25, 0.25};
    policy.normalize();

    AssetCatalog catalog;
    catalog.entries.push_back({"a", "hazard", 0, make_box({0.5, 0.5, 0.5})});
    catalog.entries.push_back({"b", "hazard", 1, make_box({0.5, 0.5, 0.5})});
    catalog.entries.push_back({"c", "hazard", 2, make_box({0.5, 0.5, 0.5})});
    PlacementScene scene;

    std::vector<double> counts(3, 0.0);
    double total = 0.0;
    const int scenes = 10000;
    for (int s = 0; s < scenes; ++s) {
        Rng rng = Rng::stream(1234, "scene_" + std::to_string(s));
        auto placed = place_assets(policy, catalog, scene, rng);
        for (const auto& inst : placed) {
            counts[size_t(inst.group)] += 1.0;
            total += 1.0;
        }
    }
    for (int g = 0; g < 3; ++g)
        CHECK(std::abs(counts[size_t(g)] / total - policy.group_probs[size_t(g)]) < 0.02);
}

TEST_CASE("place_assets: parking spots are used at most once") {
    PlacementPolicy policy = basic_policy();
    policy.counts = {3};
    policy.count_probs = {1.0};
    policy.region.kind = RegionKind::kParkingSpots;
    policy.region.parking_polygons = {
        {{4, 2}, {6, 2}, {6, 5}, {4, 5}},
        {{4, 6}, {6, 6}, {6, 9}, {4, 9}},
    };
    policy.parking_noise_sigma = 0.05;
    AssetCatalog catalog;
    catalog.entries.push_back({"lock", "ground_lock_locked", 0, make_box({0.3, 0.3, 0.3})});
    PlacementScene scene;
    Rng rng(31);
    auto placed = place_assets(policy, catalog, scene, rng);
    CHECK(placed.size() == 2);  // only two spots exist
    CHECK(placed[0].parking_spot != placed[1].parking_spot);
}

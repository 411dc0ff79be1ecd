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

#include <set>

#include "mvaug/labels.hpp"

using namespace mvaug;

namespace {

CameraModel front_camera() {
    CameraModel cam;
    cam.kind = CameraKind::kPinhole;
    cam.width = 640;
    cam.height = 480;
    cam.fx = cam.fy = 400;
    cam.principal_point = {320, 240};
    cam.extrinsics = {look_rotation({1, 0, 0}), {0, 0, 0}};
    return cam;
}

// 2D first-hit distance of the ray at `phi` against a rectangle, or
// infinity. Independent of the implementation's wedge algebra.
double ray_rect_distance(double phi, const OrientedRect& rect) {
    Vec2 dir{std::cos(phi), std::sin(phi)};
    auto corners = rect.corners();
    double best = std::numeric_limits<double>::infinity();
    for (int e = 0; e < 4; ++e) {
        Vec2 p = corners[e], q = corners[(e + 1) % 4];
        Vec2 d{q.x - p.x, q.y - p.y};
        double denom = d.x * dir.y - d.y * dir.x;
        if (std::abs(denom) < 1e-15) continue;
        double t = (p.y * dir.x - p.x * dir.y) / denom;
        if (t < 0.0 || t > 1.0) continue;
        Vec2 hit{p.x + d.x * t, p.y + d.y * t};
        double s = hit.x * dir.x + hit.y * dir.y;
        if (s >= 0.0) best = std::min(best, s);
    }
    return best;
}

Cuboid3D cuboid_at(const Vec3& center, const Vec3& dims, double yaw,
                   const std::string& cls = "hazard") {
    return Cuboid3D{center, dims, yaw, cls, 1.0};
}

}  // namespace

TEST_CASE("synth_cuboid: unit cube at the origin") {
    MeshAsset box = make_box({1, 1, 1});
    AssetInstance inst;
    inst.mesh = &box;
    inst.class_label = "hazard";
    inst.pose = RigidTransform::identity();
    Cuboid3D c = synth_cuboid(inst);
    CHECK(c.dimensions.x == doctest::Approx(1.0));
    CHECK(c.dimensions.y == doctest::Approx(1.0));
    CHECK(c.dimensions.z == doctest::Approx(1.0));
    CHECK(c.center.norm() < 1e-12);
    CHECK(c.yaw == 0.0);
    CHECK(c.class_label == "hazard");
}

TEST_CASE("synth_cuboid: translation equivariance") {
    MeshAsset box = make_box({1.5, 0.8, 0.6});
    AssetInstance inst;
    inst.mesh = &box;
    inst.pose = {Mat3::identity(), {3, 4, 0}};
    Cuboid3D c = synth_cuboid(inst);
    CHECK((c.center - Vec3{3, 4, 0}).norm() < 1e-12);
    CHECK(c.dimensions.x == doctest::Approx(1.5));
    CHECK(c.dimensions.y == doctest::Approx(0.8));
    CHECK(c.dimensions.z == doctest::Approx(0.6));
}

TEST_CASE("synth_cuboid: yawed pose against a brute-force vertex fit") {
    MeshAsset box = make_box({2.0, 1.0, 0.5});
    double yaw = kPi / 6;
    AssetInstance inst;
    inst.mesh = &box;
    inst.pose = {Mat3::rotation_z(yaw), {5, -2, 0.25}};
    Cuboid3D c = synth_cuboid(inst);
    CHECK(c.yaw == doctest::Approx(yaw));

    // Oracle: rotate posed vertices into the yaw frame and take the box.
    double cs = std::cos(-yaw), sn = std::sin(-yaw);
    double lo[3] = {1e300, 1e300, 1e300}, hi[3] = {-1e300, -1e300, -1e300};
    for (const Vec3& v : box.vertices) {
        Vec3 p = inst.pose.apply(v);
        double q[3] = {cs * p.x - sn * p.y, sn * p.x + cs * p.y, p.z};
        for (int i = 0; i < 3; ++i) {
            lo[i] = std::min(lo[i], q[i]);
            hi[i] = std::max(hi[i], q[i]);
        }
    }
    CHECK(c.dimensions.x == doctest::Approx(hi[0] - lo[0]));
    CHECK(c.dimensions.y == doctest::Approx(hi[1] - lo[1]));
    CHECK(c.dimensions.z == doctest::Approx(hi[2] - lo[2]));
    // Center maps back.
    Vec3 center_yaw_frame{(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2};
    CHECK((Mat3::rotation_z(yaw) * center_yaw_frame - c.center).norm() < 1e-9);
}

TEST_CASE("cuboid_to_bbox2d: centered cube gives a symmetric box") {
    CameraModel cam = front_camera();
    Cuboid3D c = cuboid_at({10, 0, 0}, {1, 1, 1}, 0.0);
    auto box = cuboid_to_bbox2d(c, cam);
    REQUIRE(box.has_value());
    CHECK(box->x_min + box->x_max == doctest::Approx(640.0).epsilon(1e-6));
    CHECK(box->y_min + box->y_max == doctest::Approx(480.0).epsilon(1e-6));
    CHECK(box->truncation == doctest::Approx(0.0));
    CHECK(box->occlusion == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("cuboid_to_bbox2d: behind the camera returns none") {
    CameraModel cam = front_camera();
    Cuboid3D c = cuboid_at({-10, 0, 0}, {1, 1, 1}, 0.0);
    CHECK(!cuboid_to_bbox2d(c, cam).has_value());
}

TEST_CASE("cuboid_to_bbox2d: equals the hull of independently projected corners") {
    CameraModel cam = front_camera();
    Cuboid3D c = cuboid_at({12, 2, -0.5}, {2.5, 1.2, 1.4}, 0.4);
    auto box = cuboid_to_bbox2d(c, cam);
    REQUIRE(box.has_value());
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const Vec3& p : cuboid_corners(c)) {
        auto px = cam.project(p);
        REQUIRE(px.has_value());
        x0 = std::min(x0, px->pixel.x);
        x1 = std::max(x1, px->pixel.x);
        y0 = std::min(y0, px->pixel.y);
        y1 = std::max(y1, px->pixel.y);
    }
    // Pinhole: straight edges project inside the corner hull.
    CHECK(box->x_min == doctest::Approx(x0).epsilon(1e-9));
    CHECK(box->x_max == doctest::Approx(x1).epsilon(1e-9));
    CHECK(box->y_min == doctest::Approx(y0).epsilon(1e-9));
    CHECK(box->y_max == doctest::Approx(y1).epsilon(1e-9));
}

TEST_CASE("cuboid_to_bbox2d: truncation reflects image clipping") {
    CameraModel cam = front_camera();
    // Push the cuboid left so part of its box leaves the frame.
    Cuboid3D c = cuboid_at({6, 4.5, 0}, {1, 1, 1}, 0.0);
    auto box = cuboid_to_bbox2d(c, cam);
    REQUIRE(box.has_value());
    CHECK(box->truncation > 0.0);
    CHECK(box->x_min == 0.0);
}

TEST_CASE("update_existing_labels: no instances leaves labels untouched") {
    LabelSet labels;
    labels.cuboids.push_back(cuboid_at({10, 0, 0}, {1, 1, 1}, 0.0));
    labels.freespace = RadialDistanceMap::unbounded(8);
    CameraModel cam = front_camera();
    LabelSet out = update_existing_labels(labels, {}, {{"front", &cam}}, {});
    CHECK(out.cuboids[0].visibility == 1.0);
    CHECK(out.freespace.distances == labels.freespace.distances);
}

TEST_CASE("update_existing_labels: full and half synthetic coverage") {
    CameraModel cam = front_camera();
    LabelSet labels;
    labels.cuboids.push_back(cuboid_at({10, 0, 0}, {0.2, 4, 4}, 0.0, "wall"));

    MeshAsset box = make_box({0.5, 0.5, 0.5});
    AssetInstance inst;
    inst.mesh = &box;
    inst.class_label = "hazard";
    inst.pose = {Mat3::identity(), {5, 0, 0}};

    // Synthetic layer covering the whole frame, nearer than the wall.
    RenderLayers full(cam.width, cam.height);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            full.object.at(x, y, 3) = 1.0f;
            full.depth.at(x, y) = 5.0f;
        }
    LabelSet covered = update_existing_labels(labels, {inst}, {{"front", &cam}},
                                              {{"front", &full}});
    CHECK(covered.cuboids[0].visibility == doctest::Approx(0.0));

    // Left half of the image only (the wall is centered, so half its pixels).
    RenderLayers half(cam.width, cam.height);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width / 2; ++x) {
            half.object.at(x, y, 3) = 1.0f;
            half.depth.at(x, y) = 5.0f;
        }
    LabelSet halved = update_existing_labels(labels, {inst}, {{"front", &cam}},
                                             {{"front", &half}});
    CHECK(halved.cuboids[0].visibility == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("rdm_update: nearer asset wins, farther asset is ignored") {
    RadialDistanceMap rdm = RadialDistanceMap::unbounded(360);
    for (auto& d : rdm.distances) d = 20.0;
    for (auto& s : rdm.semantics) s = "vehicle";

    // Asset dead ahead at 5 m.
    Cuboid3D near_c = cuboid_at({5.5, 0, 0}, {1, 1, 1}, 0.0);
    RadialDistanceMap after = rdm_update(rdm, near_c, "hazard");
    CHECK(after.distances[0] == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(after.semantics[0] == "hazard");

    // Asset behind the stored distance changes nothing.
    Cuboid3D far_c = cuboid_at({25.5, 0, 0}, {1, 1, 1}, 0.0);
    RadialDistanceMap unchanged = rdm_update(rdm, far_c, "hazard");
    CHECK(unchanged.distances == rdm.distances);
    CHECK(unchanged.semantics == rdm.semantics);
}

TEST_CASE("rdm_update: touched bins match a dense ray sweep") {
    const int bins = 360;
    RadialDistanceMap rdm = RadialDistanceMap::unbounded(bins);

    // Footprint at ~2.5 deg azimuth, ~10 m, spanning about 3 one-degree bins.
    Cuboid3D c = cuboid_at({9.99, 0.437, 0}, {0.2, 0.24, 1}, 0.35);
    RadialDistanceMap updated = rdm_update(rdm, c, "hazard");
    OrientedRect rect = cuboid_footprint(c);

    // Oracle: sweep rays at 0.01 degree steps, take per-bin minima.
    std::vector<double> oracle(bins, std::numeric_limits<double>::infinity());
    for (double deg = 0.0; deg < 360.0; deg += 0.01) {
        double phi = deg_to_rad(deg);
        double d = ray_rect_distance(phi, rect);
        if (!std::isfinite(d)) continue;
        int b = int(deg);  // 1-degree bins
        oracle[size_t(b)] = std::min(oracle[size_t(b)], d);
    }

    std::set<int> updated_bins, oracle_bins;
    for (int b = 0; b < bins; ++b) {
        if (std::isfinite(updated.distances[size_t(b)])) updated_bins.insert(b);
        if (std::isfinite(oracle[size_t(b)])) oracle_bins.insert(b);
    }
    CHECK(updated_bins == oracle_bins);
    CHECK(updated_bins.size() == 3);
    for (int b : updated_bins)
        CHECK(updated.distances[size_t(b)] ==
              doctest::Approx(oracle[size_t(b)]).epsilon(1e-3));
}

TEST_CASE("rdm_update: idempotent and order-independent") {
    RadialDistanceMap rdm = RadialDistanceMap::unbounded(90);
    Cuboid3D a = cuboid_at({8, 1, 0}, {1, 2, 1}, 0.2);
    Cuboid3D b = cuboid_at({6, -2, 0}, {1.5, 1, 1}, -0.7);

    RadialDistanceMap ab = rdm_update(rdm_update(rdm, a, "hazard"), b, "hazard");
    RadialDistanceMap ba = rdm_update(rdm_update(rdm, b, "hazard"), a, "hazard");
    CHECK(ab.distances == ba.distances);

    RadialDistanceMap twice = rdm_update(ab, a, "hazard");
    CHECK(twice.distances == ab.distances);
}

TEST_CASE("match_cuboids: behavior at and around the matching thresholds") {
    std::vector<Cuboid3D> gt = {cuboid_at({10, 0, 0}, {1, 1, 1}, 0.0, "person")};

    // 9% radial error, 1 degree yaw: a true positive.
    std::vector<ScoredCuboid> good = {
        {cuboid_at({10.9, 0, 0}, {1, 1, 1}, deg_to_rad(1.0), "person"), 0.9}};
    MatchResult res = match_cuboids(good, gt);
    CHECK(res.matches.size() == 1);

    // Same radii but 3 degrees of yaw error: FP + FN.
    std::vector<ScoredCuboid> bad_yaw = {
        {cuboid_at({10.9, 0, 0}, {1, 1, 1}, deg_to_rad(3.0), "person"), 0.9}};
    res = match_cuboids(bad_yaw, gt);
    CHECK(res.matches.empty());
    CHECK(res.false_positives.size() == 1);
    CHECK(res.false_negatives.size() == 1);

    // Exactly 10% is not a match ("less than 10%")...
    std::vector<ScoredCuboid> at_radial = {
        {cuboid_at({11.0, 0, 0}, {1, 1, 1}, 0.0, "person"), 0.9}};
    CHECK(match_cuboids(at_radial, gt).matches.empty());

    // ...but exactly 2 degrees is ("within 2 degrees").
    std::vector<ScoredCuboid> at_yaw = {
        {cuboid_at({10.0, 0, 0}, {1, 1, 1}, deg_to_rad(2.0), "person"), 0.9}};
    CHECK(match_cuboids(at_yaw, gt).matches.size() == 1);

    // Empty predictions: every gt is a false negative.
    res = match_cuboids({}, gt);
    CHECK(res.false_negatives.size() == 1);

    // Class mismatch never matches.
    std::vector<ScoredCuboid> wrong_class = {
        {cuboid_at({10.0, 0, 0}, {1, 1, 1}, 0.0, "biker"), 0.9}};
    CHECK(match_cuboids(wrong_class, gt).matches.empty());
}

TEST_CASE("match_cuboids: conservation holds on randomized instances") {
    Rng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t n_gt = rng.uniform_index(6);
        size_t n_pred = rng.uniform_index(6);
        std::vector<Cuboid3D> gt;
        std::vector<ScoredCuboid> pred;
        for (size_t i = 0; i < n_gt; ++i)
            gt.push_back(cuboid_at({rng.uniform(2, 20), rng.uniform(-5, 5), 0},
                                   {1, 1, 1}, rng.uniform(-kPi, kPi), "p"));
        for (size_t i = 0; i < n_pred; ++i)
            pred.push_back({cuboid_at({rng.uniform(2, 20), rng.uniform(-5, 5), 0},
                                      {1, 1, 1}, rng.uniform(-kPi, kPi), "p"),
                            rng.uniform()});
        MatchResult res = match_cuboids(pred, gt);
        CHECK(res.matches.size() + res.false_negatives.size() == n_gt);
        CHECK(res.matches.size() + res.false_positives.size() == n_pred);
        // No double assignment.
        std::set<int> used_gt, used_pred;
        for (auto [pi, gi] : res.matches) {
            CHECK(used_pred.insert(pi).second);
            CHECK(used_gt.insert(gi).second);
        }
    }
}

TEST_CASE("detection_metrics: perfect predictions") {
    std::vector<Cuboid3D> gt = {cuboid_at({10, 0, 0}, {1, 1, 1}, 0.1, "p"),
                                cuboid_at({5, 2, 0}, {1, 1, 1}, -0.4, "p")};
    std::vector<ScoredCuboid> pred = {{gt[0], 0.9}, {gt[1], 0.8}};
    MatchResult res = match_cuboids(pred, gt);
    DetectionMetrics m = detection_metrics(res, pred, gt);
    CHECK(m.average_precision == doctest::Approx(1.0));
    CHECK(m.fscore == doctest::Approx(1.0));
    CHECK(m.position_error_m == doctest::Approx(0.0));
    CHECK(m.yaw_error_deg == doctest::Approx(0.0));
}

TEST_CASE("detection_metrics: hand-enumerated 3-point PR curve") {
    std::vector<Cuboid3D> gt = {cuboid_at({10, 0, 0}, {1, 1, 1}, 0.0, "p"),
                                cuboid_at({20, 0, 0}, {1, 1, 1}, 0.0, "p")};
    std::vector<ScoredCuboid> pred = {
        {cuboid_at({10.9, 0, 0}, {1, 1, 1}, deg_to_rad(1.0), "p"), 0.9},  // TP
        {cuboid_at({40, 0, 0}, {1, 1, 1}, 0.0, "p"), 0.8},                // FP
        {cuboid_at({20, 0, 0}, {1, 1, 1}, 0.0, "p"), 0.7},                // TP
    };
    MatchResult res = match_cuboids(pred, gt);
    REQUIRE(res.matches.size() == 2);
    REQUIRE(res.false_positives == std::vector<int>{1});

    DetectionMetrics m = detection_metrics(res, pred, gt);
    // PR points: (1, 0.5), (1/2, 0.5), (2/3, 1). AP = 0.5*1 + 0.5*(2/3) = 5/6.
    CHECK(m.average_precision == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    // Operating point uses all predictions: P = 2/3, R = 1.
    CHECK(m.fscore == doctest::Approx(0.8));
    CHECK(m.position_error_m == doctest::Approx(0.45));
    CHECK(m.yaw_error_deg == doctest::Approx(0.5));

    // AP is invariant under strictly monotone score rescaling.
    std::vector<ScoredCuboid> rescaled = pred;
    for (auto& p : rescaled) p.score = 10.0 * p.score * p.score + 1.0;
    DetectionMetrics m2 = detection_metrics(match_cuboids(rescaled, gt), rescaled, gt);
    CHECK(m2.average_precision == doctest::Approx(m.average_precision).epsilon(1e-12));
}

TEST_CASE("detection_metrics: no predictions and no ground truth") {
    std::vector<Cuboid3D> gt = {cuboid_at({10, 0, 0}, {1, 1, 1}, 0.0, "p")};
    MatchResult res = match_cuboids({}, gt);
    DetectionMetrics m = detection_metrics(res, {}, gt);
    CHECK(m.average_precision == 0.0);
    CHECK(m.fscore == 0.0);

    CHECK_THROWS_AS(detection_metrics(res, {}, {}), std::invalid_argument);
}

TEST_CASE("rdm_metrics: gaps, success rate, and hazard precision/recall") {
    RadialDistanceMap gt = RadialDistanceMap::unbounded(10);
    RadialDistanceMap pred = RadialDistanceMap::unbounded(10);

    // Identical maps: zero gaps, full success.
    for (size_t b = 0; b < 10; ++b) {
        gt.distances[b] = 5.0 + double(b);
        gt.semantics[b] = b % 2 == 0 ? "hazard" : "vehicle";
    }
    pred = gt;
    RdmMetrics ident = rdm_metrics(pred, gt, 100.0);
    CHECK(ident.abs_gap_m == 0.0);
    CHECK(ident.rel_gap == 0.0);
    CHECK(ident.success_rate == 1.0);
    CHECK(ident.precision == 1.0);
    CHECK(ident.recall == 1.0);
    CHECK(ident.bins_evaluated == 10);

    // 10 m vs 10.5 m: 5% relative gap, success.
    RadialDistanceMap g2 = RadialDistanceMap::unbounded(1);
    RadialDistanceMap p2 = RadialDistanceMap::unbounded(1);
    g2.distances[0] = 10.0;
    g2.semantics[0] = "hazard";
    p2.distances[0] = 10.5;
    p2.semantics[0] = "hazard";
    RdmMetrics near = rdm_metrics(p2, g2, 100.0);
    CHECK(near.abs_gap_m == doctest::Approx(0.5));
    CHECK(near.rel_gap == doctest::Approx(0.05));
    CHECK(near.success_rate == 1.0);

    // 10 m vs 12 m: 20% relative gap, failure.
    p2.distances[0] = 12.0;
    RdmMetrics off = rdm_metrics(p2, g2, 100.0);
    CHECK(off.rel_gap == doctest::Approx(0.20));
    CHECK(off.success_rate == 0.0);

    // Radius limit filters bins by gt distance.
    RdmMetrics limited = rdm_metrics(pred, gt, 10.0);
    CHECK(limited.bins_evaluated == 6);  // gt distances 5..10

    RadialDistanceMap mismatched = RadialDistanceMap::unbounded(5);
    CHECK_THROWS_AS(rdm_metrics(mismatched, gt, 10.0), std::invalid_argument);
}

TEST_CASE("update_existing_labels: locked ground lock flips spot availability") {
    LabelSet labels;
    labels.parking.push_back({{{4, 2}, {6, 2}, {6, 5}, {4, 5}}, true, "none"});
    labels.parking.push_back({{{4, 6}, {6, 6}, {6, 9}, {4, 9}}, true, "none"});

    MeshAsset lock = make_box({0.3, 0.3, 0.3});
    AssetInstance locked;
    locked.mesh = &lock;
    locked.class_label = "ground_lock_locked";
    locked.parking_spot = 0;
    locked.pose = {Mat3::identity(), {5, 3.5, 0.15}};

    AssetInstance unlocked = locked;
    unlocked.class_label = "ground_lock_unlocked";
    unlocked.parking_spot = 1;
    unlocked.pose = {Mat3::identity(), {5, 7.5, 0.15}};

    LabelSet out = update_existing_labels(labels, {locked, unlocked}, {}, {});
    CHECK(out.parking[0].available == false);
    CHECK(out.parking[0].lock_state == "locked");
    CHECK(out.parking[1].available == true);
    CHECK(out.parking[1].lock_state == "unlocked");
}

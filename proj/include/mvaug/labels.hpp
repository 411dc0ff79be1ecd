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
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvaug/placement.hpp"
#include "mvaug/raster.hpp"
#include "mvaug/render.hpp"

namespace mvaug {

inline constexpr double kUnboundedDistance = std::numeric_limits<double>::infinity();

// Freespace as equiangular bins around the ego vehicle; bin b covers
// azimuths [2*pi*b/B, 2*pi*(b+1)/B).
struct RadialDistanceMap {
    std::vector<double> distances;       // meters; kUnboundedDistance = no obstacle
    std::vector<std::string> semantics;  // per-bin label, "none" when empty

    static RadialDistanceMap unbounded(int bins) {
        if (bins < 1) throw std::invalid_argument("RadialDistanceMap: need >= 1 bin");
        RadialDistanceMap rdm;
        rdm.distances.assign(size_t(bins), kUnboundedDistance);
        rdm.semantics.assign(size_t(bins), "none");
        return rdm;
    }

    size_t bins() const { return distances.size(); }
    double bin_start(size_t b) const { return 2.0 * kPi * double(b) / double(bins()); }
    double bin_width() const { return 2.0 * kPi / double(bins()); }
};

// Axis-aligned 2D detection box in one camera image.
struct BBox2D {
    int cuboid_index = -1;  // index into LabelSet::cuboids
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
    std::string class_label;
    double truncation = 0.0;  // fraction of the box clipped at the image border
    double occlusion = 0.0;   // 1 - visibility
};

struct ParkingSpot {
    std::vector<Vec2> polygon;  // ego frame
    bool available = true;
    std::string lock_state = "none";  // none | locked | unlocked
};

struct LabelSet {
    std::vector<Cuboid3D> cuboids;
    std::map<std::string, std::vector<BBox2D>> bboxes2d;  // keyed by camera name
    RadialDistanceMap freespace;
    std::vector<ParkingSpot> parking;
};

struct MatchCriteria {
    double max_relative_radial = 0.10;       // strict: |dr|/r_gt < this
    double max_yaw_diff = deg_to_rad(2.0);   // non-strict: |dyaw| <= this

    void validate() const {
        if (max_relative_radial <= 0 || max_yaw_diff <= 0)
            throw std::invalid_argument("MatchCriteria: thresholds must be positive");
    }
};

// Tight yaw-aligned cuboid of a posed instance: vertices are un-rotated into
// the pose's yaw frame, boxed, and the box rotated back.
inline Cuboid3D synth_cuboid(const AssetInstance& instance) {
    if (!instance.mesh) throw std::invalid_argument("synth_cuboid: instance without mesh");
    double yaw = std::atan2(instance.pose.rotation(1, 0), instance.pose.rotation(0, 0));
    Mat3 unrotate = Mat3::rotation_z(-yaw);
    const double inf = std::numeric_limits<double>::infinity();
    Vec3 lo{inf, inf, inf}, hi{-inf, -inf, -inf};
    for (const Vec3& v : instance.mesh->vertices) {
        Vec3 q = unrotate * instance.pose.apply(v);
        lo = {std::min(lo.x, q.x), std::min(lo.y, q.y), std::min(lo.z, q.z)};
        hi = {std::max(hi.x, q.x), std::max(hi.y, q.y), std::max(hi.z, q.z)};
    }
    Cuboid3D c;
    c.center = Mat3::rotation_z(yaw) * ((lo + hi) * 0.5);
    c.dimensions = hi - lo;
    c.yaw = wrap_angle(yaw);
    c.class_label = instance.class_label;
    c.visibility = 1.0;
    return c;
}

// Projects a cuboid to an axis-aligned 2D box: corners plus edge-subdivision
// samples (fisheye-safe), clipped to the image. Visibility is the fraction
// of rasterized silhouette pixels that pass the occlusion depth proxies.
// Returns nullopt when nothing projects into the camera.
inline std::optional<BBox2D> cuboid_to_bbox2d(const Cuboid3D& cuboid,
                                              const CameraModel& camera,
                                              const DepthBuffer* proxies = nullptr,
                                              int edge_samples = 8) {
    auto corners = cuboid_corners(cuboid);
    static const int edges[12][2] = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {0, 2}, {1, 3},
                                     {4, 6}, {5, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    bool any = false;
    auto add = [&](const Vec3& p) {
        auto px = camera.project(p);
        if (!px) return;
        any = true;
        x0 = std::min(x0, px->pixel.x);
        x1 = std::max(x1, px->pixel.x);
        y0 = std::min(y0, px->pixel.y);
        y1 = std::max(y1, px->pixel.y);
    };
    for (const Vec3& c : corners) add(c);
    for (const auto& e : edges)
        for (int s = 1; s < edge_samples; ++s) {
            double t = double(s) / edge_samples;
            add(corners[e[0]] * (1.0 - t) + corners[e[1]] * t);
        }
    if (!any) return std::nullopt;

    double full_area = std::max(x1 - x0, 0.0) * std::max(y1 - y0, 0.0);
    double cx0 = std::max(x0, 0.0), cx1 = std::min(x1, double(camera.width));
    double cy0 = std::max(y0, 0.0), cy1 = std::min(y1, double(camera.height));
    if (cx0 >= cx1 || cy0 >= cy1) return std::nullopt;  // fully outside the frame

    BBox2D box;
    box.x_min = cx0;
    box.y_min = cy0;
    box.x_max = cx1;
    box.y_max = cy1;
    box.class_label = cuboid.class_label;
    double clipped_area = (cx1 - cx0) * (cy1 - cy0);
    box.truncation = full_area > 0.0 ? 1.0 - clipped_area / full_area : 0.0;

    // Occlusion-aware visibility from the rasterized silhouette.
    DepthBuffer silhouette(camera.width, camera.height);
    MeshAsset mesh = make_box(cuboid.dimensions);
    RigidTransform pose{Mat3::rotation_z(cuboid.yaw), cuboid.center};
    rasterize_mesh_depth(camera, transformed(mesh, pose), silhouette);
    size_t covered = 0, visible = 0;
    for (int y = 0; y < camera.height; ++y)
        for (int x = 0; x < camera.width; ++x) {
            float d = silhouette.at(x, y);
            if (!std::isfinite(d)) continue;
            ++covered;
            if (!proxies || proxies->at(x, y) >= d) ++visible;
        }
    double vis = covered > 0 ? double(visible) / double(covered) : 0.0;
    box.occlusion = 1.0 - vis;
    return box;
}

// Lowers per-camera visibility of existing cuboids by the fraction of their
// silhouette newly covered by nearer synthetic pixels, updates the freespace
// map, and flips parking availability for spots that received a locked
// ground lock. `layers` maps camera name to the rendered layers.
inline LabelSet update_existing_labels(
    const LabelSet& labels, const std::vector<AssetInstance>& instances,
    const std::vector<std::pair<std::string, const CameraModel*>>& cameras,
    const std::map<std::string, const RenderLayers*>& layers,
    const std::string& freespace_label = "hazard");

// Minimum radial distance from the origin to segment (p, q) restricted to
// azimuths in [phi0, phi0 + width); nullopt when the segment misses the
// wedge entirely.
namespace detail {

inline std::optional<double> segment_wedge_min_distance(const Vec2& p, const Vec2& q,
                                                        double phi0, double width) {
    auto in_wedge = [&](double phi) { return wrap_angle_2pi(phi - phi0) < width; };
    bool touched = false;
    double best = std::numeric_limits<double>::infinity();

    auto consider = [&](double d) { best = std::min(best, d); };

    if (in_wedge(std::atan2(p.y, p.x))) {
        touched = true;
        consider(p.norm());
    }
    if (in_wedge(std::atan2(q.y, q.x))) {
        touched = true;
        consider(q.norm());
    }

    // Perpendicular foot of the origin on the segment.
    Vec2 d = q - p;
    double len2 = d.dot(d);
    if (len2 > 0.0) {
        double t = -p.dot(d) / len2;
        if (t > 0.0 && t < 1.0) {
            Vec2 foot = p + d * t;
            if (in_wedge(std::atan2(foot.y, foot.x))) {
                touched = true;
                consider(foot.norm());
            }
        }
    }

    // Boundary rays. Crossing the opening ray phi0 counts as membership;
    // the closing ray is only a closure candidate for the minimum.
    for (int side = 0; side < 2; ++side) {
        double phi = side == 0 ? phi0 : phi0 + width;
        Vec2 dir{std::cos(phi), std::sin(phi)};
        // Solve p + t*(q-p) = s*dir with s >= 0, t in [0,1].
        double denom = d.x * dir.y - d.y * dir.x;
        if (std::abs(denom) < 1e-15) continue;
        double t = (p.y * dir.x - p.x * dir.y) / denom;
        if (t < 0.0 || t > 1.0) continue;
        Vec2 hit = p + d * t;
        double s = hit.dot(dir);
        if (s < 0.0) continue;
        if (side == 0) touched = true;
        if (touched || side == 1) consider(s);
    }

    if (!touched) return std::nullopt;
    return best;
}

}  // namespace detail

// Pointwise-minimum update of the freespace map with one cuboid footprint:
// every bin whose wedge intersects the footprint takes the nearer of its
// stored distance and the footprint's closest radial distance in that bin.
inline RadialDistanceMap rdm_update(const RadialDistanceMap& rdm, const Cuboid3D& cuboid,
                                    const std::string& label) {
    RadialDistanceMap out = rdm;
    auto rect = cuboid_footprint(cuboid);
    auto corners = rect.corners();

    // Ego inside the footprint: the obstacle is at distance zero everywhere.
    bool all_pos = true, all_neg = true;
    for (int i = 0; i < 4; ++i) {
        Vec2 a = corners[i], b = corners[(i + 1) % 4];
        double cross = (b.x - a.x) * (0.0 - a.y) - (b.y - a.y) * (0.0 - a.x);
        if (cross < 0.0) all_pos = false;
        if (cross > 0.0) all_neg = false;
    }
    if (all_pos || all_neg) {
        for (size_t b = 0; b < out.bins(); ++b) {
            out.distances[b] = 0.0;
            out.semantics[b] = label;
        }
        return out;
    }

    double width = out.bin_width();
    for (size_t b = 0; b < out.bins(); ++b) {
        double phi0 = out.bin_start(b);
        double best = std::numeric_limits<double>::infinity();
        bool hit = false;
        for (int e = 0; e < 4; ++e) {
            auto d = detail::segment_wedge_min_distance(corners[e], corners[(e + 1) % 4],
                                                        phi0, width);
            if (d) {
                hit = true;
                best = std::min(best, *d);
            }
        }
        if (hit && best < out.distances[b]) {
            out.distances[b] = best;
            out.semantics[b] = label;
        }
    }
    return out;
}

struct ScoredCuboid {
    Cuboid3D cuboid;
    double score = 1.0;
};

struct MatchResult {
    std::vector<std::pair<int, int>> matches;  // (prediction index, gt index)
    std::vector<int> false_positives;          // prediction indices
    std::vector<int> false_negatives;          // gt indices
};

// Greedy matching by ascending relative radial error (score breaks ties).
// A pair is eligible when the relative radial distance is strictly below the
// criterion and the yaw difference is within (<=) the yaw criterion.
inline MatchResult match_cuboids(const std::vector<ScoredCuboid>& predictions,
                                 const std::vector<Cuboid3D>& ground_truth,
                                 const MatchCriteria& criteria = {}) {
    criteria.validate();
    struct Pair {
        double error;
        double score;
        int pred, gt;
    };
    std::vector<Pair> eligible;
    for (int pi = 0; pi < int(predictions.size()); ++pi) {
        for (int gi = 0; gi < int(ground_truth.size()); ++gi) {
            const Cuboid3D& p = predictions[size_t(pi)].cuboid;
            const Cuboid3D& g = ground_truth[size_t(gi)];
            if (p.class_label != g.class_label) continue;
            // std::remainder is exactly rounded, so the <= comparison is
            // exact at the 2-degree boundary.
            double dyaw = std::abs(std::remainder(p.yaw - g.yaw, 2.0 * kPi));
            if (dyaw > criteria.max_yaw_diff) continue;
            double r_gt = g.center.norm();
            double r_pred = p.center.norm();
            double rel;
            if (r_gt == 0.0) {
                // Degenerate gt at the origin: match only a near-zero prediction.
                if (r_pred >= 1e-9) continue;
                rel = 0.0;
            } else {
                rel = std::abs(r_pred - r_gt) / r_gt;
                if (rel >= criteria.max_relative_radial) continue;
            }
            eligible.push_back({rel, predictions[size_t(pi)].score, pi, gi});
        }
    }
    std::sort(eligible.begin(), eligible.end(), [](const Pair& a, const Pair& b) {
        if (a.error != b.error) return a.error < b.error;
        if (a.score != b.score) return a.score > b.score;
        if (a.pred != b.pred) return a.pred < b.pred;
        return a.gt < b.gt;
    });

    MatchResult result;
    std::vector<bool> pred_used(predictions.size(), false), gt_used(ground_truth.size(), false);
    for (const Pair& pr : eligible) {
        if (pred_used[size_t(pr.pred)] || gt_used[size_t(pr.gt)]) continue;
        pred_used[size_t(pr.pred)] = true;
        gt_used[size_t(pr.gt)] = true;
        result.matches.emplace_back(pr.pred, pr.gt);
    }
    for (int pi = 0; pi < int(predictions.size()); ++pi)
        if (!pred_used[size_t(pi)]) result.false_positives.push_back(pi);
    for (int gi = 0; gi < int(ground_truth.size()); ++gi)
        if (!gt_used[size_t(gi)]) result.false_negatives.push_back(gi);
    return result;
}

struct DetectionMetrics {
    double average_precision = 0.0;
    double fscore = 0.0;
    double position_error_m = 0.0;  // mean over true positives
    double yaw_error_deg = 0.0;     // mean over true positives
    int tp = 0, fp = 0, fn = 0;
};

// Metrics over a fixed assignment. AP integrates the interpolated
// precision envelope over all score-ordered points, so it is invariant
// under any strictly monotone rescaling of the scores.
inline DetectionMetrics detection_metrics(const MatchResult& assignment,
                                          const std::vector<ScoredCuboid>& predictions,
                                          const std::vector<Cuboid3D>& ground_truth) {
    if (ground_truth.empty())
        throw std::invalid_argument("detection_metrics: no ground truth, metrics undefined");

    DetectionMetrics m;
    m.tp = int(assignment.matches.size());
    m.fp = int(assignment.false_positives.size());
    m.fn = int(assignment.false_negatives.size());

    std::vector<bool> is_tp(predictions.size(), false);
    for (auto [pi, gi] : assignment.matches) {
        is_tp[size_t(pi)] = true;
        const Cuboid3D& p = predictions[size_t(pi)].cuboid;
        const Cuboid3D& g = ground_truth[size_t(gi)];
        m.position_error_m += (p.center - g.center).norm();
        m.yaw_error_deg += rad_to_deg(std::abs(std::remainder(p.yaw - g.yaw, 2.0 * kPi)));
    }
    if (m.tp > 0) {
        m.position_error_m /= m.tp;
        m.yaw_error_deg /= m.tp;
    }

    std::vector<int> order(predictions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return predictions[size_t(a)].score > predictions[size_t(b)].score;
    });

    size_t n_gt = ground_truth.size();
    std::vector<double> precision, recall;
    int tp_cum = 0, fp_cum = 0;
    for (int idx : order) {
        if (is_tp[size_t(idx)]) ++tp_cum; else ++fp_cum;
        precision.push_back(double(tp_cum) / double(tp_cum + fp_cum));
        recall.push_back(double(tp_cum) / double(n_gt));
    }
    // Monotone precision envelope, integrated over recall steps.
    for (int i = int(precision.size()) - 2; i >= 0; --i)
        precision[size_t(i)] = std::max(precision[size_t(i)], precision[size_t(i) + 1]);
    double prev_recall = 0.0;
    for (size_t i = 0; i < precision.size(); ++i) {
        m.average_precision += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }

    double p = predictions.empty() ? 0.0 : double(m.tp) / double(m.tp + m.fp);
    double r = double(m.tp) / double(n_gt);
    m.fscore = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    return m;
}

struct RdmMetrics {
    double abs_gap_m = 0.0;
    double rel_gap = 0.0;
    double success_rate = 0.0;  // fraction of bins with rel gap < 0.10
    double precision = 0.0;     // on the hazard bin label
    double recall = 0.0;
    int bins_evaluated = 0;
    int successes = 0;
    int hazard_tp = 0, hazard_fp = 0, hazard_fn = 0;
};

// Freespace metrics over bins whose ground-truth distance is within
// `radius_limit`. Unbounded predictions are clamped to 10x the limit so a
// missing prediction counts as a large, finite error.
inline RdmMetrics rdm_metrics(const RadialDistanceMap& pred, const RadialDistanceMap& gt,
                              double radius_limit = 10.0,
                              const std::string& hazard_label = "hazard") {
    if (pred.bins() != gt.bins())
        throw std::invalid_argument("rdm_metrics: bin count mismatch");
    RdmMetrics m;
    int& successes = m.successes;
    int& tp = m.hazard_tp;
    int& fp = m.hazard_fp;
    int& fn = m.hazard_fn;
    for (size_t b = 0; b < gt.bins(); ++b) {
        if (!(gt.distances[b] <= radius_limit)) continue;
        ++m.bins_evaluated;
        double r_gt = gt.distances[b];
        double r_pred = std::min(pred.distances[b], 10.0 * radius_limit);
        double gap = std::abs(r_pred - r_gt);
        m.abs_gap_m += gap;
        double rel = r_gt > 0.0 ? gap / r_gt : (gap > 0.0 ? 1.0 : 0.0);
        m.rel_gap += rel;
        if (rel < 0.10) ++successes;
        bool pred_hazard = pred.semantics[b] == hazard_label;
        bool gt_hazard = gt.semantics[b] == hazard_label;
        if (pred_hazard && gt_hazard) ++tp;
        if (pred_hazard && !gt_hazard) ++fp;
        if (!pred_hazard && gt_hazard) ++fn;
    }
    if (m.bins_evaluated > 0) {
        m.abs_gap_m /= m.bins_evaluated;
        m.rel_gap /= m.bins_evaluated;
        m.success_rate = double(successes) / m.bins_evaluated;
    }
    m.precision = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
    return m;
}

inline LabelSet update_existing_labels(
    const LabelSet& labels, const std::vector<AssetInstance>& instances,
    const std::vector<std::pair<std::string, const CameraModel*>>& cameras,
    const std::map<std::string, const RenderLayers*>& layers,
    const std::string& freespace_label) {
    LabelSet out = labels;
    if (instances.empty()) return out;

    // Per-camera visibility of real cuboids against the synthetic layers.
    for (const auto& [name, camera] : cameras) {
        auto lit = layers.find(name);
        if (lit == layers.end()) continue;
        const RenderLayers& layer = *lit->second;
        // Skip cameras whose object layer is empty.
        bool any_alpha = false;
        for (int y = 0; y < layer.object.height && !any_alpha; ++y)
            for (int x = 0; x < layer.object.width; ++x)
                if (layer.object.at(x, y, 3) > 0.f) {
                    any_alpha = true;
                    break;
                }
        if (!any_alpha) continue;
        for (size_t ci = 0; ci < out.cuboids.size(); ++ci) {
            Cuboid3D& cuboid = out.cuboids[ci];
            DepthBuffer silhouette(camera->width, camera->height);
            MeshAsset box = make_box(cuboid.dimensions);
            RigidTransform pose{Mat3::rotation_z(cuboid.yaw), cuboid.center};
            rasterize_mesh_depth(*camera, transformed(box, pose), silhouette);
            size_t total = 0, covered = 0;
            for (int y = 0; y < camera->height; ++y)
                for (int x = 0; x < camera->width; ++x) {
                    float d = silhouette.at(x, y);
                    if (!std::isfinite(d)) continue;
                    ++total;
                    if (layer.object.at(x, y, 3) > 0.f && layer.depth.at(x, y) < d)
                        ++covered;
                }
            if (total == 0) continue;
            double fraction = double(covered) / double(total);
            double new_vis = std::max(0.0, cuboid.visibility * (1.0 - fraction));
            // Reflect the reduction on this camera's 2D box when present.
            for (BBox2D& b : out.bboxes2d[name])
                if (b.cuboid_index == int(ci)) b.occlusion = 1.0 - new_vis;
            cuboid.visibility = new_vis;
        }
    }

    // Freespace: every synthetic instance is an obstacle.
    if (!out.freespace.distances.empty())
        for (const AssetInstance& inst : instances)
            out.freespace = rdm_update(out.freespace, synth_cuboid(inst), freespace_label);

    // Parking: a placed lock claims its spot.
    for (const AssetInstance& inst : instances) {
        if (inst.parking_spot < 0 || size_t(inst.parking_spot) >= out.parking.size())
            continue;
        ParkingSpot& spot = out.parking[size_t(inst.parking_spot)];
        bool locked = inst.class_label.find("unlocked") == std::string::npos;
        spot.lock_state = locked ? "locked" : "unlocked";
        if (locked) spot.available = false;
    }
    return out;
}

}  // namespace mvaug

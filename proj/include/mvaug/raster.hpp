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

#include <limits>
#include <vector>

#include "mvaug/geometry.hpp"
#include "mvaug/mesh.hpp"

namespace mvaug {

struct DepthBuffer {
    int width = 0;
    int height = 0;
    std::vector<float> depth;

    DepthBuffer() = default;
    DepthBuffer(int w, int h)
        : width(w), height(h),
          depth(size_t(w) * h, std::numeric_limits<float>::infinity()) {}

    float at(int x, int y) const { return depth[size_t(y) * width + x]; }
    float& at(int x, int y) { return depth[size_t(y) * width + x]; }
    void clear() {
        std::fill(depth.begin(), depth.end(), std::numeric_limits<float>::infinity());
    }
};

// Interpolated surface attributes, kept in the ego frame for shading.
struct RasterVertex {
    Vec3 position;
    Vec3 normal;
};

namespace detail {

struct RasterPoint {
    Vec3 cam;  // camera-frame position, used for projection
    RasterVertex attr;
};

inline RasterPoint midpoint(const RasterPoint& a, const RasterPoint& b) {
    return {(a.cam + b.cam) * 0.5,
            {(a.attr.position + b.attr.position) * 0.5,
             ((a.attr.normal + b.attr.normal) * 0.5).normalized()}};
}

// Fills one projected triangle with a center-inside coverage rule; depth and
// attributes interpolate linearly in screen space. Triangles reaching this
// point are at most a few pixels wide (see rasterize_triangle), which keeps
// the linear interpolation error negligible for any lens model.
template <typename Visit>
void fill_projected(const Vec2 px[3], const double depth[3], const RasterVertex v[3],
                    int width, int height, Visit&& visit) {
    double min_x = std::min({px[0].x, px[1].x, px[2].x});
    double max_x = std::max({px[0].x, px[1].x, px[2].x});
    double min_y = std::min({px[0].y, px[1].y, px[2].y});
    double max_y = std::max({px[0].y, px[1].y, px[2].y});
    int x0 = std::max(0, int(std::floor(min_x - 0.5)));
    int x1 = std::min(width - 1, int(std::ceil(max_x - 0.5)));
    int y0 = std::max(0, int(std::floor(min_y - 0.5)));
    int y1 = std::min(height - 1, int(std::ceil(max_y - 0.5)));
    if (x0 > x1 || y0 > y1) return;

    double ax = px[1].x - px[0].x, ay = px[1].y - px[0].y;
    double bx = px[2].x - px[0].x, by = px[2].y - px[0].y;
    double area = ax * by - ay * bx;
    if (area == 0.0) return;

    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            double cx = x + 0.5 - px[0].x, cy = y + 0.5 - px[0].y;
            double w1 = (cx * by - cy * bx) / area;
            double w2 = (ax * cy - ay * cx) / area;
            double w0 = 1.0 - w1 - w2;
            if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
            double d = w0 * depth[0] + w1 * depth[1] + w2 * depth[2];
            RasterVertex attr;
            attr.position = v[0].position * w0 + v[1].position * w1 + v[2].position * w2;
            attr.normal =
                (v[0].normal * w0 + v[1].normal * w1 + v[2].normal * w2).normalized();
            visit(x, y, d, attr);
        }
    }
}

template <typename Visit>
void rasterize_recursive(const CameraModel& camera, const RasterPoint& a,
                         const RasterPoint& b, const RasterPoint& c, int depth_left,
                         double max_edge_px, double px_per_rad, Visit&& visit) {
    auto pa = camera.project_camera(a.cam);
    auto pb = camera.project_camera(b.cam);
    auto pc = camera.project_camera(c.cam);
    bool all = pa && pb && pc;

    // Cells whose angular size has dropped below half the edge budget can
    // stop splitting: visibility-boundary residue finer than this is
    // sub-pixel. Without the cutoff, triangles straddling a fisheye FOV
    // boundary would subdivide to the full recursion depth.
    if (!all || depth_left <= 8) {
        double edge3d = std::max({(a.cam - b.cam).norm(), (b.cam - c.cam).norm(),
                                  (c.cam - a.cam).norm()});
        double dist = std::min({a.cam.norm(), b.cam.norm(), c.cam.norm()});
        if (dist > 0.0 && edge3d / dist * px_per_rad < 0.5 * max_edge_px) {
            if (!all) return;
            depth_left = 0;
        }
    }

    if (all) {
        double e01 = (pa->pixel - pb->pixel).norm();
        double e12 = (pb->pixel - pc->pixel).norm();
        double e20 = (pc->pixel - pa->pixel).norm();
        if (std::max({e01, e12, e20}) <= max_edge_px || depth_left == 0) {
            // Cull triangles entirely outside the image.
            double min_x = std::min({pa->pixel.x, pb->pixel.x, pc->pixel.x});
            double max_x = std::max({pa->pixel.x, pb->pixel.x, pc->pixel.x});
            double min_y = std::min({pa->pixel.y, pb->pixel.y, pc->pixel.y});
            double max_y = std::max({pa->pixel.y, pb->pixel.y, pc->pixel.y});
            if (max_x < 0 || min_x > camera.width || max_y < 0 || min_y > camera.height)
                return;
            Vec2 px[3] = {pa->pixel, pb->pixel, pc->pixel};
            double d[3] = {pa->depth, pb->depth, pc->depth};
            RasterVertex v[3] = {a.attr, b.attr, c.attr};
            fill_projected(px, d, v, camera.width, camera.height, visit);
            return;
        }
    } else if (!pa && !pb && !pc) {
        // Fully unprojectable. For pinhole (z > 0 halfspace) the projectable
        // set is convex, so dropping is exact. A fisheye cone wider than 90
        // degrees is not convex; probe the centroid and edge midpoints
        // before dropping.
        if (camera.kind == CameraKind::kFtheta && camera.theta_max > kPi / 2.0) {
            const Vec3 probes[4] = {(a.cam + b.cam + c.cam) * (1.0 / 3.0),
                                    (a.cam + b.cam) * 0.5, (b.cam + c.cam) * 0.5,
                                    (c.cam + a.cam) * 0.5};
            bool any = false;
            for (const Vec3& p : probes)
                if (camera.project_camera(p)) {
                    any = true;
                    break;
                }
            if (!any) return;
        } else {
            return;
        }
    }
    if (depth_left == 0) return;  // partially visible residue is dropped

    RasterPoint ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    rasterize_recursive(camera, a, ab, ca, depth_left - 1, max_edge_px, px_per_rad, visit);
    rasterize_recursive(camera, ab, b, bc, depth_left - 1, max_edge_px, px_per_rad, visit);
    rasterize_recursive(camera, ca, bc, c, depth_left - 1, max_edge_px, px_per_rad, visit);
    rasterize_recursive(camera, ab, bc, ca, depth_left - 1, max_edge_px, px_per_rad, visit);
}

}  // namespace detail

// Rasterizes one ego-frame triangle through any camera model by subdividing
// until projected edges are shorter than `max_edge_px` (straight-edge
// rasterization is invalid under fisheye distortion). The visitor is called
// as visit(x, y, depth, RasterVertex) for every covered pixel center.
template <typename Visit>
void rasterize_triangle(const CameraModel& camera, const RasterVertex& a,
                        const RasterVertex& b, const RasterVertex& c, Visit&& visit,
                        double max_edge_px = 2.0) {
    RigidTransform ego_to_cam = camera.extrinsics.inverse();
    detail::RasterPoint pa{ego_to_cam.apply(a.position), a};
    detail::RasterPoint pb{ego_to_cam.apply(b.position), b};
    detail::RasterPoint pc{ego_to_cam.apply(c.position), c};
    double px_per_rad = camera.kind == CameraKind::kPinhole
                            ? std::max(camera.fx, camera.fy)
                            : std::max(camera.radius_slope(0.0), 1.0);
    detail::rasterize_recursive(camera, pa, pb, pc, 16, max_edge_px, px_per_rad, visit);
}

// Subdivision limit for depth-only passes (proxies, silhouettes). Coarser
// than the shading default; the sub-pixel edge error is irrelevant for
// coverage fractions.
inline constexpr double kDepthPassMaxEdgePx = 4.0;

// Rasterizes a posed mesh into a depth buffer (nearest-surface depth only).
// Degenerate triangles are skipped; returns how many were skipped.
inline int rasterize_mesh_depth(const CameraModel& camera, const MeshAsset& mesh,
                                DepthBuffer& buffer,
                                double max_edge_px = kDepthPassMaxEdgePx) {
    int degenerate = 0;
    for (const auto& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t.v[0]];
        const Vec3& b = mesh.vertices[t.v[1]];
        const Vec3& c = mesh.vertices[t.v[2]];
        if ((b - a).cross(c - a).norm() < 1e-12) {
            ++degenerate;
            continue;
        }
        rasterize_triangle(
            camera, {a, {0, 0, 1}}, {b, {0, 0, 1}}, {c, {0, 0, 1}},
            [&buffer](int x, int y, double d, const RasterVertex&) {
                if (float(d) < buffer.at(x, y)) buffer.at(x, y) = float(d);
            },
            max_edge_px);
    }
    return degenerate;
}

// Depth proxies: existing scene cuboids rasterized as boxes.
inline DepthBuffer rasterize_cuboid_proxies(const CameraModel& camera,
                                            const std::vector<Cuboid3D>& cuboids) {
    DepthBuffer buffer(camera.width, camera.height);
    for (const auto& c : cuboids) {
        MeshAsset box = make_box(c.dimensions);
        RigidTransform pose{Mat3::rotation_z(c.yaw), c.center};
        rasterize_mesh_depth(camera, transformed(box, pose), buffer);
    }
    return buffer;
}

}  // namespace mvaug

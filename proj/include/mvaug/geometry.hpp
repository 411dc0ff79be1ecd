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

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvaug/math.hpp"

// Coordinate conventions used throughout:
//   ego frame:    x forward, y left, z up (meters)
//   camera frame: z forward (optical axis), x right, y down
//   pixels:       continuous coordinates, pixel (i, j) covers [i,i+1)x[j,j+1)

namespace mvaug {

// Rigid motion: p_out = rotation * p_in + translation.
struct RigidTransform {
    Mat3 rotation;
    Vec3 translation;

    static RigidTransform identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    Vec3 apply_dir(const Vec3& d) const { return rotation * d; }

    RigidTransform inverse() const {
        Mat3 rt = rotation.transposed();
        return {rt, -(rt * translation)};
    }

    RigidTransform compose(const RigidTransform& inner) const {
        // (*this) after `inner`: p -> this(inner(p)).
        return {rotation * inner.rotation, rotation * inner.translation + translation};
    }

    void validate(double tol = 1e-9) const {
        if (rotation.orthonormal_error() > tol)
            throw std::invalid_argument("RigidTransform: rotation not orthonormal");
        if (std::abs(rotation.determinant() - 1.0) > tol)
            throw std::invalid_argument("RigidTransform: rotation determinant != +1");
        if (!translation.finite())
            throw std::invalid_argument("RigidTransform: non-finite translation");
    }
};

// Camera-to-ego rotation for a camera whose optical axis points along
// `forward` (ego frame) with image "up" aligned against `up`. Columns are
// the camera axes (x right, y down, z forward) expressed in the ego frame.
inline Mat3 look_rotation(const Vec3& forward, const Vec3& up = {0, 0, 1}) {
    Vec3 z = forward.normalized();
    Vec3 x = z.cross(up);
    if (x.norm() < 1e-12) x = z.cross(Vec3{1, 0, 0});
    x = x.normalized();
    Vec3 y = z.cross(x);
    Mat3 r;
    r(0, 0) = x.x; r(1, 0) = x.y; r(2, 0) = x.z;
    r(0, 1) = y.x; r(1, 1) = y.y; r(2, 1) = y.z;
    r(0, 2) = z.x; r(1, 2) = z.y; r(2, 2) = z.z;
    return r;
}

enum class CameraKind { kPinhole, kFtheta };

struct PixelDepth {
    Vec2 pixel;
    double depth = 0.0;  // meters; optical-axis z (pinhole) or euclidean (ftheta)
};

// Pinhole or f-theta fisheye camera. For f-theta the image radius is
// r(theta) = sum_i k_i * theta^i with k_0 = 0, valid on [0, theta_max].
struct CameraModel {
    CameraKind kind = CameraKind::kPinhole;
    int width = 0;
    int height = 0;
    Vec2 principal_point;
    double fx = 0.0;  // pinhole only
    double fy = 0.0;
    std::vector<double> ftheta_coeffs;  // k1..kN, ftheta only
    double theta_max = 0.0;             // radians, ftheta only
    RigidTransform extrinsics;          // camera -> ego

    double radius_of_theta(double theta) const {
        double r = 0.0, p = theta;
        for (double k : ftheta_coeffs) {
            r += k * p;
            p *= theta;
        }
        return r;
    }

    double radius_slope(double theta) const {
        double s = 0.0, p = 1.0;
        for (size_t i = 0; i < ftheta_coeffs.size(); ++i) {
            s += double(i + 1) * ftheta_coeffs[i] * p;
            p *= theta;
        }
        return s;
    }

    // Inverts r(theta) with bracketed Newton iteration; falls back to
    // bisection whenever a step would leave the bracket.
    std::optional<double> theta_of_radius(double r) const {
        if (r < 0.0) return std::nullopt;
        if (r == 0.0) return 0.0;
        double r_max = radius_of_theta(theta_max);
        if (r > r_max * (1.0 + 1e-12)) return std::nullopt;
        double lo = 0.0, hi = theta_max;
        double theta = std::min(theta_max, r / std::max(ftheta_coeffs.empty() ? 1.0 : ftheta_coeffs[0], 1e-12));
        for (int it = 0; it < 64; ++it) {
            double f = radius_of_theta(theta) - r;
            if (f > 0.0) hi = theta; else lo = theta;
            double slope = radius_slope(theta);
            double next = slope > 0.0 ? theta - f / slope : -1.0;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - theta) < 1e-10) { theta = next; break; }
            theta = next;
        }
        return theta;
    }

    void validate() const {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("CameraModel: resolution must be positive");
        extrinsics.validate(1e-6);
        if (kind == CameraKind::kPinhole) {
            if (fx <= 0.0 || fy <= 0.0)
                throw std::invalid_argument("CameraModel: focal lengths must be positive");
        } else {
            if (ftheta_coeffs.empty())
                throw std::invalid_argument("CameraModel: ftheta needs coefficients");
            if (theta_max <= 0.0 || theta_max > kPi)
                throw std::invalid_argument("CameraModel: theta_max must be in (0, pi]");
            // r(theta) must be strictly increasing over the working range.
            const int steps = 256;
            double prev = 0.0;
            for (int i = 1; i <= steps; ++i) {
                double t = theta_max * double(i) / steps;
                double r = radius_of_theta(t);
                if (r <= prev || radius_slope(t) <= 0.0)
                    throw std::invalid_argument(
                        "CameraModel: r(theta) not strictly increasing on [0, theta_max]");
                prev = r;
            }
        }
    }

    Vec3 position() const { return extrinsics.translation; }
    Vec3 optical_axis() const { return extrinsics.apply_dir({0, 0, 1}); }

    // Projects a camera-frame point.
    std::optional<PixelDepth> project_camera(const Vec3& pc) const {
        if (kind == CameraKind::kPinhole) {
            if (pc.z <= 0.0) return std::nullopt;
            return PixelDepth{{fx * pc.x / pc.z + principal_point.x,
                               fy * pc.y / pc.z + principal_point.y},
                              pc.z};
        }
        double rho = std::sqrt(pc.x * pc.x + pc.y * pc.y);
        double theta = std::atan2(rho, pc.z);
        if (theta > theta_max) return std::nullopt;
        double depth = pc.norm();
        if (depth == 0.0) return std::nullopt;
        if (rho == 0.0) return PixelDepth{principal_point, depth};
        double r = radius_of_theta(theta);
        return PixelDepth{{principal_point.x + r * pc.x / rho,
                           principal_point.y + r * pc.y / rho},
                          depth};
    }

    // Projects an ego-frame point. Returns nullopt when the point cannot be
    // seen (behind a pinhole camera, or beyond theta_max for ftheta); the
    // pixel may still lie outside the image bounds.
    std::optional<PixelDepth> project(const Vec3& p_ego) const {
        return project_camera(extrinsics.inverse().apply(p_ego));
    }

    // Projects an ego-frame viewing direction, ignoring the camera position
    // (scene-at-infinity model used for panorama stitching).
    std::optional<Vec2> project_direction(const Vec3& dir_ego) const {
        auto pd = project_camera(extrinsics.rotation.transposed() * dir_ego);
        if (!pd) return std::nullopt;
        return pd->pixel;
    }

    // Camera-frame unit ray through a pixel.
    std::optional<Vec3> unproject_camera(const Vec2& pixel) const {
        if (kind == CameraKind::kPinhole) {
            Vec3 d{(pixel.x - principal_point.x) / fx,
                   (pixel.y - principal_point.y) / fy, 1.0};
            return d.normalized();
        }
        double dx = pixel.x - principal_point.x;
        double dy = pixel.y - principal_point.y;
        double r = std::sqrt(dx * dx + dy * dy);
        auto theta = theta_of_radius(r);
        if (!theta) return std::nullopt;
        if (r == 0.0) return Vec3{0, 0, 1};
        double st = std::sin(*theta), ct = std::cos(*theta);
        return Vec3{st * dx / r, st * dy / r, ct};
    }

    // Ego-frame unit ray through a pixel; nullopt if the pixel radius is
    // outside the invertible f-theta range.
    std::optional<Vec3> unproject(const Vec2& pixel) const {
        auto d = unproject_camera(pixel);
        if (!d) return std::nullopt;
        return extrinsics.apply_dir(*d);
    }

    bool pixel_in_bounds(const Vec2& p) const {
        return p.x >= 0.0 && p.y >= 0.0 && p.x <= double(width) && p.y <= double(height);
    }

    // True when an ego-frame direction lands inside the image.
    bool sees_direction(const Vec3& dir_ego) const {
        auto px = project_direction(dir_ego);
        return px && pixel_in_bounds(*px);
    }
};

// Yaw-oriented 3D bounding box in the ego frame.
struct Cuboid3D {
    Vec3 center;
    Vec3 dimensions;  // length (x at yaw 0), width (y), height (z)
    double yaw = 0.0;
    std::string class_label;
    double visibility = 1.0;

    void validate() const {
        if (dimensions.x <= 0.0 || dimensions.y <= 0.0 || dimensions.z <= 0.0)
            throw std::invalid_argument("Cuboid3D: dimensions must be positive");
    }
};

// Corner order: bit 0 -> +x/-x, bit 1 -> +y/-y, bit 2 -> +z/-z in the
// cuboid's local (yaw-aligned) frame.
inline std::array<Vec3, 8> cuboid_corners(const Cuboid3D& c) {
    Mat3 rot = Mat3::rotation_z(c.yaw);
    Vec3 h = c.dimensions * 0.5;
    std::array<Vec3, 8> out;
    for (int i = 0; i < 8; ++i) {
        Vec3 local{(i & 1) ? h.x : -h.x, (i & 2) ? h.y : -h.y, (i & 4) ? h.z : -h.z};
        out[i] = c.center + rot * local;
    }
    return out;
}

// Oriented rectangle on the ground plane (z = 0 projection of a footprint).
struct OrientedRect {
    Vec2 center;
    Vec2 half_extents;  // along the rect's local x/y axes
    double yaw = 0.0;

    std::array<Vec2, 4> corners() const {
        double c = std::cos(yaw), s = std::sin(yaw);
        std::array<Vec2, 4> out;
        const double sx[4] = {1, 1, -1, -1};
        const double sy[4] = {1, -1, -1, 1};
        for (int i = 0; i < 4; ++i) {
            double lx = sx[i] * half_extents.x, ly = sy[i] * half_extents.y;
            out[i] = {center.x + c * lx - s * ly, center.y + s * lx + c * ly};
        }
        return out;
    }
};

inline OrientedRect cuboid_footprint(const Cuboid3D& c) {
    return {{c.center.x, c.center.y}, {c.dimensions.x * 0.5, c.dimensions.y * 0.5}, c.yaw};
}

}  // namespace mvaug

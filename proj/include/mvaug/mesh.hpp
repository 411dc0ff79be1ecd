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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvaug/geometry.hpp"

namespace mvaug {

// Triangle mesh in its local frame with per-vertex normals and per-triangle
// diffuse albedo.
struct MeshAsset {
    struct Triangle {
        int v[3];
        Vec3 albedo{0.7, 0.7, 0.7};
    };

    std::vector<Vec3> vertices;
    std::vector<Vec3> normals;  // one per vertex, unit length
    std::vector<Triangle> triangles;
    Vec3 bbox_min, bbox_max;

    void compute_bbox() {
        const double inf = std::numeric_limits<double>::infinity();
        bbox_min = {inf, inf, inf};
        bbox_max = {-inf, -inf, -inf};
        for (const Vec3& v : vertices) {
            bbox_min = {std::min(bbox_min.x, v.x), std::min(bbox_min.y, v.y),
                        std::min(bbox_min.z, v.z)};
            bbox_max = {std::max(bbox_max.x, v.x), std::max(bbox_max.y, v.y),
                        std::max(bbox_max.z, v.z)};
        }
    }

    void validate() const {
        for (const auto& t : triangles)
            for (int i = 0; i < 3; ++i)
                if (t.v[i] < 0 || size_t(t.v[i]) >= vertices.size())
                    throw std::invalid_argument("MeshAsset: triangle index out of range");
        for (const Vec3& n : normals)
            if (std::abs(n.norm() - 1.0) > 1e-6)
                throw std::invalid_argument("MeshAsset: normals must be unit length");
        if (normals.size() != vertices.size())
            throw std::invalid_argument("MeshAsset: one normal per vertex required");
    }
};

// Mesh posed into the ego frame; normals are rotated only.
inline MeshAsset transformed(const MeshAsset& mesh, const RigidTransform& pose) {
    MeshAsset out = mesh;
    for (auto& v : out.vertices) v = pose.apply(v);
    for (auto& n : out.normals) n = pose.apply_dir(n);
    out.compute_bbox();
    return out;
}

namespace detail {

inline void add_quad(MeshAsset& m, const Vec3& a, const Vec3& b, const Vec3& c,
                     const Vec3& d, const Vec3& n, const Vec3& albedo) {
    int base = int(m.vertices.size());
    for (const Vec3& p : {a, b, c, d}) {
        m.vertices.push_back(p);
        m.normals.push_back(n);
    }
    m.triangles.push_back({{base, base + 1, base + 2}, albedo});
    m.triangles.push_back({{base, base + 2, base + 3}, albedo});
}

}  // namespace detail

// Axis-aligned box centered on the origin (flat-shaded, 12 triangles).
inline MeshAsset make_box(const Vec3& dimensions, const Vec3& albedo = {0.7, 0.7, 0.7}) {
    Vec3 h = dimensions * 0.5;
    MeshAsset m;
    detail::add_quad(m, {h.x, -h.y, -h.z}, {h.x, h.y, -h.z}, {h.x, h.y, h.z},
                     {h.x, -h.y, h.z}, {1, 0, 0}, albedo);
    detail::add_quad(m, {-h.x, h.y, -h.z}, {-h.x, -h.y, -h.z}, {-h.x, -h.y, h.z},
                     {-h.x, h.y, h.z}, {-1, 0, 0}, albedo);
    detail::add_quad(m, {h.x, h.y, -h.z}, {-h.x, h.y, -h.z}, {-h.x, h.y, h.z},
                     {h.x, h.y, h.z}, {0, 1, 0}, albedo);
    detail::add_quad(m, {-h.x, -h.y, -h.z}, {h.x, -h.y, -h.z}, {h.x, -h.y, h.z},
                     {-h.x, -h.y, h.z}, {0, -1, 0}, albedo);
    detail::add_quad(m, {-h.x, -h.y, h.z}, {h.x, -h.y, h.z}, {h.x, h.y, h.z},
                     {-h.x, h.y, h.z}, {0, 0, 1}, albedo);
    detail::add_quad(m, {-h.x, h.y, -h.z}, {h.x, h.y, -h.z}, {h.x, -h.y, -h.z},
                     {-h.x, -h.y, -h.z}, {0, 0, -1}, albedo);
    m.compute_bbox();
    return m;
}

// Latitude-longitude sphere with smooth normals, centered on the origin.
inline MeshAsset make_sphere(double radius, const Vec3& albedo = {0.7, 0.7, 0.7},
                             int stacks = 24, int slices = 48) {
    MeshAsset m;
    for (int i = 0; i <= stacks; ++i) {
        double phi = kPi * double(i) / stacks;  // 0 at +z pole
        for (int j = 0; j <= slices; ++j) {
            double theta = 2.0 * kPi * double(j) / slices;
            Vec3 n{std::sin(phi) * std::cos(theta), std::sin(phi) * std::sin(theta),
                   std::cos(phi)};
            m.vertices.push_back(n * radius);
            m.normals.push_back(n);
        }
    }
    auto idx = [&](int i, int j) { return i * (slices + 1) + j; };
    for (int i = 0; i < stacks; ++i)
        for (int j = 0; j < slices; ++j) {
            m.triangles.push_back({{idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)}, albedo});
            m.triangles.push_back({{idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)}, albedo});
        }
    m.compute_bbox();
    return m;
}

// Minimal Wavefront OBJ loader: v/vn/f records plus per-material diffuse
// color (Kd) from a sibling .mtl. Faces are fan-triangulated; when the file
// carries no normals, area-weighted vertex normals are computed.
inline MeshAsset load_obj(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_obj: cannot open " + path.string());

    std::vector<Vec3> positions, file_normals;
    std::map<std::string, Vec3> materials;
    Vec3 current_albedo{0.7, 0.7, 0.7};
    MeshAsset mesh;
    // Vertices are split per (position, normal) pair.
    std::map<std::pair<int, int>, int> vertex_cache;
    bool any_normals = false;

    auto resolve = [&](int pi, int ni) {
        auto key = std::make_pair(pi, ni);
        auto it = vertex_cache.find(key);
        if (it != vertex_cache.end()) return it->second;
        int id = int(mesh.vertices.size());
        mesh.vertices.push_back(positions.at(size_t(pi)));
        mesh.normals.push_back(ni >= 0 ? file_normals.at(size_t(ni)) : Vec3{0, 0, 1});
        vertex_cache.emplace(key, id);
        return id;
    };

    std::string line;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 p;
            ss >> p.x >> p.y >> p.z;
            positions.push_back(p);
        } else if (tag == "vn") {
            Vec3 n;
            ss >> n.x >> n.y >> n.z;
            file_normals.push_back(n.normalized());
        } else if (tag == "mtllib") {
            std::string name;
            ss >> name;
            std::ifstream mf(path.parent_path() / name);
            std::string mline, mtl;
            while (mf && std::getline(mf, mline)) {
                std::istringstream ms(mline);
                std::string mtag;
                ms >> mtag;
                if (mtag == "newmtl") {
                    ms >> mtl;
                } else if (mtag == "Kd" && !mtl.empty()) {
                    Vec3 kd;
                    ms >> kd.x >> kd.y >> kd.z;
                    materials[mtl] = kd;
                }
            }
        } else if (tag == "usemtl") {
            std::string name;
            ss >> name;
            auto it = materials.find(name);
            if (it != materials.end()) current_albedo = it->second;
        } else if (tag == "f") {
            std::vector<int> face;
            std::string vert;
            while (ss >> vert) {
                int pi = 0, ni = -1;
                size_t s1 = vert.find('/');
                pi = std::stoi(vert.substr(0, s1)) - 1;
                if (s1 != std::string::npos) {
                    size_t s2 = vert.find('/', s1 + 1);
                    if (s2 != std::string::npos && s2 + 1 < vert.size())
                        ni = std::stoi(vert.substr(s2 + 1)) - 1;
                }
                if (ni >= 0) any_normals = true;
                face.push_back(resolve(pi, ni));
            }
            for (size_t i = 2; i < face.size(); ++i)
                mesh.triangles.push_back({{face[0], int(face[i - 1]), int(face[i])},
                                          current_albedo});
        }
    }

    if (!any_normals) {
        std::vector<Vec3> acc(mesh.vertices.size());
        for (const auto& t : mesh.triangles) {
            Vec3 n = (mesh.vertices[t.v[1]] - mesh.vertices[t.v[0]])
                         .cross(mesh.vertices[t.v[2]] - mesh.vertices[t.v[0]]);
            for (int i = 0; i < 3; ++i) acc[t.v[i]] += n;
        }
        for (size_t i = 0; i < acc.size(); ++i)
            mesh.normals[i] = acc[i].norm() > 0 ? acc[i].normalized() : Vec3{0, 0, 1};
    }
    mesh.compute_bbox();
    mesh.validate();
    return mesh;
}

inline void save_obj(const std::filesystem::path& path, const MeshAsset& mesh,
                     const std::string& material_name = "default") {
    std::filesystem::path mtl_path = path;
    mtl_path.replace_extension(".mtl");
    {
        std::ofstream mf(mtl_path);
        if (!mf) throw std::runtime_error("save_obj: cannot write " + mtl_path.string());
        Vec3 kd = mesh.triangles.empty() ? Vec3{0.7, 0.7, 0.7} : mesh.triangles[0].albedo;
        mf << "newmtl " << material_name << "\n";
        mf << "Kd " << kd.x << " " << kd.y << " " << kd.z << "\n";
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_obj: cannot write " + path.string());
    f << "mtllib " << mtl_path.filename().string() << "\n";
    f << "usemtl " << material_name << "\n";
    for (const Vec3& v : mesh.vertices) f << "v " << v.x << " " << v.y << " " << v.z << "\n";
    for (const Vec3& n : mesh.normals) f << "vn " << n.x << " " << n.y << " " << n.z << "\n";
    for (const auto& t : mesh.triangles)
        f << "f " << t.v[0] + 1 << "//" << t.v[0] + 1 << " " << t.v[1] + 1 << "//"
          << t.v[1] + 1 << " " << t.v[2] + 1 << "//" << t.v[2] + 1 << "\n";
}

// Moeller-Trumbore ray/triangle test; returns the hit distance.
inline std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir,
                                          const Vec3& a, const Vec3& b, const Vec3& c) {
    constexpr double eps = 1e-12;
    Vec3 e1 = b - a, e2 = c - a;
    Vec3 p = dir.cross(e2);
    double det = e1.dot(p);
    if (std::abs(det) < eps) return std::nullopt;
    double inv = 1.0 / det;
    Vec3 t = origin - a;
    double u = t.dot(p) * inv;
    if (u < 0.0 || u > 1.0) return std::nullopt;
    Vec3 q = t.cross(e1);
    double v = dir.dot(q) * inv;
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    double dist = e2.dot(q) * inv;
    if (dist <= eps) return std::nullopt;
    return dist;
}

// Slab test against an axis-aligned box; true if the ray enters for t > 0.
inline bool ray_aabb(const Vec3& origin, const Vec3& dir, const Vec3& lo, const Vec3& hi) {
    double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
    const double o[3] = {origin.x, origin.y, origin.z};
    const double d[3] = {dir.x, dir.y, dir.z};
    const double l[3] = {lo.x, lo.y, lo.z};
    const double h[3] = {hi.x, hi.y, hi.z};
    for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) < 1e-15) {
            if (o[i] < l[i] || o[i] > h[i]) return false;
            continue;
        }
        double t0 = (l[i] - o[i]) / d[i];
        double t1 = (h[i] - o[i]) / d[i];
        if (t0 > t1) std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
        if (tmin > tmax) return false;
    }
    return true;
}

// First hit of a ray against a posed mesh (bbox test, then triangles).
inline std::optional<double> ray_mesh(const Vec3& origin, const Vec3& dir,
                                      const MeshAsset& mesh) {
    if (!ray_aabb(origin, dir, mesh.bbox_min, mesh.bbox_max)) return std::nullopt;
    std::optional<double> best;
    for (const auto& t : mesh.triangles) {
        auto hit = ray_triangle(origin, dir, mesh.vertices[t.v[0]], mesh.vertices[t.v[1]],
                                mesh.vertices[t.v[2]]);
        if (hit && (!best || *hit < *best)) best = hit;
    }
    return best;
}

}  // namespace mvaug

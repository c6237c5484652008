#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "fmr/mesh.hpp"

namespace fmr {

// Unit icosahedron-based sphere, 10*4^subdivisions + 2 vertices.
inline TriangleMesh make_icosphere(int subdivisions) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    TriangleMesh mesh;
    mesh.vertices = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                  {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                  {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                  {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (auto& v : mesh.vertices) v.normalize();

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            int idx = mesh.n();
            mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
            midpoint[key] = idx;
            return idx;
        };
        std::vector<std::array<int, 3>> faces;
        faces.reserve(mesh.faces.size() * 4);
        for (const auto& f : mesh.faces) {
            int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            faces.push_back({f[0], ab, ca});
            faces.push_back({f[1], bc, ab});
            faces.push_back({f[2], ca, bc});
            faces.push_back({ab, bc, ca});
        }
        mesh.faces = std::move(faces);
    }
    return mesh;
}

// Geodesic sphere at arbitrary frequency: each icosahedron face is split into
// freq^2 triangles on a barycentric lattice, giving 10*freq^2 + 2 vertices
// (freq 7 -> 492, the ~500-vertex sphere used throughout the tests).
inline TriangleMesh make_geodesic_sphere(int freq) {
    if (freq < 1) throw ValidationError("make_geodesic_sphere: frequency must be >= 1");
    TriangleMesh ico = make_icosphere(0);
    TriangleMesh out;
    std::map<std::array<long long, 3>, int> cache; // quantized position -> index
    auto vertex_at = [&](const Eigen::Vector3d& p) {
        Eigen::Vector3d q = p.normalized();
        std::array<long long, 3> key{llround(q[0] * 1e12), llround(q[1] * 1e12),
                                     llround(q[2] * 1e12)};
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        out.vertices.push_back(q);
        cache[key] = out.n() - 1;
        return out.n() - 1;
    };
    for (const auto& f : ico.faces) {
        const Eigen::Vector3d &a = ico.vertices[f[0]], &b = ico.vertices[f[1]],
                              &c = ico.vertices[f[2]];
        auto lattice = [&](int i, int j) {
            return Eigen::Vector3d((a * double(freq - i - j) + b * double(i) + c * double(j)) /
                                   freq);
        };
        for (int i = 0; i < freq; ++i)
            for (int j = 0; j < freq - i; ++j) {
                int v00 = vertex_at(lattice(i, j));
                int v10 = vertex_at(lattice(i + 1, j));
                int v01 = vertex_at(lattice(i, j + 1));
                out.faces.push_back({v00, v10, v01});
                if (i + j < freq - 1)
                    out.faces.push_back({v10, vertex_at(lattice(i + 1, j + 1)), v01});
            }
    }
    return out;
}

// Latitude/longitude sphere with rings*segments + 2 vertices; arbitrary sizes.
inline TriangleMesh make_uv_sphere(int rings, int segments) {
    TriangleMesh mesh;
    mesh.vertices.emplace_back(0, 0, 1); // north pole
    for (int r = 1; r <= rings; ++r) {
        double theta = M_PI * r / (rings + 1);
        for (int s = 0; s < segments; ++s) {
            double p = 2.0 * M_PI * s / segments;
            mesh.vertices.emplace_back(std::sin(theta) * std::cos(p),
                                       std::sin(theta) * std::sin(p), std::cos(theta));
        }
    }
    int south = mesh.n();
    mesh.vertices.emplace_back(0, 0, -1);

    auto ring_vertex = [&](int r, int s) { return 1 + r * segments + (s % segments); };
    for (int s = 0; s < segments; ++s)
        mesh.faces.push_back({0, ring_vertex(0, s), ring_vertex(0, s + 1)});
    for (int r = 0; r + 1 < rings; ++r)
        for (int s = 0; s < segments; ++s) {
            int a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
            int c = ring_vertex(r + 1, s), d = ring_vertex(r + 1, s + 1);
            mesh.faces.push_back({a, c, d});
            mesh.faces.push_back({a, d, b});
        }
    for (int s = 0; s < segments; ++s)
        mesh.faces.push_back({south, ring_vertex(rings - 1, s + 1), ring_vertex(rings - 1, s)});
    return mesh;
}

// Flat unit square, nx*ny vertices, optional z jitter for irregular test meshes.
inline TriangleMesh make_grid(int nx, int ny, double jitter = 0.0, unsigned seed = 0) {
    TriangleMesh mesh;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            mesh.vertices.emplace_back(double(i) / (nx - 1), double(j) / (ny - 1),
                                       jitter != 0.0 ? jitter * u(rng) : 0.0);
    auto at = [&](int i, int j) { return j * nx + i; };
    for (int j = 0; j + 1 < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            mesh.faces.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
            mesh.faces.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
        }
    return mesh;
}

// Two-row strip of quads over the given x coordinates; the bottom chain
// (vertices 0..len-1) realizes a path graph with edge lengths = dx steps.
inline TriangleMesh make_strip(const std::vector<double>& xs, double height = 1.0) {
    TriangleMesh mesh;
    const int len = static_cast<int>(xs.size());
    for (double x : xs) mesh.vertices.emplace_back(x, 0.0, 0.0);
    for (double x : xs) mesh.vertices.emplace_back(x, height, 0.0);
    for (int i = 0; i + 1 < len; ++i) {
        mesh.faces.push_back({i, i + 1, len + i + 1});
        mesh.faces.push_back({i, len + i + 1, len + i});
    }
    return mesh;
}

// Seeded random vertex permutation of a mesh: an exact discrete isometry.
// Returns the permuted mesh and the ground-truth assignment (source vertex i
// maps to target vertex truth[i]).
inline std::pair<TriangleMesh, std::vector<int>> permuted_isometry(const TriangleMesh& mesh,
                                                                   unsigned seed) {
    const int n = mesh.n();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    TriangleMesh out;
    out.vertices.resize(n);
    for (int i = 0; i < n; ++i) out.vertices[perm[i]] = mesh.vertices[i];
    out.faces.reserve(mesh.faces.size());
    for (const auto& f : mesh.faces)
        out.faces.push_back({perm[f[0]], perm[f[1]], perm[f[2]]});
    return {std::move(out), std::move(perm)};
}

// Smooth radial scaling v' = c + (v - c) * (1 + magnitude * s(v)) for a seeded
// low-frequency field s with |s| <= 1; ground truth is the identity map.
inline TriangleMesh radial_deformation(const TriangleMesh& mesh, double magnitude,
                                       unsigned seed) {
    if (magnitude < 0) throw ValidationError("radial_deformation: magnitude must be >= 0");
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& v : mesh.vertices) centroid += v;
    centroid /= mesh.n();
    double radius = 0.0;
    for (const auto& v : mesh.vertices) radius = std::max(radius, (v - centroid).norm());

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::Vector3d dir(g(rng), g(rng), g(rng));
    dir.normalize();
    std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
    double phase = u(rng);
    double freq = M_PI / std::max(radius, 1e-300);

    TriangleMesh out = mesh;
    for (auto& v : out.vertices) {
        double s = std::sin(freq * dir.dot(v - centroid) + phase);
        v = centroid + (v - centroid) * (1.0 + magnitude * s);
    }
    return out;
}

} // namespace fmr

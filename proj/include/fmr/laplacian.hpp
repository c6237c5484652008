#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <vector>

#include "fmr/mesh.hpp"

namespace fmr {

// Cotangent stiffness (positive semi-definite, zero row sums) paired with the
// barycentric lumped mass diagonal (one third of incident face areas).
struct LaplacianPair {
    Eigen::SparseMatrix<double> stiffness; // n x n
    Eigen::VectorXd mass;                  // diagonal, units of squared length
};

inline LaplacianPair build_laplacian(const TriangleMesh& mesh) {
    const int n = mesh.n();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(mesh.faces.size() * 12);
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(n);

    for (int f = 0; f < mesh.face_count(); ++f) {
        const auto& t = mesh.faces[f];
        double area = face_area(mesh, f);
        for (int c = 0; c < 3; ++c) mass[t[c]] += area / 3.0;

        for (int c = 0; c < 3; ++c) {
            // cotangent at corner c, opposing edge (c+1, c+2)
            int i = t[c], a = t[(c + 1) % 3], b = t[(c + 2) % 3];
            Eigen::Vector3d u = mesh.vertices[a] - mesh.vertices[i];
            Eigen::Vector3d v = mesh.vertices[b] - mesh.vertices[i];
            double cot = u.dot(v) / u.cross(v).norm();
            if (std::abs(cot) > 1e8)
                throw NumericalError("face " + std::to_string(f) +
                                     ": near-degenerate triangle (|cot| > 1e8)");
            double w = 0.5 * cot;
            triplets.emplace_back(a, b, -w);
            triplets.emplace_back(b, a, -w);
            triplets.emplace_back(a, a, w);
            triplets.emplace_back(b, b, w);
        }
    }

    LaplacianPair lap;
    lap.stiffness.resize(n, n);
    lap.stiffness.setFromTriplets(triplets.begin(), triplets.end());
    lap.mass = std::move(mass);
    return lap;
}

} // namespace fmr

#pragma once

#include <Eigen/Dense>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "fmr/spectral.hpp"

namespace fmr {

// Vertex-to-vertex assignment: one target image per source vertex. A
// permutation additionally covers every target exactly once. The assignment
// array is the only representation ever used; the n x n matrix P is never
// materialized.
struct PointMap {
    enum class Kind { Permutation, LeftStochastic };

    std::vector<int> assignment;
    Kind kind = Kind::LeftStochastic;

    int size() const { return static_cast<int>(assignment.size()); }
    int operator()(int source) const { return assignment[source]; }
};

inline PointMap identity_pointmap(int n) {
    PointMap map;
    map.kind = PointMap::Kind::Permutation;
    map.assignment.resize(n);
    for (int i = 0; i < n; ++i) map.assignment[i] = i;
    return map;
}

inline void validate_pointmap(const PointMap& map, int n_target) {
    for (int i = 0; i < map.size(); ++i)
        if (map(i) < 0 || map(i) >= n_target)
            throw ValidationError("point map: image " + std::to_string(map(i)) +
                                  " of vertex " + std::to_string(i) + " out of range");
    if (map.kind == PointMap::Kind::Permutation) {
        if (map.size() != n_target)
            throw ValidationError("permutation map requires equal vertex counts");
        std::vector<char> hit(n_target, 0);
        for (int i = 0; i < map.size(); ++i) {
            if (hit[map(i)])
                throw ValidationError("permutation map: target " + std::to_string(map(i)) +
                                      " covered twice");
            hit[map(i)] = 1;
        }
    }
}

// The k_N x k_M matrix C mapping source-basis coefficients to target-basis
// coefficients, together with the bases it is expressed in.
struct FunctionalMap {
    Eigen::MatrixXd matrix;
    std::shared_ptr<const SpectralBasis> source_basis;
    std::shared_ptr<const SpectralBasis> target_basis;

    int k_source() const { return static_cast<int>(matrix.cols()); }
    int k_target() const { return static_cast<int>(matrix.rows()); }
};

// C = Psi^+ P Phi, computed by gathering adjoint columns of the target basis
// at the image vertices (no dense P).
inline FunctionalMap fmap_from_pointmap(const PointMap& map,
                                        std::shared_ptr<const SpectralBasis> source_basis,
                                        std::shared_ptr<const SpectralBasis> target_basis) {
    if (source_basis->mode != target_basis->mode)
        throw ValidationError("fmap_from_pointmap: bases use different inner-product modes");
    if (map.size() != source_basis->n())
        throw ValidationError("fmap_from_pointmap: map length != source vertex count");
    validate_pointmap(map, target_basis->n());

    const int n_m = source_basis->n();
    const int k_n = target_basis->k();
    Eigen::MatrixXd gathered(k_n, n_m); // column x = Psi^+ column at T(x)
    for (int x = 0; x < n_m; ++x) gathered.col(x) = target_basis->adjoint_column(map(x));

    FunctionalMap fmap;
    fmap.matrix = gathered * source_basis->functions;
    fmap.source_basis = std::move(source_basis);
    fmap.target_basis = std::move(target_basis);
    return fmap;
}

// C = argmin ||C A - B||_F^2 + ridge ||C||_F^2 via normal equations,
// A holding source-side coefficient columns and B the target-side ones.
inline FunctionalMap fmap_from_constraints(const Eigen::MatrixXd& coeffs_source,
                                           const Eigen::MatrixXd& coeffs_target,
                                           double ridge,
                                           std::shared_ptr<const SpectralBasis> source_basis,
                                           std::shared_ptr<const SpectralBasis> target_basis) {
    if (coeffs_source.cols() != coeffs_target.cols() || coeffs_source.cols() < 1)
        throw ValidationError("fmap_from_constraints: A and B need matching column counts >= 1");
    if (ridge < 0) throw ValidationError("fmap_from_constraints: ridge must be >= 0");
    if (!coeffs_source.allFinite() || !coeffs_target.allFinite())
        throw ValidationError("fmap_from_constraints: non-finite constraint coefficients");

    const int k_m = static_cast<int>(coeffs_source.rows());
    Eigen::MatrixXd gram = coeffs_source * coeffs_source.transpose();
    if (ridge == 0.0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        if (es.eigenvalues()[0] <= 1e-12 * std::max(es.eigenvalues()[k_m - 1], 1e-300))
            throw NumericalError(
                "fmap_from_constraints: A A^T is rank-deficient; use a positive ridge");
    }
    gram += ridge * Eigen::MatrixXd::Identity(k_m, k_m);

    FunctionalMap fmap;
    Eigen::LDLT<Eigen::MatrixXd> solver(gram);
    fmap.matrix = solver.solve((coeffs_target * coeffs_source.transpose()).transpose()).transpose();
    fmap.source_basis = std::move(source_basis);
    fmap.target_basis = std::move(target_basis);
    return fmap;
}

// Coefficients of the discrete delta at `vertex` under the basis adjoint;
// functions * coefficients is the rank-k smoothed indicator.
inline Eigen::VectorXd delta_coefficients(const SpectralBasis& basis, int vertex) {
    if (vertex < 0 || vertex >= basis.n())
        throw ValidationError("delta_coefficients: vertex out of range");
    return basis.adjoint_column(vertex);
}

// Adds i.i.d. zero-mean Gaussian noise with sigma = noise_level * ||C||_F / k
// to every entry. Deterministic for a fixed seed.
inline FunctionalMap perturb_fmap(const FunctionalMap& fmap, double noise_level,
                                  unsigned long long seed) {
    if (noise_level < 0) throw ValidationError("perturb_fmap: noise_level must be >= 0");
    FunctionalMap out = fmap;
    if (noise_level == 0.0) return out;
    double sigma = noise_level * fmap.matrix.norm() / fmap.k_target();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    for (int c = 0; c < out.matrix.cols(); ++c)
        for (int r = 0; r < out.matrix.rows(); ++r) out.matrix(r, c) += gauss(rng);
    return out;
}

// Plain-text matrix files: header "rows cols", then row-major values.
inline void save_matrix(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) throw IOError("cannot write matrix file '" + path + "'");
    out << m.rows() << ' ' << m.cols() << '\n';
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) out << (c ? " " : "") << format_g17(m(r, c));
        out << '\n';
    }
}

inline Eigen::MatrixXd load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IOError("cannot open matrix file '" + path + "'");
    int rows, cols;
    if (!(in >> rows >> cols) || rows < 1 || cols < 1)
        throw ParseError("malformed matrix header in '" + path + "'");
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (!(in >> m(r, c))) throw ParseError("truncated matrix file '" + path + "'");
    return m;
}

} // namespace fmr

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <fstream>
#include <string>
#include <vector>

#include "fmr/laplacian.hpp"

namespace fmr {

// Discrete inner product used for basis orthonormalization. Uniform treats
// vertices as unit weights (Phi^T Phi = I); mass-weighted uses the lumped
// vertex areas (Phi^T M Phi = I). Downstream formulas only ever use the
// adjoint, so both modes flow through identical code paths.
enum class InnerProduct { Uniform, MassWeighted };

inline std::string to_string(InnerProduct mode) {
    return mode == InnerProduct::Uniform ? "uniform" : "mass";
}

inline InnerProduct inner_product_from_string(const std::string& s) {
    if (s == "uniform") return InnerProduct::Uniform;
    if (s == "mass") return InnerProduct::MassWeighted;
    throw ValidationError("unknown inner-product mode '" + s + "' (uniform|mass)");
}

struct SpectralBasis {
    Eigen::MatrixXd functions;   // n x k, column i = i-th eigenfunction
    Eigen::VectorXd eigenvalues; // ascending, eigenvalues[0] ~ 0
    InnerProduct mode = InnerProduct::MassWeighted;
    Eigen::VectorXd mass;        // lumped vertex areas of the source mesh
    std::string mesh_id;

    int n() const { return static_cast<int>(functions.rows()); }
    int k() const { return static_cast<int>(functions.cols()); }

    // k x n adjoint: Phi^T in uniform mode, Phi^T M in mass-weighted mode.
    // Satisfies adjoint() * functions = I_k.
    Eigen::MatrixXd adjoint() const {
        if (mode == InnerProduct::Uniform) return functions.transpose();
        return functions.transpose() * mass.asDiagonal();
    }

    // Adjoint column for a single vertex: the delta-function coefficients.
    Eigen::VectorXd adjoint_column(int vertex) const {
        Eigen::VectorXd col = functions.row(vertex).transpose();
        if (mode == InnerProduct::MassWeighted) col *= mass[vertex];
        return col;
    }
};

struct EigOptions {
    double tol = 1e-10;       // shifted-residual tolerance of the iterative solver
    bool force_sparse = false; // bypass the dense fallback (n <= 3000) for testing
};

namespace detail {

// Deterministic sign: largest-magnitude entry of each column positive,
// ties broken by lowest vertex index.
inline void fix_signs(Eigen::MatrixXd& functions) {
    for (int c = 0; c < functions.cols(); ++c) {
        int arg = 0;
        double best = std::abs(functions(0, c));
        for (int r = 1; r < functions.rows(); ++r) {
            double a = std::abs(functions(r, c));
            if (a > best) {
                best = a;
                arg = r;
            }
        }
        if (functions(arg, c) < 0) functions.col(c) = -functions.col(c);
    }
}

// Shift-invert block subspace iteration for the k smallest eigenpairs of the
// sparse symmetric operator O, factorized once at a small positive shift.
inline void shift_invert_smallest(const Eigen::SparseMatrix<double>& op, int k, double tol,
                                  Eigen::MatrixXd& vectors, Eigen::VectorXd& values) {
    const int n = static_cast<int>(op.rows());
    const int m = std::min(n, k + 8);
    const double scale = op.diagonal().cwiseAbs().maxCoeff();
    const double shift = 1e-8 * op.diagonal().sum() / n;

    Eigen::SparseMatrix<double> shifted = op;
    for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) += shift;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(shifted);
    if (solver.info() != Eigen::Success)
        throw NumericalError("sparse factorization failed in shift-invert eigensolver");

    // Deterministic start subspace.
    Eigen::MatrixXd basis(n, m);
    basis.col(0).setOnes();
    for (int c = 1; c < m; ++c)
        for (int r = 0; r < n; ++r)
            basis(r, c) = std::cos(double(c) * double(r + 1) / double(n) * 3.14159);

    const int budget = 300 * k;
    double worst_residual = 0.0;
    for (int iter = 0; iter < budget; ++iter) {
        Eigen::MatrixXd y = solver.solve(basis);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
        Eigen::MatrixXd h = q.transpose() * (op * q);
        h = 0.5 * (h + h.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(h);
        basis = q * ritz.eigenvectors();

        worst_residual = 0.0;
        for (int i = 0; i < k; ++i) {
            double r = (op * basis.col(i) - ritz.eigenvalues()[i] * basis.col(i)).norm();
            worst_residual = std::max(worst_residual, r);
        }
        if (worst_residual <= tol * scale) {
            vectors = basis.leftCols(k);
            values = ritz.eigenvalues().head(k);
            return;
        }
    }
    throw NumericalError("shift-invert eigensolver did not converge (residual " +
                         format_g17(worst_residual) + " after " + std::to_string(budget) +
                         " iterations)");
}

} // namespace detail

// First k eigenpairs of the Laplace-Beltrami operator, solved on the
// symmetrically mass-normalized operator O = M^{-1/2} S M^{-1/2}. In
// mass-weighted mode the eigenvectors are mapped back through M^{-1/2} so that
// S phi = lambda M phi with Phi^T M Phi = I.
inline SpectralBasis compute_basis(const LaplacianPair& lap, int k, InnerProduct mode,
                                   const EigOptions& opts = {}) {
    const int n = static_cast<int>(lap.mass.size());
    if (k < 1 || k > n)
        throw ValidationError("compute_basis: k must be in [1, n]");

    Eigen::VectorXd inv_sqrt_mass = lap.mass.cwiseSqrt().cwiseInverse();
    Eigen::SparseMatrix<double> op =
        inv_sqrt_mass.asDiagonal() * lap.stiffness * inv_sqrt_mass.asDiagonal();

    Eigen::MatrixXd vectors;
    Eigen::VectorXd values;
    if (n <= 3000 && !opts.force_sparse) {
        Eigen::MatrixXd dense_op(op);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_op);
        if (es.info() != Eigen::Success)
            throw NumericalError("dense eigensolver failed");
        vectors = es.eigenvectors().leftCols(k);
        values = es.eigenvalues().head(k);
    } else {
        detail::shift_invert_smallest(op, k, opts.tol, vectors, values);
    }

    // The kernel eigenvalue comes back as rounding noise around zero.
    const double scale = op.diagonal().cwiseAbs().maxCoeff();
    for (int i = 0; i < k; ++i) {
        if (values[i] < 0) {
            if (values[i] < -1e-8 * scale)
                throw NumericalError("negative eigenvalue " + format_g17(values[i]));
            values[i] = 0.0;
        }
    }

    SpectralBasis basis;
    basis.mode = mode;
    basis.mass = lap.mass;
    basis.eigenvalues = values;
    basis.functions = (mode == InnerProduct::Uniform)
                          ? vectors
                          : Eigen::MatrixXd(inv_sqrt_mass.asDiagonal() * vectors);
    detail::fix_signs(basis.functions);

    // Residual audit on the generalized problem, scaled by the stiffness
    // magnitude so the kernel eigenpair (lambda = 0) stays auditable.
    const double s_scale = Eigen::VectorXd(lap.stiffness.diagonal()).cwiseAbs().maxCoeff();
    for (int i = 0; i < k; ++i) {
        Eigen::VectorXd phi = (mode == InnerProduct::Uniform)
                                  ? Eigen::VectorXd(inv_sqrt_mass.asDiagonal() * basis.functions.col(i))
                                  : Eigen::VectorXd(basis.functions.col(i));
        Eigen::VectorXd s_phi = lap.stiffness * phi;
        Eigen::VectorXd m_phi = lap.mass.asDiagonal() * phi;
        double num = (s_phi - values[i] * m_phi).norm();
        double denom = s_scale * phi.norm() + values[i] * m_phi.norm();
        if (num > 1e-6 * denom)
            throw NumericalError("eigenpair " + std::to_string(i) + " residual " +
                                 format_g17(num / denom) + " exceeds 1e-6");
    }
    return basis;
}

inline SpectralBasis compute_basis(const TriangleMesh& mesh, int k,
                                   InnerProduct mode = InnerProduct::MassWeighted,
                                   const EigOptions& opts = {}) {
    return compute_basis(build_laplacian(mesh), k, mode, opts);
}

inline SpectralBasis truncate(const SpectralBasis& basis, int k) {
    if (k < 1 || k > basis.k()) throw ValidationError("truncate: bad rank");
    SpectralBasis out = basis;
    out.functions = basis.functions.leftCols(k);
    out.eigenvalues = basis.eigenvalues.head(k);
    return out;
}

// Plain-text basis file: header "n k mode lambda_1 ... lambda_k mass_1 ... mass_n",
// then one vertex per row with k columns, all at 17 significant digits.
inline void save_basis(const std::string& path, const SpectralBasis& basis) {
    std::ofstream out(path);
    if (!out) throw IOError("cannot write basis file '" + path + "'");
    out << basis.n() << ' ' << basis.k() << ' ' << to_string(basis.mode);
    for (int i = 0; i < basis.k(); ++i) out << ' ' << format_g17(basis.eigenvalues[i]);
    for (int v = 0; v < basis.n(); ++v) out << ' ' << format_g17(basis.mass[v]);
    out << '\n';
    for (int v = 0; v < basis.n(); ++v) {
        for (int i = 0; i < basis.k(); ++i)
            out << (i ? " " : "") << format_g17(basis.functions(v, i));
        out << '\n';
    }
}

inline SpectralBasis load_basis(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IOError("cannot open basis file '" + path + "'");
    int n, k;
    std::string mode;
    if (!(in >> n >> k >> mode)) throw ParseError("malformed basis header in '" + path + "'");
    SpectralBasis basis;
    basis.mode = inner_product_from_string(mode);
    basis.eigenvalues.resize(k);
    basis.mass.resize(n);
    basis.functions.resize(n, k);
    for (int i = 0; i < k; ++i)
        if (!(in >> basis.eigenvalues[i])) throw ParseError("truncated basis eigenvalues");
    for (int v = 0; v < n; ++v)
        if (!(in >> basis.mass[v])) throw ParseError("truncated basis masses");
    for (int v = 0; v < n; ++v)
        for (int i = 0; i < k; ++i)
            if (!(in >> basis.functions(v, i))) throw ParseError("truncated basis matrix");
    basis.mesh_id = path;
    return basis;
}

} // namespace fmr

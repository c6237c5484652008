#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <iostream>
#include <vector>

#include "fmr/cpd.hpp"
#include "fmr/recovery.hpp"

namespace fmr {

enum class RecoveryMethod { Max, NN, BalancedNN, Probabilistic };
enum class UpdateRule { OrthogonalProcrustes, LeastSquaresR };

inline std::string to_string(RecoveryMethod m) {
    switch (m) {
        case RecoveryMethod::Max: return "max";
        case RecoveryMethod::NN: return "nn";
        case RecoveryMethod::BalancedNN: return "balanced_nn";
        case RecoveryMethod::Probabilistic: return "probabilistic";
    }
    return "?";
}

inline RecoveryMethod recovery_method_from_string(const std::string& s) {
    if (s == "max") return RecoveryMethod::Max;
    if (s == "nn") return RecoveryMethod::NN;
    if (s == "balanced_nn") return RecoveryMethod::BalancedNN;
    if (s == "probabilistic") return RecoveryMethod::Probabilistic;
    throw ValidationError("unknown recovery method '" + s + "'");
}

struct RefinementConfig {
    RecoveryMethod recovery_method = RecoveryMethod::NN;
    UpdateRule update_rule = UpdateRule::OrthogonalProcrustes;
    int outer_iterations = 5;
    double ridge = 1e-9;
    double convergence_tol = 1e-6;
    // knobs forwarded to the recovery methods
    double balanced_lambda = 1.0;
    int balanced_rounds = 20;
    double prob_lambda = 3.0;
    int prob_iterations = 5;
    double kernel_width = 2.0;
};

struct RefinementTraceRow {
    int iteration;
    double objective;              // ||C Phi^+ - Psi^+ P||_F^2 after the map update
    double exact_match_pct;        // NaN without ground truth
    double r_identity_distance;    // ||R - I||_F, NaN for the Procrustes rule
};

struct RefinementTrace {
    std::vector<RefinementTraceRow> rows;
};

namespace detail {

inline Eigen::MatrixXd gathered_target_adjoint(const SpectralBasis& target, const PointMap& map) {
    Eigen::MatrixXd gathered(target.k(), map.size());
    for (int x = 0; x < map.size(); ++x) gathered.col(x) = target.adjoint_column(map(x));
    return gathered;
}

} // namespace detail

// Orthogonal Procrustes refinement: the orthogonal C minimizing
// ||C Phi^+ - Psi^+ P||_F^2, via SVD of the cross-covariance (Psi^+ P)(Phi^+)^T.
inline FunctionalMap procrustes_update(const FunctionalMap& fmap, const PointMap& map) {
    if (fmap.k_source() != fmap.k_target())
        throw ValidationError("procrustes_update: requires a square functional map");
    Eigen::MatrixXd cross = detail::gathered_target_adjoint(*fmap.target_basis, map) *
                            fmap.source_basis->adjoint().transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues().minCoeff() <=
        1e-12 * std::max(svd.singularValues().maxCoeff(), 1e-300))
        std::cerr << "warning: procrustes_update: rank-deficient cross-covariance, "
                     "solution is non-unique\n";
    FunctionalMap out = fmap;
    out.matrix = svd.matrixU() * svd.matrixV().transpose();
    return out;
}

// Non-rigid update: R = argmin ||R (C Phi^+) - Psi^+ P||_F^2 + ridge ||R - I||_F^2,
// refined map = R C.
inline std::pair<Eigen::MatrixXd, FunctionalMap> least_squares_r_update(
    const FunctionalMap& fmap, const PointMap& map, double ridge = 1e-9) {
    if (ridge < 0) throw ValidationError("least_squares_r_update: ridge must be >= 0");
    const int k = fmap.k_target();
    Eigen::MatrixXd x = fmap.matrix * fmap.source_basis->adjoint(); // k x n
    Eigen::MatrixXd b = detail::gathered_target_adjoint(*fmap.target_basis, map);

    Eigen::MatrixXd gram = x * x.transpose();
    if (ridge == 0.0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        if (es.eigenvalues()[0] <= 1e-12 * std::max(es.eigenvalues()[k - 1], 1e-300))
            throw NumericalError(
                "least_squares_r_update: singular normal matrix; use a positive ridge");
    }
    gram += ridge * Eigen::MatrixXd::Identity(k, k);
    Eigen::MatrixXd rhs = b * x.transpose() + ridge * Eigen::MatrixXd::Identity(k, k);
    Eigen::MatrixXd r =
        Eigen::LDLT<Eigen::MatrixXd>(gram).solve(rhs.transpose()).transpose();

    FunctionalMap out = fmap;
    out.matrix = r * fmap.matrix;
    return {std::move(r), std::move(out)};
}

namespace detail {

inline RecoveryResult run_recovery(const FunctionalMap& fmap, const RefinementConfig& config) {
    switch (config.recovery_method) {
        case RecoveryMethod::Max: return recover_max(fmap);
        case RecoveryMethod::NN: return recover_nn(embed(fmap));
        case RecoveryMethod::BalancedNN:
            return recover_balanced_nn(embed(fmap), config.balanced_lambda,
                                       config.balanced_rounds);
        case RecoveryMethod::Probabilistic:
            return recover_probabilistic(embed(fmap), config.prob_lambda,
                                         config.prob_iterations, config.kernel_width);
    }
    throw ValidationError("unknown recovery method");
}

} // namespace detail

struct RefineOutput {
    FunctionalMap fmap;
    PointMap map;
    RefinementTrace trace;
};

// Alternates point-map recovery and functional-map update. NN recovery with
// the Procrustes rule reproduces orthogonal ICP; probabilistic recovery with
// the least-squares rule is the non-rigid refinement loop.
inline RefineOutput refine_loop(const FunctionalMap& fmap, const RefinementConfig& config,
                                const PointMap* ground_truth = nullptr) {
    if (config.outer_iterations < 1)
        throw ValidationError("refine_loop: outer_iterations must be >= 1");
    const double nan = std::numeric_limits<double>::quiet_NaN();

    FunctionalMap current = fmap;
    PointMap map;
    RefinementTrace trace;
    double prev_objective = nan;
    for (int it = 1; it <= config.outer_iterations; ++it) {
        RecoveryResult recovered = detail::run_recovery(current, config);
        map = recovered.map;

        double r_dist = nan;
        if (config.update_rule == UpdateRule::OrthogonalProcrustes) {
            current = procrustes_update(current, map);
        } else {
            auto [r, refined] = least_squares_r_update(current, map, config.ridge);
            r_dist = (r - Eigen::MatrixXd::Identity(r.rows(), r.cols())).norm();
            current = std::move(refined);
        }

        double objective = assignment_objective(embed(current), map);
        double exact = nan;
        if (ground_truth) {
            int hits = 0;
            for (int i = 0; i < map.size(); ++i)
                if (map(i) == (*ground_truth)(i)) ++hits;
            exact = 100.0 * hits / map.size();
        }
        trace.rows.push_back({it, objective, exact, r_dist});

        if (it > 1 && std::abs(objective - prev_objective) <
                          config.convergence_tol * std::max(std::abs(prev_objective), 1e-300))
            break;
        prev_objective = objective;
    }
    return {std::move(current), std::move(map), std::move(trace)};
}

} // namespace fmr

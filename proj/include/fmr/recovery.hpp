#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fmr/fmap.hpp"
#include "fmr/hungarian.hpp"
#include "fmr/kdtree.hpp"

namespace fmr {

// The two point clouds in R^k whose alignment encodes the correspondence:
// images of source deltas (columns of C Phi^+) versus target delta
// coefficients (columns of Psi^+).
struct EmbeddedCloudPair {
    Eigen::MatrixXd source_points; // k x n_M
    Eigen::MatrixXd target_points; // k x n_N

    int dim() const { return static_cast<int>(source_points.rows()); }
    int n_source() const { return static_cast<int>(source_points.cols()); }
    int n_target() const { return static_cast<int>(target_points.cols()); }
};

struct RecoveryResult {
    PointMap map;
    double objective = 0.0; // squared-distance units, recomputable from the map
    int iterations = 0;
    std::string method;
};

inline double pair_sqdist(const Eigen::MatrixXd& a, int col_a, const Eigen::MatrixXd& b,
                          int col_b) {
    double d = 0.0;
    for (int r = 0; r < a.rows(); ++r) {
        double diff = a(r, col_a) - b(r, col_b);
        d += diff * diff;
    }
    return d;
}

// ||C Phi^+ - Psi^+ P||_F^2 for a left-stochastic P given as an assignment.
inline double assignment_objective(const EmbeddedCloudPair& clouds, const PointMap& map) {
    double total = 0.0;
    for (int j = 0; j < clouds.n_source(); ++j)
        total += pair_sqdist(clouds.source_points, j, clouds.target_points, map(j));
    return total;
}

inline EmbeddedCloudPair embed(const FunctionalMap& fmap) {
    if (!fmap.source_basis || !fmap.target_basis)
        throw ValidationError("embed: functional map has no attached bases");
    if (fmap.source_basis->mode != fmap.target_basis->mode)
        throw ValidationError("embed: bases use different inner-product modes");
    EmbeddedCloudPair clouds;
    clouds.source_points = fmap.matrix * fmap.source_basis->adjoint();
    clouds.target_points = fmap.target_basis->adjoint();
    if (!clouds.source_points.allFinite())
        throw NumericalError("embed: non-finite entries in the embedded source cloud");
    return clouds;
}

// Indicator-maximum recovery: map each source delta through C and take the
// vertex where the reconstructed target function peaks (ties: lowest index).
inline RecoveryResult recover_max(const FunctionalMap& fmap) {
    EmbeddedCloudPair clouds = embed(fmap);
    const int n_m = clouds.n_source();
    const Eigen::MatrixXd& psi = fmap.target_basis->functions;

    RecoveryResult result;
    result.method = "max";
    result.iterations = 1;
    result.map.kind = PointMap::Kind::LeftStochastic;
    result.map.assignment.resize(n_m);

    const int block = 256;
    for (int start = 0; start < n_m; start += block) {
        int width = std::min(block, n_m - start);
        Eigen::MatrixXd fields = psi * clouds.source_points.middleCols(start, width);
        for (int c = 0; c < width; ++c) {
            int arg = 0;
            double best = fields(0, c);
            for (int r = 1; r < fields.rows(); ++r)
                if (fields(r, c) > best) {
                    best = fields(r, c);
                    arg = r;
                }
            result.map.assignment[start + c] = arg;
        }
    }
    result.objective = assignment_objective(clouds, result.map);
    return result;
}

// Per-column nearest neighbor: the best left-stochastic approximation.
inline RecoveryResult recover_nn(const EmbeddedCloudPair& clouds) {
    RecoveryResult result;
    result.method = "nn";
    result.iterations = 1;
    result.map.kind = PointMap::Kind::LeftStochastic;
    result.map.assignment = nearest_columns(clouds.target_points, clouds.source_points);
    result.objective = assignment_objective(clouds, result.map);
    return result;
}

// Diagnostics from the balanced-NN alternation: full objective after every
// half-step plus the backward assignment at the fixed point.
struct BalancedTrace {
    std::vector<double> objectives;
    std::vector<int> backward_assignment;
    bool reached_fixed_point = false;
};

// Symmetrized nearest neighbors: forward map P and backward map Q coupled by
// a consistency bonus. For one-hot columns the coupling penalty expands to a
// constant minus 2*lambda on consistent pairs, which is the form used here.
inline RecoveryResult recover_balanced_nn(const EmbeddedCloudPair& clouds, double lambda = 1.0,
                                          int max_rounds = 20, BalancedTrace* trace = nullptr) {
    if (lambda <= 0) throw ValidationError("recover_balanced_nn: lambda must be positive");
    const int n_m = clouds.n_source();
    const int n_n = clouds.n_target();

    std::vector<int> forward = nearest_columns(clouds.target_points, clouds.source_points);
    std::vector<int> backward = nearest_columns(clouds.source_points, clouds.target_points);
    const std::vector<int> plain_forward = forward;
    const std::vector<int> plain_backward = backward;

    auto full_objective = [&] {
        double obj = 0.0;
        for (int j = 0; j < n_m; ++j)
            obj += pair_sqdist(clouds.source_points, j, clouds.target_points, forward[j]);
        for (int i = 0; i < n_n; ++i)
            obj += pair_sqdist(clouds.source_points, backward[i], clouds.target_points, i);
        int consistent = 0;
        for (int j = 0; j < n_m; ++j)
            if (backward[forward[j]] == j) ++consistent;
        return obj + lambda * (n_m + n_n - 2.0 * consistent);
    };
    if (trace) {
        trace->objectives.clear();
        trace->objectives.push_back(full_objective());
    }

    int rounds = 0;
    bool fixed_point = false;
    for (; rounds < max_rounds && !fixed_point; ++rounds) {
        // Forward half-step: plain NN versus bonus candidates from Q.
        std::vector<std::vector<int>> bonus_targets(n_m);
        for (int i = 0; i < n_n; ++i) bonus_targets[backward[i]].push_back(i);
        std::vector<int> new_forward(n_m);
        for (int j = 0; j < n_m; ++j) {
            int arg = plain_forward[j];
            double best = pair_sqdist(clouds.source_points, j, clouds.target_points, arg);
            for (int i : bonus_targets[j]) {
                double d =
                    pair_sqdist(clouds.source_points, j, clouds.target_points, i) - 2.0 * lambda;
                if (d < best || (d == best && i < arg)) {
                    best = d;
                    arg = i;
                }
            }
            new_forward[j] = arg;
        }
        bool forward_changed = new_forward != forward;
        forward = std::move(new_forward);
        if (trace) trace->objectives.push_back(full_objective());

        // Backward half-step, roles swapped.
        std::vector<std::vector<int>> bonus_sources(n_n);
        for (int j = 0; j < n_m; ++j) bonus_sources[forward[j]].push_back(j);
        std::vector<int> new_backward(n_n);
        for (int i = 0; i < n_n; ++i) {
            int arg = plain_backward[i];
            double best = pair_sqdist(clouds.source_points, arg, clouds.target_points, i);
            for (int j : bonus_sources[i]) {
                double d =
                    pair_sqdist(clouds.source_points, j, clouds.target_points, i) - 2.0 * lambda;
                if (d < best || (d == best && j < arg)) {
                    best = d;
                    arg = j;
                }
            }
            new_backward[i] = arg;
        }
        bool backward_changed = new_backward != backward;
        backward = std::move(new_backward);
        if (trace) trace->objectives.push_back(full_objective());

        fixed_point = !forward_changed && !backward_changed;
    }

    RecoveryResult result;
    result.method = "balanced_nn";
    result.iterations = rounds;
    result.map.kind = PointMap::Kind::LeftStochastic;
    result.map.assignment = std::move(forward);
    result.objective = assignment_objective(clouds, result.map);
    if (trace) {
        trace->backward_assignment = backward;
        trace->reached_fixed_point = fixed_point;
    }
    return result;
}

// Exact optimal permutation via the Hungarian algorithm. Guarded to small
// problems: the cost matrix is dense n x n.
inline RecoveryResult recover_lap_oracle(const EmbeddedCloudPair& clouds) {
    if (clouds.n_source() != clouds.n_target())
        throw ValidationError("recover_lap_oracle: requires equal vertex counts");
    const int n = clouds.n_source();
    if (n > 512) throw ValidationError("recover_lap_oracle: n > 512 (prohibitively expensive)");

    Eigen::MatrixXd cost(n, n); // rows = target vertices, columns = source vertices
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            cost(i, j) = pair_sqdist(clouds.source_points, j, clouds.target_points, i);

    auto [row_of_column, total] = solve_assignment(cost);
    RecoveryResult result;
    result.method = "lap";
    result.iterations = 1;
    result.map.kind = PointMap::Kind::Permutation;
    result.map.assignment = std::move(row_of_column);
    result.objective = total;
    return result;
}

} // namespace fmr

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "fmr/kdtree.hpp"
#include "fmr/recovery.hpp"

namespace fmr {

// Gaussian-mixture alignment of the embedded clouds: centroids are the mapped
// source deltas, moving by a kernel-smoothed displacement field estimated via
// EM. Responsibilities are never stored as a full matrix; E and M passes
// stream over data columns in blocks.
struct GmmAlignmentState {
    Eigen::MatrixXd initial_centroids; // k x m, fixed (the columns of C Phi^+)
    Eigen::MatrixXd displacement;      // k x m, V = (G W)^T
    Eigen::MatrixXd kernel;            // m x m Gaussian low-pass kernel G
    Eigen::MatrixXd weights;           // m x k, W with V^T = G W
    double sigma2 = 0.0;
    double sigma2_init = 0.0;
    double lambda = 3.0;
    double kernel_width = 0.0; // absolute beta, embedding units
    int iterations_run = 0;
    bool converged = false;

    int dim() const { return static_cast<int>(initial_centroids.rows()); }
    int n_centroids() const { return static_cast<int>(initial_centroids.cols()); }

    Eigen::MatrixXd centroids() const { return initial_centroids + displacement; }

    // Responsibilities p(x_i | y_j) for one data column, normalized over i.
    Eigen::VectorXd responsibilities(const Eigen::MatrixXd& data, int j) const {
        Eigen::MatrixXd current = centroids();
        const int m = n_centroids();
        Eigen::VectorXd d(m);
        for (int i = 0; i < m; ++i) d[i] = pair_sqdist(current, i, data, j);
        double dmin = d.minCoeff();
        Eigen::VectorXd w = (-(d.array() - dmin) / (2.0 * sigma2)).exp();
        return w / w.sum();
    }
};

struct EmTraceRow {
    int iteration;
    double objective; // regularized negative log-likelihood
    double sigma2;
    double mean_displacement;
};

struct EmTrace {
    std::vector<EmTraceRow> rows;
};

// Regularized negative log-likelihood of the current state.
inline double regularized_objective(const GmmAlignmentState& state, const Eigen::MatrixXd& data) {
    const int m = state.n_centroids();
    const int n = static_cast<int>(data.cols());
    const int k = state.dim();
    Eigen::MatrixXd current = state.centroids();
    double nll = 0.0;
    for (int j = 0; j < n; ++j) {
        double dmin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i)
            dmin = std::min(dmin, pair_sqdist(current, i, data, j));
        double sum = 0.0;
        for (int i = 0; i < m; ++i)
            sum += std::exp(-(pair_sqdist(current, i, data, j) - dmin) / (2.0 * state.sigma2));
        nll += -(std::log(sum) - dmin / (2.0 * state.sigma2) - std::log(double(m))) +
               0.5 * k * std::log(2.0 * M_PI * state.sigma2);
    }
    double reg = 0.5 * state.lambda *
                 (state.weights.transpose() * state.kernel * state.weights).trace();
    return nll + reg;
}

// kernel_width is in units of the source-cloud RMS radius (default 2.0).
inline GmmAlignmentState init_alignment(const EmbeddedCloudPair& clouds, double lambda = 3.0,
                                        double kernel_width = 2.0) {
    if (lambda <= 0 || kernel_width <= 0)
        throw ValidationError("init_alignment: lambda and kernel_width must be positive");
    const int k = clouds.dim();
    const int m = clouds.n_source();
    const int n = clouds.n_target();
    const Eigen::MatrixXd& x = clouds.source_points;
    const Eigen::MatrixXd& y = clouds.target_points;

    Eigen::VectorXd mean = x.rowwise().mean();
    double rms = std::sqrt((x.colwise() - mean).squaredNorm() / m);
    if (rms <= 0.0)
        throw ValidationError("init_alignment: zero-diameter source cloud (all points coincide)");

    GmmAlignmentState state;
    state.initial_centroids = x;
    state.displacement = Eigen::MatrixXd::Zero(k, m);
    state.weights = Eigen::MatrixXd::Zero(m, k);
    state.lambda = lambda;
    state.kernel_width = kernel_width * rms;

    // Moment-matching variance over all centroid/data pairs.
    double xx = x.squaredNorm(), yy = y.squaredNorm();
    Eigen::VectorXd sx = x.rowwise().sum(), sy = y.rowwise().sum();
    state.sigma2 = (double(n) * xx + double(m) * yy - 2.0 * sx.dot(sy)) /
                   (double(k) * double(m) * double(n));
    if (!(state.sigma2 > 0))
        throw ValidationError("init_alignment: clouds coincide in a single point");
    state.sigma2_init = state.sigma2;

    state.kernel.resize(m, m);
    const double denom = 2.0 * state.kernel_width * state.kernel_width;
    for (int b = 0; b < m; ++b)
        for (int a = 0; a < m; ++a)
            state.kernel(a, b) = std::exp(-pair_sqdist(x, a, x, b) / denom);
    return state;
}

// One EM iteration: streamed E-step statistics, coherent-displacement M-step
// solve, closed-form sigma^2 update. Hitting the sigma^2 floor flags
// convergence.
inline void em_step(GmmAlignmentState& state, const Eigen::MatrixXd& data) {
    const int k = state.dim();
    const int m = state.n_centroids();
    const int n = static_cast<int>(data.cols());
    if (data.rows() != k) throw ValidationError("em_step: data dimension mismatch");

    Eigen::MatrixXd current = state.centroids();
    Eigen::VectorXd tn = current.colwise().squaredNorm();
    Eigen::VectorXd yn = data.colwise().squaredNorm();

    Eigen::VectorXd p1 = Eigen::VectorXd::Zero(m);       // P 1
    Eigen::MatrixXd px = Eigen::MatrixXd::Zero(m, k);    // P Y^T (row form)
    const int block = 512;
    for (int start = 0; start < n; start += block) {
        int width = std::min(block, n - start);
        Eigen::MatrixXd cross = current.transpose() * data.middleCols(start, width); // m x width
        Eigen::MatrixXd resp(m, width);
        for (int c = 0; c < width; ++c) {
            Eigen::VectorXd d = tn.array() + yn[start + c] - 2.0 * cross.col(c).array();
            double dmin = d.minCoeff();
            Eigen::VectorXd w = (-(d.array() - dmin).max(0.0) / (2.0 * state.sigma2)).exp();
            resp.col(c) = w / w.sum();
        }
        p1 += resp.rowwise().sum();
        px.noalias() += resp * data.middleCols(start, width).transpose();
    }

    // M-step: (diag(P1) G + lambda sigma^2 I) W = P Y^T - diag(P1) X^T
    Eigen::MatrixXd lhs = p1.asDiagonal() * state.kernel;
    lhs.diagonal().array() += state.lambda * state.sigma2;
    Eigen::MatrixXd rhs = px - p1.asDiagonal() * state.initial_centroids.transpose();
    state.weights = Eigen::PartialPivLU<Eigen::MatrixXd>(lhs).solve(rhs);
    state.displacement = (state.kernel * state.weights).transpose();

    Eigen::MatrixXd moved = state.centroids().transpose(); // m x k rows
    double term_data = yn.sum();                           // Pt1_j = 1 without outliers
    double term_cross = (px.cwiseProduct(moved)).sum();
    double term_model = moved.rowwise().squaredNorm().dot(p1);
    double sigma2 = (term_data - 2.0 * term_cross + term_model) / (double(n) * double(k));

    const double floor = 1e-12 * state.sigma2_init;
    if (!(sigma2 > floor)) {
        sigma2 = floor;
        state.converged = true;
    }
    state.sigma2 = sigma2;
    ++state.iterations_run;
}

// Runs EM for `iterations` steps or until the regularized objective change
// drops below 1e-9 relative. The trace records the state before any step and
// after each step.
inline std::pair<GmmAlignmentState, EmTrace> run_alignment(const EmbeddedCloudPair& clouds,
                                                           double lambda = 3.0,
                                                           int iterations = 5,
                                                           double kernel_width = 2.0) {
    if (iterations < 1) throw ValidationError("run_alignment: iterations must be >= 1");
    GmmAlignmentState state = init_alignment(clouds, lambda, kernel_width);
    EmTrace trace;
    double objective = regularized_objective(state, clouds.target_points);
    trace.rows.push_back({0, objective, state.sigma2, 0.0});

    for (int it = 1; it <= iterations; ++it) {
        em_step(state, clouds.target_points);
        double next = regularized_objective(state, clouds.target_points);
        double mean_disp = state.displacement.colwise().norm().mean();
        trace.rows.push_back({it, next, state.sigma2, mean_disp});
        bool stalled = std::abs(next - objective) < 1e-9 * std::abs(objective);
        objective = next;
        if (state.converged || stalled) break;
    }
    return {std::move(state), std::move(trace)};
}

// Maximum-posterior point map: with uniform weights and isotropic variance
// this is the nearest data point to each transformed centroid.
inline RecoveryResult posterior_map(const GmmAlignmentState& state,
                                    const EmbeddedCloudPair& clouds) {
    Eigen::MatrixXd current = state.centroids();
    RecoveryResult result;
    result.method = "probabilistic";
    result.iterations = state.iterations_run;
    result.map.kind = PointMap::Kind::LeftStochastic;
    result.map.assignment = nearest_columns(clouds.target_points, current);
    double obj = 0.0;
    for (int i = 0; i < state.n_centroids(); ++i)
        obj += pair_sqdist(current, i, clouds.target_points, result.map(i));
    result.objective = obj;
    return result;
}

// Full probabilistic recovery: EM alignment followed by posterior extraction.
inline RecoveryResult recover_probabilistic(const EmbeddedCloudPair& clouds, double lambda = 3.0,
                                            int iterations = 5, double kernel_width = 2.0) {
    auto [state, trace] = run_alignment(clouds, lambda, iterations, kernel_width);
    return posterior_map(state, clouds);
}

} // namespace fmr

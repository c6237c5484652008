#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "fmr/geodesic.hpp"
#include "fmr/refine.hpp"

namespace fmr {

// Cumulative geodesic-error curve in sqrt(area)-normalized units, plus the
// exact-match percentage and the mean normalized error.
struct ErrorCurve {
    Eigen::VectorXd thresholds;
    Eigen::VectorXd fractions;
    double exact_match_pct = 0.0;
    double mean_error = 0.0;
};

// Default grid: 100 uniform steps on [0, 0.25] normalized units.
inline Eigen::VectorXd default_thresholds() {
    return Eigen::VectorXd::LinSpaced(100, 0.25 / 100.0, 0.25);
}

inline double exact_match_pct(const PointMap& map, const PointMap& truth) {
    if (map.size() != truth.size())
        throw ValidationError("exact_match_pct: map length mismatch");
    int hits = 0;
    for (int i = 0; i < map.size(); ++i)
        if (map(i) == truth(i)) ++hits;
    return 100.0 * hits / map.size();
}

// Geodesic fields on one mesh, keyed by source vertex and filled on demand.
class GeodesicCache {
public:
    explicit GeodesicCache(const TriangleMesh& mesh)
        : graph_(mesh), normalization_(std::sqrt(total_area(mesh))) {}

    const Eigen::VectorXd& field(int source) {
        auto it = fields_.find(source);
        if (it == fields_.end())
            it = fields_.emplace(source, graph_.dijkstra(source)).first;
        return it->second;
    }

    double normalization() const { return normalization_; }

private:
    EdgeGraph graph_;
    double normalization_;
    std::unordered_map<int, Eigen::VectorXd> fields_;
};

// Per-source-vertex normalized geodesic error on the target mesh between the
// predicted and true images.
inline std::vector<double> per_vertex_errors(const PointMap& map, const PointMap& truth,
                                             GeodesicCache& cache) {
    if (map.size() != truth.size())
        throw ValidationError("per_vertex_errors: map length mismatch");
    std::vector<double> errors(map.size());
    for (int i = 0; i < map.size(); ++i)
        errors[i] = cache.field(truth(i))[map(i)] / cache.normalization();
    return errors;
}

inline ErrorCurve curve_from_errors(const std::vector<double>& errors,
                                    const Eigen::VectorXd& thresholds) {
    ErrorCurve curve;
    curve.thresholds = thresholds;
    curve.fractions.resize(thresholds.size());
    const double n = static_cast<double>(errors.size());
    for (int t = 0; t < thresholds.size(); ++t) {
        int below = 0;
        for (double e : errors)
            if (e <= thresholds[t]) ++below;
        curve.fractions[t] = below / n;
    }
    int exact = 0;
    double sum = 0.0;
    for (double e : errors) {
        if (e == 0.0) ++exact;
        sum += e;
    }
    curve.exact_match_pct = 100.0 * exact / n;
    curve.mean_error = sum / n;
    return curve;
}

inline ErrorCurve evaluate_map(const PointMap& map, const PointMap& truth,
                               const TriangleMesh& target_mesh,
                               const Eigen::VectorXd& thresholds) {
    GeodesicCache cache(target_mesh);
    return curve_from_errors(per_vertex_errors(map, truth, cache), thresholds);
}

struct SweepRow {
    int k;
    std::string method;
    double exact_pct;
    double pct_below_002;
};

// Builds the ground-truth functional map C = Psi^+ P Phi at each rank and runs
// every requested recovery method on it (no refinement).
inline std::vector<SweepRow> rank_sweep(const TriangleMesh& source_mesh,
                                        const TriangleMesh& target_mesh, const PointMap& truth,
                                        std::vector<int> ks,
                                        const std::vector<RecoveryMethod>& methods,
                                        InnerProduct mode = InnerProduct::MassWeighted,
                                        const RefinementConfig& knobs = {},
                                        double noise_level = 0.0, unsigned long long seed = 0) {
    if (truth.kind != PointMap::Kind::Permutation)
        throw ValidationError("rank_sweep: ground truth must be a bijection");
    for (size_t i = 1; i < ks.size(); ++i)
        if (ks[i] <= ks[i - 1]) throw ValidationError("rank_sweep: ks must be ascending");

    int k_max = ks.back();
    auto src = std::make_shared<SpectralBasis>(compute_basis(source_mesh, k_max, mode));
    auto tgt = std::make_shared<SpectralBasis>(compute_basis(target_mesh, k_max, mode));

    GeodesicCache cache(target_mesh);
    std::vector<SweepRow> rows;
    for (int k : ks) {
        auto src_k = std::make_shared<SpectralBasis>(truncate(*src, k));
        auto tgt_k = std::make_shared<SpectralBasis>(truncate(*tgt, k));
        FunctionalMap fmap = fmap_from_pointmap(truth, src_k, tgt_k);
        if (noise_level > 0.0) fmap = perturb_fmap(fmap, noise_level, seed);
        for (RecoveryMethod method : methods) {
            RefinementConfig cfg = knobs;
            cfg.recovery_method = method;
            RecoveryResult result = detail::run_recovery(fmap, cfg);
            auto errors = per_vertex_errors(result.map, truth, cache);
            int below = 0;
            for (double e : errors)
                if (e <= 0.02) ++below;
            rows.push_back({k, to_string(method), exact_match_pct(result.map, truth),
                            100.0 * below / errors.size()});
        }
    }
    return rows;
}

struct QualityFields {
    Eigen::VectorXd singular_values;
    Eigen::MatrixXd source_fields; // n_M x count, column t = Phi * v_t
    Eigen::MatrixXd target_fields; // n_N x count, column t = Psi * u_t
};

// Per-vertex scalar fields from the top singular vectors of C, for external
// rendering of map quality.
inline QualityFields map_quality_fields(const FunctionalMap& fmap, int count = 5) {
    if (count < 1 || count > std::min(fmap.k_source(), fmap.k_target()))
        throw ValidationError("map_quality_fields: count out of range");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(fmap.matrix,
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    QualityFields fields;
    fields.singular_values = svd.singularValues().head(count);
    fields.source_fields = fmap.source_basis->functions * svd.matrixV().leftCols(count);
    fields.target_fields = fmap.target_basis->functions * svd.matrixU().leftCols(count);
    return fields;
}

} // namespace fmr

#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "fmr/eval.hpp"
#include "fmr/shapes.hpp"

using namespace fmr;

namespace {

PointMap permutation_map(std::vector<int> assignment) {
    PointMap map;
    map.kind = PointMap::Kind::Permutation;
    map.assignment = std::move(assignment);
    return map;
}

Eigen::MatrixXd floyd_warshall(const TriangleMesh& mesh) {
    const int n = mesh.n();
    const double inf = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd dist = Eigen::MatrixXd::Constant(n, n, inf);
    for (int v = 0; v < n; ++v) dist(v, v) = 0.0;
    for (const auto& f : mesh.faces)
        for (int c = 0; c < 3; ++c) {
            int a = f[c], b = f[(c + 1) % 3];
            double len = (mesh.vertices[a] - mesh.vertices[b]).norm();
            dist(a, b) = dist(b, a) = std::min(dist(a, b), len);
        }
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                dist(i, j) = std::min(dist(i, j), dist(i, k) + dist(k, j));
    return dist;
}

} // namespace

TEST_CASE("perfect map evaluates to a saturated curve") {
    TriangleMesh mesh = make_icosphere(1);
    PointMap truth = identity_pointmap(mesh.n());
    ErrorCurve curve = evaluate_map(truth, truth, mesh, default_thresholds());
    CHECK(curve.exact_match_pct == 100.0);
    CHECK(curve.mean_error == 0.0);
    for (int t = 0; t < curve.fractions.size(); ++t) CHECK(curve.fractions[t] == 1.0);
}

TEST_CASE("single wrong vertex matches the Floyd-Warshall oracle") {
    TriangleMesh mesh = make_grid(10, 10, 0.06, 5); // 100 vertices
    Eigen::MatrixXd oracle = floyd_warshall(mesh);
    PointMap truth = identity_pointmap(mesh.n());
    PointMap predicted = truth;
    predicted.kind = PointMap::Kind::LeftStochastic;
    predicted.assignment[37] = 82;

    ErrorCurve curve = evaluate_map(predicted, truth, mesh, default_thresholds());
    double expected = oracle(37, 82) / std::sqrt(total_area(mesh));
    CHECK(curve.exact_match_pct == 99.0);
    CHECK_THAT(curve.mean_error, Catch::Matchers::WithinRel(expected / 100.0, 1e-12));
}

TEST_CASE("curves are monotone and saturate beyond the diameter") {
    TriangleMesh mesh = make_icosphere(2);
    auto [permuted, truth_vec] = permuted_isometry(mesh, 3);
    // a deliberately bad map: everything to vertex 0
    PointMap bad;
    bad.assignment.assign(mesh.n(), 0);
    Eigen::VectorXd thresholds = Eigen::VectorXd::LinSpaced(60, 0.0, 6.0); // past diameter
    ErrorCurve curve = evaluate_map(bad, permutation_map(truth_vec), permuted, thresholds);
    for (int t = 1; t < curve.fractions.size(); ++t)
        CHECK(curve.fractions[t] >= curve.fractions[t - 1]);
    CHECK(curve.fractions[curve.fractions.size() - 1] == 1.0);
    // threshold 0 row agrees with the exact-match statistic
    CHECK(std::abs(100.0 * curve.fractions[0] - curve.exact_match_pct) <= 1e-12);
}

TEST_CASE("per-vertex error is symmetric in prediction and truth") {
    TriangleMesh mesh = make_grid(8, 7, 0.05, 9);
    GeodesicCache cache(mesh);
    PointMap truth = identity_pointmap(mesh.n());
    PointMap predicted = truth;
    predicted.kind = PointMap::Kind::LeftStochastic;
    std::mt19937_64 rng(4);
    for (int i = 0; i < mesh.n(); i += 5)
        predicted.assignment[i] = int(rng() % std::uint64_t(mesh.n()));

    auto forward = per_vertex_errors(predicted, truth, cache);
    auto backward = per_vertex_errors(truth, predicted, cache);
    for (int i = 0; i < mesh.n(); ++i)
        CHECK(std::abs(forward[i] - backward[i]) <= 1e-12 * std::max(1.0, forward[i]));
}

TEST_CASE("identity rank sweep is perfect for every method") {
    TriangleMesh mesh = make_geodesic_sphere(4); // 162 vertices
    auto [permuted, truth_vec] = permuted_isometry(mesh, 7);
    auto rows = rank_sweep(mesh, permuted, permutation_map(truth_vec), {16, 25},
                           {RecoveryMethod::Max, RecoveryMethod::NN, RecoveryMethod::BalancedNN,
                            RecoveryMethod::Probabilistic});
    REQUIRE(rows.size() == 8);
    for (const auto& row : rows) {
        CHECK(row.exact_pct == 100.0);
        CHECK(row.pct_below_002 == 100.0);
    }
}

TEST_CASE("max-method exact matches are non-decreasing in rank up to slack") {
    TriangleMesh mesh = make_uv_sphere(18, 28);
    auto [permuted, truth_vec] = permuted_isometry(mesh, 11);
    auto rows = rank_sweep(mesh, permuted, permutation_map(truth_vec), {25, 50, 75},
                           {RecoveryMethod::Max});
    REQUIRE(rows.size() == 3);
    for (size_t i = 1; i < rows.size(); ++i)
        CHECK(rows[i].exact_pct >= rows[i - 1].exact_pct - 2.0);
}

TEST_CASE("noisy rank sweeps are reproducible from the seed") {
    TriangleMesh mesh = make_geodesic_sphere(4);
    auto [permuted, truth_vec] = permuted_isometry(mesh, 13);
    PointMap truth = permutation_map(truth_vec);
    auto a = rank_sweep(mesh, permuted, truth, {20, 30}, {RecoveryMethod::NN},
                        InnerProduct::MassWeighted, {}, 0.4, 5);
    auto b = rank_sweep(mesh, permuted, truth, {20, 30}, {RecoveryMethod::NN},
                        InnerProduct::MassWeighted, {}, 0.4, 5);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].exact_pct == b[i].exact_pct);
        CHECK(a[i].pct_below_002 == b[i].pct_below_002);
    }
}

TEST_CASE("rank sweep input validation") {
    TriangleMesh mesh = make_icosphere(1);
    PointMap identity = identity_pointmap(mesh.n());
    CHECK_THROWS_AS(rank_sweep(mesh, mesh, identity, {10, 10}, {RecoveryMethod::NN}),
                    ValidationError);
    PointMap stochastic = identity;
    stochastic.kind = PointMap::Kind::LeftStochastic;
    CHECK_THROWS_AS(rank_sweep(mesh, mesh, stochastic, {10}, {RecoveryMethod::NN}),
                    ValidationError);
}

TEST_CASE("quality fields of the identity map are the basis functions") {
    TriangleMesh mesh = make_icosphere(2);
    auto basis = std::make_shared<SpectralBasis>(
        compute_basis(mesh, 10, InnerProduct::MassWeighted));
    FunctionalMap fmap;
    fmap.matrix = Eigen::MatrixXd::Identity(10, 10);
    fmap.source_basis = fmap.target_basis = basis;
    QualityFields fields = map_quality_fields(fmap);
    REQUIRE(fields.singular_values.size() == 5);
    for (int i = 0; i < 5; ++i)
        CHECK_THAT(fields.singular_values[i], Catch::Matchers::WithinAbs(1.0, 1e-12));
    for (int t = 0; t < 5; ++t) {
        // columns match some basis function up to sign (degenerate singular value 1)
        double best = 1e300;
        for (int c = 0; c < 10; ++c) {
            best = std::min(best,
                            (fields.source_fields.col(t) - basis->functions.col(c)).norm());
            best = std::min(best,
                            (fields.source_fields.col(t) + basis->functions.col(c)).norm());
        }
        CHECK(best <= 1e-10);
    }
}

TEST_CASE("quality fields are invariant to scaling of the map") {
    TriangleMesh mesh = make_icosphere(2);
    auto [permuted, truth_vec] = permuted_isometry(mesh, 15);
    auto src = std::make_shared<SpectralBasis>(
        compute_basis(mesh, 12, InnerProduct::MassWeighted));
    auto tgt = std::make_shared<SpectralBasis>(
        compute_basis(permuted, 12, InnerProduct::MassWeighted));
    FunctionalMap fmap = fmap_from_pointmap(permutation_map(truth_vec), src, tgt);
    FunctionalMap doubled = fmap;
    doubled.matrix *= 2.0;

    QualityFields a = map_quality_fields(fmap, 5);
    QualityFields b = map_quality_fields(doubled, 5);
    for (int i = 0; i < 5; ++i)
        CHECK_THAT(b.singular_values[i], Catch::Matchers::WithinRel(2.0 * a.singular_values[i], 1e-12));
    for (int t = 0; t < 5; ++t) {
        double src_diff = std::min((a.source_fields.col(t) - b.source_fields.col(t)).norm(),
                                   (a.source_fields.col(t) + b.source_fields.col(t)).norm());
        CHECK(src_diff <= 1e-10);
    }
    CHECK_THROWS_AS(map_quality_fields(fmap, 13), ValidationError);
}

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>

#include "fmr/recovery.hpp"
#include "fmr/shapes.hpp"

using namespace fmr;

namespace {

std::shared_ptr<SpectralBasis> basis_of(const TriangleMesh& mesh, int k) {
    return std::make_shared<SpectralBasis>(compute_basis(mesh, k, InnerProduct::MassWeighted));
}

PointMap permutation_map(std::vector<int> assignment) {
    PointMap map;
    map.kind = PointMap::Kind::Permutation;
    map.assignment = std::move(assignment);
    return map;
}

FunctionalMap truth_fmap(const TriangleMesh& mesh, const TriangleMesh& permuted,
                         const std::vector<int>& truth, int k) {
    return fmap_from_pointmap(permutation_map(truth), basis_of(mesh, k), basis_of(permuted, k));
}

Eigen::MatrixXd random_cloud(int dim, int count, unsigned long long seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd cloud(dim, count);
    for (int c = 0; c < count; ++c)
        for (int r = 0; r < dim; ++r) cloud(r, c) = gauss(rng);
    return cloud;
}

double exact_rate(const PointMap& map, const std::vector<int>& truth) {
    int hits = 0;
    for (int v = 0; v < map.size(); ++v) hits += (map(v) == truth[v]);
    return double(hits) / map.size();
}

} // namespace

TEST_CASE("identity functional map embeds into coincident clouds") {
    TriangleMesh mesh = make_icosphere(2);
    auto basis = basis_of(mesh, 12);
    FunctionalMap fmap;
    fmap.matrix = Eigen::MatrixXd::Identity(12, 12);
    fmap.source_basis = fmap.target_basis = basis;
    EmbeddedCloudPair clouds = embed(fmap);
    CHECK(clouds.dim() == 12);
    CHECK(clouds.source_points == clouds.target_points);
}

TEST_CASE("cloud column norms of a near-isometric pair do not collapse") {
    TriangleMesh mesh = make_icosphere(2);
    auto [permuted, truth] = permuted_isometry(mesh, 6);
    EmbeddedCloudPair clouds = embed(truth_fmap(mesh, permuted, truth, 3));
    CHECK(clouds.dim() == 3);
    Eigen::VectorXd norms(clouds.n_source());
    for (int j = 0; j < clouds.n_source(); ++j) norms[j] = clouds.source_points.col(j).norm();
    double mean = norms.mean();
    double var = (norms.array() - mean).square().mean();
    CHECK(std::sqrt(var) / mean < 1.0); // coefficient of variation
}

TEST_CASE("indicator maximum recovers the identity almost everywhere") {
    TriangleMesh mesh = make_geodesic_sphere(7); // 492 vertices
    auto basis = basis_of(mesh, 30);
    FunctionalMap fmap;
    fmap.matrix = Eigen::MatrixXd::Identity(30, 30);
    fmap.source_basis = fmap.target_basis = basis;
    RecoveryResult result = recover_max(fmap);
    std::vector<int> identity(mesh.n());
    std::iota(identity.begin(), identity.end(), 0);
    CHECK(exact_rate(result.map, identity) >= 0.99);
    CHECK(result.method == "max");
}

TEST_CASE("indicator-maximum exact matches increase with rank on noisy maps") {
    TriangleMesh mesh = make_geodesic_sphere(7);
    auto [permuted, truth] = permuted_isometry(mesh, 17);
    auto src = basis_of(mesh, 75);
    auto tgt = basis_of(permuted, 75);
    auto rate_at = [&](int k, unsigned long long seed) {
        auto s = std::make_shared<SpectralBasis>(truncate(*src, k));
        auto t = std::make_shared<SpectralBasis>(truncate(*tgt, k));
        FunctionalMap fmap = perturb_fmap(fmap_from_pointmap(permutation_map(truth), s, t),
                                          1.0, seed);
        return exact_rate(recover_max(fmap).map, truth);
    };
    for (unsigned long long seed = 1; seed <= 3; ++seed) {
        double r25 = rate_at(25, seed), r50 = rate_at(50, seed), r75 = rate_at(75, seed);
        CHECK(r25 < r50);
        CHECK(r50 < r75);
    }
}

TEST_CASE("nearest neighbor on coincident clouds is the identity at zero cost") {
    EmbeddedCloudPair clouds;
    clouds.source_points = clouds.target_points = random_cloud(10, 30, 1);
    RecoveryResult result = recover_nn(clouds);
    for (int j = 0; j < 30; ++j) CHECK(result.map(j) == j);
    CHECK(result.objective == 0.0);
}

TEST_CASE("nearest-neighbor objective lower-bounds the optimal permutation") {
    for (unsigned long long seed = 0; seed < 50; ++seed) {
        EmbeddedCloudPair clouds;
        clouds.source_points = random_cloud(6, 20, 2 * seed);
        clouds.target_points = random_cloud(6, 20, 2 * seed + 1);
        RecoveryResult nn = recover_nn(clouds);
        RecoveryResult lap = recover_lap_oracle(clouds);
        CHECK(nn.objective <= lap.objective + 1e-12);
        validate_pointmap(lap.map, 20);
        CHECK(lap.map.kind == PointMap::Kind::Permutation);
    }
}

TEST_CASE("assignment oracle matches exhaustive enumeration on 8 points") {
    for (unsigned long long seed = 0; seed < 10; ++seed) {
        EmbeddedCloudPair clouds;
        clouds.source_points = random_cloud(4, 8, 100 + 2 * seed);
        clouds.target_points = random_cloud(4, 8, 101 + 2 * seed);
        RecoveryResult lap = recover_lap_oracle(clouds);

        std::vector<int> perm(8);
        std::iota(perm.begin(), perm.end(), 0);
        double best = 1e300;
        do {
            double cost = 0.0;
            for (int j = 0; j < 8; ++j)
                cost += pair_sqdist(clouds.source_points, j, clouds.target_points, perm[j]);
            best = std::min(best, cost);
        } while (std::next_permutation(perm.begin(), perm.end()));
        CHECK_THAT(lap.objective, Catch::Matchers::WithinRel(best, 1e-12));
    }
}

TEST_CASE("full-rank assignment recovers the exact permutation on 64 vertices") {
    TriangleMesh mesh = make_grid(8, 8, 0.05, 2); // 64 vertices
    auto [permuted, truth] = permuted_isometry(mesh, 8);
    FunctionalMap fmap = truth_fmap(mesh, permuted, truth, 64); // k = n
    RecoveryResult lap = recover_lap_oracle(embed(fmap));
    CHECK(lap.map.assignment == truth);
    CHECK(lap.objective <= 1e-16);
}

TEST_CASE("assignment oracle guards") {
    EmbeddedCloudPair unequal;
    unequal.source_points = random_cloud(3, 5, 0);
    unequal.target_points = random_cloud(3, 6, 1);
    CHECK_THROWS_AS(recover_lap_oracle(unequal), ValidationError);

    EmbeddedCloudPair big;
    big.source_points = random_cloud(2, 513, 2);
    big.target_points = random_cloud(2, 513, 3);
    CHECK_THROWS_AS(recover_lap_oracle(big), ValidationError);
}

TEST_CASE("balanced NN on coincident clouds converges immediately to the identity") {
    EmbeddedCloudPair clouds;
    clouds.source_points = clouds.target_points = random_cloud(8, 25, 4);
    BalancedTrace trace;
    RecoveryResult result = recover_balanced_nn(clouds, 1.0, 20, &trace);
    for (int j = 0; j < 25; ++j) {
        CHECK(result.map(j) == j);
        CHECK(trace.backward_assignment[j] == j);
    }
    CHECK(result.iterations == 1);
    CHECK(trace.reached_fixed_point);
}

TEST_CASE("balanced NN objective is non-increasing per half-step") {
    TriangleMesh mesh = make_icosphere(2);
    auto [permuted, truth] = permuted_isometry(mesh, 31);
    FunctionalMap fmap = truth_fmap(mesh, permuted, truth, 25);
    for (unsigned long long seed = 0; seed < 5; ++seed) {
        EmbeddedCloudPair clouds = embed(perturb_fmap(fmap, 0.4, seed));
        BalancedTrace trace;
        recover_balanced_nn(clouds, 1.0, 20, &trace);
        REQUIRE(trace.objectives.size() >= 2);
        for (size_t i = 1; i < trace.objectives.size(); ++i)
            CHECK(trace.objectives[i] <=
                  trace.objectives[i - 1] + 1e-9 * std::abs(trace.objectives[i - 1]));
    }
}

TEST_CASE("balanced NN is direction-symmetric at the fixed point") {
    TriangleMesh mesh = make_icosphere(2);
    auto [permuted, truth] = permuted_isometry(mesh, 31);
    EmbeddedCloudPair clouds = embed(perturb_fmap(truth_fmap(mesh, permuted, truth, 25), 0.3, 3));

    BalancedTrace forward_trace;
    recover_balanced_nn(clouds, 1.0, 50, &forward_trace);
    REQUIRE(forward_trace.reached_fixed_point);

    EmbeddedCloudPair swapped;
    swapped.source_points = clouds.target_points;
    swapped.target_points = clouds.source_points;
    BalancedTrace swapped_trace;
    RecoveryResult backward = recover_balanced_nn(swapped, 1.0, 50, &swapped_trace);
    REQUIRE(swapped_trace.reached_fixed_point);

    // P of the swapped problem plays the role of Q in the original
    CHECK(backward.map.assignment == forward_trace.backward_assignment);
}

TEST_CASE("balanced NN matches or beats plain NN on noisy maps on average") {
    TriangleMesh mesh = make_icosphere(3);
    auto [permuted, truth] = permuted_isometry(mesh, 5);
    FunctionalMap fmap = truth_fmap(mesh, permuted, truth, 25);
    double nn_mean = 0.0, balanced_mean = 0.0;
    for (unsigned long long seed = 0; seed < 10; ++seed) {
        EmbeddedCloudPair clouds = embed(perturb_fmap(fmap, 0.3, seed));
        nn_mean += exact_rate(recover_nn(clouds).map, truth);
        balanced_mean += exact_rate(recover_balanced_nn(clouds).map, truth);
    }
    CHECK(balanced_mean >= nn_mean);
}

TEST_CASE("recovery methods are equivariant under simultaneous re-indexing") {
    const int n = 30, dim = 7;
    EmbeddedCloudPair clouds;
    clouds.source_points = random_cloud(dim, n, 10);
    clouds.target_points = random_cloud(dim, n, 11);

    std::vector<int> relabel(n);
    std::iota(relabel.begin(), relabel.end(), 0);
    std::mt19937_64 rng(12);
    std::shuffle(relabel.begin(), relabel.end(), rng);

    EmbeddedCloudPair relabeled;
    relabeled.source_points.resize(dim, n);
    relabeled.target_points.resize(dim, n);
    for (int j = 0; j < n; ++j) {
        relabeled.source_points.col(relabel[j]) = clouds.source_points.col(j);
        relabeled.target_points.col(relabel[j]) = clouds.target_points.col(j);
    }

    auto check_equivariant = [&](auto&& recover) {
        PointMap base = recover(clouds).map;
        PointMap moved = recover(relabeled).map;
        for (int j = 0; j < n; ++j) CHECK(moved(relabel[j]) == relabel[base(j)]);
    };
    check_equivariant([](const EmbeddedCloudPair& c) { return recover_nn(c); });
    check_equivariant([](const EmbeddedCloudPair& c) { return recover_balanced_nn(c); });
    check_equivariant([](const EmbeddedCloudPair& c) { return recover_lap_oracle(c); });
}

TEST_CASE("tree and brute-force nearest neighbors agree bit for bit") {
    for (int dim : {2, 3, 16, 32, 40}) {
        Eigen::MatrixXd data = random_cloud(dim, 80, 20 + dim);
        Eigen::MatrixXd queries = random_cloud(dim, 50, 21 + dim);
        // exact duplicates exercise the lowest-index tie-break
        data.col(40) = data.col(7);
        queries.col(3) = data.col(7);
        CHECK(nearest_columns(data, queries) == nearest_columns_bruteforce(data, queries));
    }
}

TEST_CASE("reported objectives are recomputable from the returned map") {
    TriangleMesh mesh = make_icosphere(2);
    auto [permuted, truth] = permuted_isometry(mesh, 23);
    EmbeddedCloudPair clouds = embed(perturb_fmap(truth_fmap(mesh, permuted, truth, 20), 0.3, 1));
    for (const RecoveryResult& r :
         {recover_nn(clouds), recover_balanced_nn(clouds), recover_lap_oracle(clouds)}) {
        double recomputed = assignment_objective(clouds, r.map);
        CHECK(std::abs(r.objective - recomputed) <= 1e-9 * std::max(1.0, recomputed));
    }
}

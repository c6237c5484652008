// fmr — command-line driver for functional-map correspondence recovery.
//
// Subcommands: synth-pair, recover, sweep, eval, basis, rerun. Every run
// writes a manifest.json recording the command and all parameters; `fmr rerun
// <manifest> --out <dir>` reproduces the run bit-identically. Exit codes:
// 0 success, 2 input validation, 3 numerical failure, 4 I/O.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "fmr/fmr.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

void write_manifest(const fs::path& out_dir, const std::string& command, const json& options) {
    json manifest;
    manifest["command"] = command;
    manifest["version"] = kVersion;
    manifest["options"] = options;
    std::ofstream out(out_dir / "manifest.json");
    if (!out) throw fmr::IOError("cannot write " + (out_dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
}

fs::path prepare_out_dir(const std::string& out) {
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw fmr::IOError("cannot create output directory '" + out + "': " + ec.message());
    return dir;
}

std::ofstream open_csv(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw fmr::IOError("cannot write '" + path.string() + "'");
    return out;
}

// Assignment file -> PointMap; marked as a permutation when it is a bijection
// onto the target vertex set.
fmr::PointMap load_pointmap(const std::string& path, int n_target) {
    fmr::PointMap map;
    map.assignment = fmr::load_assignment(path);
    map.kind = fmr::PointMap::Kind::LeftStochastic;
    fmr::validate_pointmap(map, n_target);
    if (map.size() == n_target) {
        std::vector<char> hit(n_target, 0);
        bool bijection = true;
        for (int i = 0; i < map.size() && bijection; ++i) bijection = !hit[map(i)]++;
        if (bijection) map.kind = fmr::PointMap::Kind::Permutation;
    }
    return map;
}

void write_curve_files(const fs::path& out_dir, const fmr::PointMap& map,
                       const fmr::PointMap& truth, const fmr::TriangleMesh& target_mesh) {
    fmr::GeodesicCache cache(target_mesh);
    std::vector<double> errors = fmr::per_vertex_errors(map, truth, cache);
    fmr::ErrorCurve curve = fmr::curve_from_errors(errors, fmr::default_thresholds());

    auto curve_csv = open_csv(out_dir / "curve.csv");
    curve_csv << "threshold,fraction\n";
    for (int t = 0; t < curve.thresholds.size(); ++t)
        curve_csv << fmr::format_g17(curve.thresholds[t]) << ','
                  << fmr::format_g17(curve.fractions[t]) << '\n';

    auto errors_csv = open_csv(out_dir / "errors.csv");
    errors_csv << "vertex,normalized_geodesic_error\n";
    for (size_t i = 0; i < errors.size(); ++i)
        errors_csv << i << ',' << fmr::format_g17(errors[i]) << '\n';

    auto summary_csv = open_csv(out_dir / "summary.csv");
    summary_csv << "exact_match_pct,mean_error\n"
                << fmr::format_g17(curve.exact_match_pct) << ','
                << fmr::format_g17(curve.mean_error) << '\n';
}

fmr::RefinementConfig config_from_options(const json& o) {
    fmr::RefinementConfig config;
    config.recovery_method = fmr::recovery_method_from_string(o.at("method"));
    config.outer_iterations = o.at("refine_iterations");
    config.ridge = o.at("ridge");
    config.convergence_tol = o.at("convergence_tol");
    config.balanced_lambda = o.at("balanced_lambda");
    config.balanced_rounds = o.at("balanced_rounds");
    config.prob_lambda = o.at("prob_lambda");
    config.prob_iterations = o.at("prob_iterations");
    config.kernel_width = o.at("kernel_width");
    return config;
}

void run_synth_pair(const json& o, const fs::path& out_dir) {
    const std::string kind = o.at("kind");
    fmr::TriangleMesh base = fmr::load_mesh(o.at("base"));
    fmr::save_mesh((out_dir / "source.off").string(), base);

    if (kind == "permuted-isometry") {
        auto [target, truth] = fmr::permuted_isometry(base, unsigned(o.at("seed").get<unsigned long long>()));
        fmr::save_mesh((out_dir / "target.off").string(), target);
        fmr::save_assignment((out_dir / "ground_truth.txt").string(), truth);
    } else if (kind == "radial-deformation") {
        fmr::TriangleMesh target = fmr::radial_deformation(
            base, o.at("magnitude"), unsigned(o.at("seed").get<unsigned long long>()));
        fmr::save_mesh((out_dir / "target.off").string(), target);
        fmr::save_assignment((out_dir / "ground_truth.txt").string(),
                             fmr::identity_pointmap(base.n()).assignment);
    } else {
        throw fmr::ValidationError("synth-pair: unknown kind '" + kind + "'");
    }
    write_manifest(out_dir, "synth-pair", o);
}

void run_basis(const json& o, const fs::path& out_dir) {
    fmr::TriangleMesh mesh = fmr::load_mesh(o.at("mesh"));
    fmr::SpectralBasis basis =
        fmr::compute_basis(mesh, o.at("k"), fmr::inner_product_from_string(o.at("mode")));
    fmr::save_basis((out_dir / "basis.txt").string(), basis);
    write_manifest(out_dir, "basis", o);
}

void run_eval(const json& o, const fs::path& out_dir) {
    fmr::TriangleMesh target_mesh = fmr::load_mesh(o.at("target_mesh"));
    fmr::PointMap map = load_pointmap(o.at("map"), target_mesh.n());
    fmr::PointMap truth = load_pointmap(o.at("truth"), target_mesh.n());
    if (map.size() != truth.size())
        throw fmr::ValidationError("eval: map and ground truth have different lengths");
    write_curve_files(out_dir, map, truth, target_mesh);
    write_manifest(out_dir, "eval", o);
}

void run_recover(const json& o, const fs::path& out_dir) {
    fmr::TriangleMesh source_mesh = fmr::load_mesh(o.at("source"));
    fmr::TriangleMesh target_mesh = fmr::load_mesh(o.at("target"));
    const int k = o.at("k");
    const fmr::InnerProduct mode = fmr::inner_product_from_string(o.at("mode"));

    auto src = std::make_shared<fmr::SpectralBasis>(fmr::compute_basis(source_mesh, k, mode));
    auto tgt = std::make_shared<fmr::SpectralBasis>(fmr::compute_basis(target_mesh, k, mode));

    fmr::PointMap truth;
    const std::string truth_path = o.at("truth");
    if (!truth_path.empty()) {
        truth = load_pointmap(truth_path, target_mesh.n());
        if (truth.size() != source_mesh.n())
            throw fmr::ValidationError("recover: ground-truth length != source vertex count");
    }

    fmr::FunctionalMap fmap;
    const std::string fmap_path = o.at("fmap");
    if (!fmap_path.empty()) {
        fmap.matrix = fmr::load_matrix(fmap_path);
        if (fmap.matrix.rows() != k || fmap.matrix.cols() != k)
            throw fmr::ValidationError("recover: functional-map file is not k x k for --k " +
                                       std::to_string(k));
        fmap.source_basis = src;
        fmap.target_basis = tgt;
    } else if (!truth_path.empty()) {
        fmap = fmr::fmap_from_pointmap(truth, src, tgt);
    } else {
        throw fmr::ValidationError("recover: need --fmap or --truth to obtain a functional map");
    }

    const double noise = o.at("noise");
    if (noise > 0.0) fmap = fmr::perturb_fmap(fmap, noise, o.at("seed").get<unsigned long long>());

    fmr::RefinementConfig config = config_from_options(o);
    const std::string refine = o.at("refine");

    fmr::PointMap map;
    fmr::FunctionalMap refined = fmap;
    fmr::RefinementTrace trace;
    if (refine == "none") {
        map = fmr::detail::run_recovery(fmap, config).map;
    } else {
        if (refine == "icp") config.update_rule = fmr::UpdateRule::OrthogonalProcrustes;
        else if (refine == "least_squares_r") config.update_rule = fmr::UpdateRule::LeastSquaresR;
        else throw fmr::ValidationError("recover: unknown refinement '" + refine +
                                        "' (none|icp|least_squares_r)");
        fmr::RefineOutput result =
            fmr::refine_loop(fmap, config, truth_path.empty() ? nullptr : &truth);
        map = std::move(result.map);
        refined = std::move(result.fmap);
        trace = std::move(result.trace);
    }

    fmr::save_assignment((out_dir / "pointmap.txt").string(), map.assignment);
    fmr::save_matrix((out_dir / "refined_c.txt").string(), refined.matrix);

    auto trace_csv = open_csv(out_dir / "trace.csv");
    trace_csv << "iteration,objective,exact_match_pct,r_identity_distance\n";
    for (const auto& row : trace.rows)
        trace_csv << row.iteration << ',' << fmr::format_g17(row.objective) << ','
                  << fmr::format_g17(row.exact_match_pct) << ','
                  << fmr::format_g17(row.r_identity_distance) << '\n';

    if (!truth_path.empty()) write_curve_files(out_dir, map, truth, target_mesh);
    write_manifest(out_dir, "recover", o);
}

void run_sweep(const json& o, const fs::path& out_dir) {
    fmr::TriangleMesh source_mesh = fmr::load_mesh(o.at("source"));
    fmr::TriangleMesh target_mesh = fmr::load_mesh(o.at("target"));
    fmr::PointMap truth = load_pointmap(o.at("truth"), target_mesh.n());

    std::vector<int> ks = o.at("ks").get<std::vector<int>>();
    std::vector<fmr::RecoveryMethod> methods;
    for (const std::string& name : o.at("methods"))
        methods.push_back(fmr::recovery_method_from_string(name));

    std::vector<fmr::SweepRow> rows = fmr::rank_sweep(
        source_mesh, target_mesh, truth, ks, methods,
        fmr::inner_product_from_string(o.at("mode")), {}, o.at("noise"),
        o.at("seed").get<unsigned long long>());

    auto sweep_csv = open_csv(out_dir / "sweep.csv");
    sweep_csv << "k,method,exact_pct,pct_below_002\n";
    for (const auto& row : rows)
        sweep_csv << row.k << ',' << row.method << ',' << fmr::format_g17(row.exact_pct) << ','
                  << fmr::format_g17(row.pct_below_002) << '\n';

    // table layout: one row per rank, one exact-match column per method
    auto table_csv = open_csv(out_dir / "table.csv");
    table_csv << "k";
    for (const auto& m : methods) table_csv << ',' << fmr::to_string(m);
    table_csv << '\n';
    for (size_t i = 0; i < rows.size(); i += methods.size()) {
        table_csv << rows[i].k;
        for (size_t m = 0; m < methods.size(); ++m)
            table_csv << ',' << fmr::format_g17(rows[i + m].exact_pct);
        table_csv << '\n';
    }
    write_manifest(out_dir, "sweep", o);
}

void dispatch(const std::string& command, const json& options, const std::string& out) {
    fs::path out_dir = prepare_out_dir(out);
    if (command == "synth-pair") run_synth_pair(options, out_dir);
    else if (command == "basis") run_basis(options, out_dir);
    else if (command == "eval") run_eval(options, out_dir);
    else if (command == "recover") run_recover(options, out_dir);
    else if (command == "sweep") run_sweep(options, out_dir);
    else throw fmr::ValidationError("unknown command '" + command + "' in manifest");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"point-to-point correspondence recovery from low-rank functional maps"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string command;
    std::string out;
    json options;

    // --- synth-pair ---------------------------------------------------------
    auto* synth = app.add_subcommand("synth-pair", "generate a synthetic mesh pair + ground truth");
    std::string sp_kind, sp_base;
    unsigned long long sp_seed = 0;
    double sp_magnitude = 0.3;
    synth->add_option("--kind", sp_kind, "permuted-isometry | radial-deformation")->required();
    synth->add_option("--base", sp_base, "base mesh file (off/ply/obj)")->required();
    synth->add_option("--seed", sp_seed, "random seed");
    synth->add_option("--magnitude", sp_magnitude, "deformation magnitude (radial-deformation)");
    synth->add_option("--out", out, "output directory")->required();
    synth->callback([&] {
        command = "synth-pair";
        options = {{"kind", sp_kind}, {"base", sp_base}, {"seed", sp_seed},
                   {"magnitude", sp_magnitude}};
    });

    // --- basis --------------------------------------------------------------
    auto* basis = app.add_subcommand("basis", "compute and export a spectral basis");
    std::string b_mesh, b_mode = "mass";
    int b_k = 30;
    basis->add_option("--mesh", b_mesh, "mesh file")->required();
    basis->add_option("--k", b_k, "basis rank");
    basis->add_option("--mode", b_mode, "inner product: uniform | mass");
    basis->add_option("--out", out, "output directory")->required();
    basis->callback([&] {
        command = "basis";
        options = {{"mesh", b_mesh}, {"k", b_k}, {"mode", b_mode}};
    });

    // --- eval ---------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "geodesic-error curve from map files");
    std::string e_map, e_truth, e_mesh;
    eval->add_option("--map", e_map, "predicted assignment file")->required();
    eval->add_option("--truth", e_truth, "ground-truth assignment file")->required();
    eval->add_option("--target-mesh", e_mesh, "target mesh file")->required();
    eval->add_option("--out", out, "output directory")->required();
    eval->callback([&] {
        command = "eval";
        options = {{"map", e_map}, {"truth", e_truth}, {"target_mesh", e_mesh}};
    });

    // --- recover ------------------------------------------------------------
    auto* recover = app.add_subcommand("recover", "end-to-end recovery / refinement run");
    std::string r_source, r_target, r_truth, r_fmap, r_mode = "mass", r_method = "nn",
                r_refine = "none";
    int r_k = 30;
    double r_noise = 0.0;
    unsigned long long r_seed = 0;
    fmr::RefinementConfig defaults;
    int r_refine_iterations = defaults.outer_iterations;
    double r_ridge = defaults.ridge, r_tol = defaults.convergence_tol;
    double r_balanced_lambda = defaults.balanced_lambda, r_prob_lambda = defaults.prob_lambda;
    int r_balanced_rounds = defaults.balanced_rounds, r_prob_iterations = defaults.prob_iterations;
    double r_kernel_width = defaults.kernel_width;
    recover->add_option("--source", r_source, "source mesh file")->required();
    recover->add_option("--target", r_target, "target mesh file")->required();
    recover->add_option("--truth", r_truth, "ground-truth assignment file (optional)");
    recover->add_option("--fmap", r_fmap, "functional-map matrix file (built from truth if absent)");
    recover->add_option("--k", r_k, "basis rank");
    recover->add_option("--mode", r_mode, "inner product: uniform | mass");
    recover->add_option("--method", r_method, "max | nn | balanced_nn | probabilistic");
    recover->add_option("--refine", r_refine, "none | icp | least_squares_r");
    recover->add_option("--noise", r_noise, "functional-map perturbation level");
    recover->add_option("--seed", r_seed, "random seed for the perturbation");
    recover->add_option("--refine-iterations", r_refine_iterations, "outer refinement iterations");
    recover->add_option("--ridge", r_ridge, "ridge of the least-squares R update");
    recover->add_option("--convergence-tol", r_tol, "relative objective convergence tolerance");
    recover->add_option("--balanced-lambda", r_balanced_lambda, "balanced-NN coupling weight");
    recover->add_option("--balanced-rounds", r_balanced_rounds, "balanced-NN max rounds");
    recover->add_option("--prob-lambda", r_prob_lambda, "GMM displacement regularization");
    recover->add_option("--prob-iterations", r_prob_iterations, "GMM EM iterations");
    recover->add_option("--kernel-width", r_kernel_width, "GMM smoothing kernel width");
    recover->add_option("--out", out, "output directory")->required();
    recover->callback([&] {
        command = "recover";
        options = {{"source", r_source},
                   {"target", r_target},
                   {"truth", r_truth},
                   {"fmap", r_fmap},
                   {"k", r_k},
                   {"mode", r_mode},
                   {"method", r_method},
                   {"refine", r_refine},
                   {"noise", r_noise},
                   {"seed", r_seed},
                   {"refine_iterations", r_refine_iterations},
                   {"ridge", r_ridge},
                   {"convergence_tol", r_tol},
                   {"balanced_lambda", r_balanced_lambda},
                   {"balanced_rounds", r_balanced_rounds},
                   {"prob_lambda", r_prob_lambda},
                   {"prob_iterations", r_prob_iterations},
                   {"kernel_width", r_kernel_width}};
    });

    // --- sweep --------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "rank sweep over recovery methods");
    std::string s_source, s_target, s_truth, s_mode = "mass";
    std::vector<int> s_ks;
    std::vector<std::string> s_methods;
    double s_noise = 0.0;
    unsigned long long s_seed = 0;
    sweep->add_option("--source", s_source, "source mesh file")->required();
    sweep->add_option("--target", s_target, "target mesh file")->required();
    sweep->add_option("--truth", s_truth, "ground-truth assignment file")->required();
    sweep->add_option("--ks", s_ks, "ascending basis ranks")->required()->delimiter(',');
    sweep->add_option("--methods", s_methods, "recovery methods")->required()->delimiter(',');
    sweep->add_option("--mode", s_mode, "inner product: uniform | mass");
    sweep->add_option("--noise", s_noise, "functional-map perturbation level");
    sweep->add_option("--seed", s_seed, "random seed for the perturbation");
    sweep->add_option("--out", out, "output directory")->required();
    sweep->callback([&] {
        command = "sweep";
        options = {{"source", s_source}, {"target", s_target}, {"truth", s_truth},
                   {"ks", s_ks},         {"methods", s_methods}, {"mode", s_mode},
                   {"noise", s_noise},   {"seed", s_seed}};
    });

    // --- rerun --------------------------------------------------------------
    auto* rerun = app.add_subcommand("rerun", "reproduce a run from its manifest");
    std::string m_path;
    rerun->add_option("manifest", m_path, "manifest.json of a previous run")->required();
    rerun->add_option("--out", out, "output directory")->required();
    rerun->callback([&] { command = "rerun"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (command == "rerun") {
            std::ifstream in(m_path);
            if (!in) throw fmr::IOError("cannot open manifest '" + m_path + "'");
            json manifest;
            try {
                manifest = json::parse(in);
                command = manifest.at("command").get<std::string>();
                options = manifest.at("options");
            } catch (const json::exception& e) {
                throw fmr::ParseError("malformed manifest '" + m_path + "': " + e.what());
            }
        }
        dispatch(command, options, out);
    } catch (const fmr::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const fmr::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const fmr::NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const fmr::IOError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const json::exception& e) {
        std::cerr << "error: bad manifest field: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

// Command-line front end for the unmixing chain:
//   generate -> idest -> extract -> unmix -> eval
// File formats: cube/stack = JSON header + raw f32le payload, matrices =
// CSV, maps = binary PGM, reports = key=value lines.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "hsu/hsu.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string input;
    std::string output_dir = ".";
    int p = 3;
    std::uint64_t seed = 0;
    int threads = 0;
};

hsu::ExtractionResult run_extraction(const hsu::SpectralCube& cube, const std::string& algorithm,
                                     int p, std::uint64_t seed, int threads) {
    if (algorithm == "vca") return hsu::vca(cube, p, seed);
    if (algorithm == "kmeans") {
        hsu::KmeansConfig cfg;
        cfg.threads = threads;
        return hsu::spherical_kmeans(cube, p, seed, cfg);
    }
    throw hsu::UsageError("unknown extraction algorithm: " + algorithm);
}

void write_maps(const hsu::UnmixResult& result, int lines, int samples, const fs::path& dir) {
    const auto& a = result.abundances.data;
    const auto& psi = result.scalings.data;
    for (int p = 0; p < a.rows(); ++p) {
        hsu::write_pgm(a.row(p).transpose(), lines, samples, 1.0,
                       dir / ("abundance_" + std::to_string(p) + ".pgm"));
        const hsu::Vector row = psi.row(p).transpose();
        hsu::write_pgm(row, lines, samples, hsu::percentile(row, 0.99),
                       dir / ("scaling_" + std::to_string(p) + ".pgm"));
    }
}

int cmd_generate(const CommonArgs& common, const hsu::SceneSpec& spec) {
    auto [cube, truth] = hsu::generate_scene(spec, common.threads);
    const fs::path dir(common.output_dir);
    fs::create_directories(dir);
    hsu::write_cube(cube, dir / "cube.json");
    hsu::write_matrix_csv(truth.abundances.data, dir / "gt_abundances.csv");
    hsu::write_matrix_csv(truth.scalings.data, dir / "gt_scalings.csv");
    hsu::write_matrix_csv(truth.library.references.data, dir / "gt_references.csv");
    hsu::write_stack(truth.locals, dir / "gt_locals.json");
    std::cout << "wrote scene (" << spec.lines << "x" << spec.samples << ", " << spec.bands
              << " bands, P=" << spec.classes << ") to " << dir.string() << "\n";
    return 0;
}

int cmd_idest(const CommonArgs& common, const std::string& output) {
    const hsu::SpectralCube cube = hsu::read_cube(common.input);
    const hsu::IdEstimate est = hsu::estimate_id(cube, common.threads);
    std::vector<std::pair<std::string, std::string>> fields = {
        {"dimension", std::to_string(est.dimension)},
        {"mean_noise_power", hsu::format_double(est.noise_band_power.mean())},
        {"leading_eigenvalue", hsu::format_double(est.eigen_signal_power[0])},
    };
    for (const auto& [key, value] : fields) std::cout << key << "=" << value << "\n";
    if (!output.empty()) hsu::write_report(fields, output);
    return 0;
}

int cmd_extract(const CommonArgs& common, const std::string& algorithm, const std::string& output) {
    const hsu::SpectralCube cube = hsu::read_cube(common.input);
    const auto result = run_extraction(cube, algorithm, common.p, common.seed, common.threads);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    const fs::path out = output.empty() ? fs::path(common.output_dir) / "endmembers.csv" : fs::path(output);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    hsu::write_matrix_csv(result.endmembers.data, out);
    std::cout << "wrote " << result.endmembers.count() << " endmembers to " << out.string() << "\n";
    return 0;
}

int cmd_unmix(const CommonArgs& common, const std::string& method, const std::string& algorithm,
              const std::string& refs_file, hsu::SolverConfig cfg) {
    const hsu::SpectralCube cube = hsu::read_cube(common.input);
    cfg.threads = common.threads;
    cfg.seed = common.seed;

    hsu::EndmemberMatrix refs;
    if (!refs_file.empty()) {
        refs.data = hsu::read_matrix_csv(refs_file);
        if (refs.data.rows() != cube.bands())
            throw hsu::UsageError("reference file " + refs_file + ": band count mismatch with cube");
    } else {
        refs = run_extraction(cube, algorithm, common.p, common.seed, common.threads).endmembers;
    }

    hsu::UnmixResult result;
    if (method == "fclsu") {
        result = hsu::fclsu(cube, refs, cfg);
    } else if (method == "sclsu") {
        result = hsu::sclsu(cube, refs, cfg);
    } else if (method == "elmm") {
        if (cfg.lambda_s <= 0.0) throw hsu::UsageError("elmm requires --lambda-s > 0");
        result = hsu::elmm(cube, refs, cfg, hsu::sclsu(cube, refs, cfg));
    } else if (method == "relmm") {
        if (cfg.lambda_s <= 0.0) throw hsu::UsageError("relmm requires --lambda-s > 0");
        result = hsu::relmm(cube, refs.normalized ? refs : refs.unit_normalized(), cfg);
    } else {
        throw hsu::UsageError("unknown method: " + method);
    }

    const fs::path dir(common.output_dir);
    fs::create_directories(dir);
    hsu::write_matrix_csv(result.abundances.data, dir / "abundances.csv");
    hsu::write_matrix_csv(result.scalings.data, dir / "scalings.csv");
    hsu::write_matrix_csv(result.references.data, dir / "s0.csv");
    hsu::Matrix trace(result.objective_trace.size(), 1);
    for (size_t i = 0; i < result.objective_trace.size(); ++i) trace(i, 0) = result.objective_trace[i];
    hsu::write_matrix_csv(trace, dir / "objective_trace.csv");
    hsu::write_stack(result.locals, dir / "locals.json");
    write_maps(result, cube.lines, cube.samples, dir);
    hsu::write_report(
        {
            {"method", method},
            {"recon_rmse", hsu::format_double(result.reconstruction_rmse)},
            {"iterations", std::to_string(result.iterations)},
            {"converged", result.converged ? "true" : "false"},
            {"flagged_pixels", std::to_string(result.flagged_pixels.size())},
        },
        dir / "unmix_report.txt");
    std::cout << "method=" << method << " recon_rmse=" << result.reconstruction_rmse
              << " iterations=" << result.iterations << "\n";
    return 0;
}

int cmd_eval(const std::string& est_dir, const std::string& truth_dir, const std::string& output,
             const std::string& csv_append, const std::string& label) {
    const fs::path est(est_dir), truth(truth_dir);
    hsu::UnmixResult result;
    result.abundances.data = hsu::read_matrix_csv(est / "abundances.csv");
    result.scalings.data = hsu::read_matrix_csv(est / "scalings.csv");
    result.references.data = hsu::read_matrix_csv(est / "s0.csv");
    result.locals = hsu::read_stack(est / "locals.json");

    const hsu::AbundanceMatrix true_a(hsu::read_matrix_csv(truth / "gt_abundances.csv"));
    const hsu::EndmemberMatrix true_refs(hsu::read_matrix_csv(truth / "gt_references.csv"));
    const hsu::LocalEndmemberStack true_locals = hsu::read_stack(truth / "gt_locals.json");
    const hsu::SpectralCube cube = hsu::read_cube(truth / "cube.json");

    const hsu::EvalReport report =
        hsu::evaluate_unmix(result, true_a, true_locals, true_refs, cube);

    std::string perm;
    for (size_t i = 0; i < report.permutation.size(); ++i)
        perm += (i ? "," : "") + std::to_string(report.permutation[i]);
    std::vector<std::pair<std::string, std::string>> fields = {
        {"armse", hsu::format_double(report.armse)},
        {"mean_sam_deg", hsu::format_double(report.mean_sam_deg)},
        {"recon_rmse", hsu::format_double(report.recon_rmse)},
        {"permutation", perm},
    };
    for (const auto& [key, value] : fields) std::cout << key << "=" << value << "\n";
    if (!output.empty()) hsu::write_report(fields, output);
    if (!csv_append.empty()) {
        const bool fresh = !fs::exists(csv_append);
        std::ofstream f(csv_append, std::ios::app);
        if (!f) throw hsu::UsageError("cannot open for writing: " + csv_append);
        if (fresh) f << "label,armse,mean_sam_deg,recon_rmse\n";
        f << label << "," << hsu::format_double(report.armse) << ","
          << hsu::format_double(report.mean_sam_deg) << ","
          << hsu::format_double(report.recon_rmse) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hyperspectral unmixing under spectral variability"};
    app.require_subcommand(1);

    CommonArgs common;
    hsu::SceneSpec spec;
    hsu::SolverConfig cfg;
    std::string method = "relmm", algorithm = "kmeans", refs_file, output, est_dir, truth_dir,
                csv_append, label = "run";
    double snr_db = 30.0, shadow_fraction = 0.0;

    auto add_common = [&](CLI::App* cmd, bool needs_input) {
        if (needs_input) cmd->add_option("--input", common.input, "cube header (.json)")->required();
        cmd->add_option("--output-dir", common.output_dir, "output directory");
        cmd->add_option("--seed", common.seed, "RNG seed");
        cmd->add_option("--threads", common.threads, "worker threads (0 = hardware)");
    };

    auto* generate = app.add_subcommand("generate", "synthesize a variability scene with ground truth");
    add_common(generate, false);
    generate->add_option("--p", spec.classes, "number of endmember classes");
    generate->add_option("--bands", spec.bands, "spectral bands");
    generate->add_option("--lines", spec.lines, "image lines");
    generate->add_option("--samples", spec.samples, "image samples");
    generate->add_option("--variants", spec.variants_per_class, "variants per class");
    generate->add_option("--alpha", spec.dirichlet_alpha, "Dirichlet concentration");
    generate->add_option("--snr-db", snr_db, "noise level (inf disables noise)");
    generate->add_option("--shadow-fraction", shadow_fraction, "fraction of near-zero pixels");

    auto* idest = app.add_subcommand("idest", "estimate the signal-subspace dimension");
    add_common(idest, true);
    idest->add_option("--output", output, "report file");

    auto* extract = app.add_subcommand("extract", "extract reference endmembers");
    add_common(extract, true);
    extract->add_option("--p", common.p, "number of endmembers")->required();
    extract->add_option("--extract", algorithm, "vca or kmeans");
    extract->add_option("--output", output, "endmember CSV path");

    auto* unmix = app.add_subcommand("unmix", "estimate abundances, scalings and endmembers");
    add_common(unmix, true);
    unmix->add_option("--p", common.p, "number of endmembers");
    unmix->add_option("--method", method, "fclsu | sclsu | elmm | relmm");
    unmix->add_option("--extract", algorithm, "vca or kmeans (when --refs is absent)");
    unmix->add_option("--refs", refs_file, "reference endmember CSV");
    unmix->add_option("--lambda-s", cfg.lambda_s, "local endmember tether weight");
    unmix->add_option("--lambda-s0", cfg.lambda_s0, "volume regularization weight");
    unmix->add_option("--epsilon", cfg.epsilon, "outer convergence tolerance");
    unmix->add_option("--max-iter", cfg.max_outer_iter, "outer iteration cap");
    unmix->add_flag("--unnormalized-s0", cfg.unnormalized_s0, "closed-form S0 update (no unit-norm constraint)");

    auto* eval = app.add_subcommand("eval", "score an unmix run against ground truth");
    eval->add_option("--est-dir", est_dir, "unmix output directory")->required();
    eval->add_option("--truth-dir", truth_dir, "generate output directory")->required();
    eval->add_option("--output", output, "report file");
    eval->add_option("--csv", csv_append, "append a row to this sweep CSV");
    eval->add_option("--label", label, "label for the sweep CSV row");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    try {
        if (generate->parsed()) {
            spec.seed = common.seed;
            spec.snr_db = snr_db;
            spec.shadow_fraction = shadow_fraction;
            return cmd_generate(common, spec);
        }
        if (idest->parsed()) return cmd_idest(common, output);
        if (extract->parsed()) return cmd_extract(common, algorithm, output);
        if (unmix->parsed()) return cmd_unmix(common, method, algorithm, refs_file, cfg);
        if (eval->parsed()) return cmd_eval(est_dir, truth_dir, output, csv_append, label);
    } catch (const hsu::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const hsu::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "specfuse/csvio.hpp"
#include "specfuse/cube.hpp"
#include "specfuse/degrade.hpp"
#include "specfuse/errors.hpp"
#include "specfuse/losses.hpp"
#include "specfuse/metrics.hpp"
#include "specfuse/model.hpp"
#include "specfuse/rng.hpp"
#include "specfuse/synth.hpp"
#include "specfuse/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace specfuse;

namespace {

void apply_threads_hint(int threads_flag) {
    int n = threads_flag;
    if (n <= 0) {
        if (const char* env = std::getenv("SPECFUSE_THREADS")) {
            char* end = nullptr;
            const long v = std::strtol(env, &end, 10);
            if (end && *end == '\0' && v >= 1) n = static_cast<int>(v);
        }
    }
    if (n >= 1) Eigen::setNbThreads(n);
}

fs::path ensure_out_dir(const std::string& out) {
    if (out.empty()) throw ConfigError("--out directory is required");
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory: " + out);
    return dir;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << j.dump(2) << "\n";
}

std::string constraint_name(AbundanceConstraint c) {
    return c == AbundanceConstraint::Softmax ? "softmax" : "clamp";
}

std::vector<std::string> ablation_names(const Ablation& a) {
    std::vector<std::string> out;
    if (a.drop_Za) out.push_back("drop_Za");
    if (a.drop_Zb) out.push_back("drop_Zb");
    if (a.drop_Y) out.push_back("drop_Y");
    if (a.drop_Ylr) out.push_back("drop_Ylr");
    return out;
}

void set_ablation(Ablation& a, const std::string& name) {
    if (name == "drop_Za")
        a.drop_Za = true;
    else if (name == "drop_Zb")
        a.drop_Zb = true;
    else if (name == "drop_Y")
        a.drop_Y = true;
    else if (name == "drop_Ylr")
        a.drop_Ylr = true;
    else
        throw ConfigError("unknown ablation '" + name +
                          "' (expected drop_Za, drop_Zb, drop_Y, or drop_Ylr)");
}

// ---- simulate ----

struct SimulateArgs {
    bool synthetic = false;
    int size = 48, bands = 31, p_true = 4, ratio = 4, msi_bands = 3;
    double sigma = 0.5;
    std::uint64_t seed = 0;
    std::string hrhsi, srf_table, out;
    bool normalize = false;
};

int cmd_simulate(const SimulateArgs& a) {
    const fs::path dir = ensure_out_dir(a.out);
    json manifest;
    manifest["command"] = "simulate";
    std::vector<std::string> outputs;
    auto put_cube = [&](const ImageCube& cube, const char* name) {
        save_cube(cube, (dir / name).string());
        outputs.push_back(name);
        outputs.push_back(std::string(name) + ".json");
    };

    if (a.synthetic) {
        SceneConfig cfg;
        cfg.rows = cfg.cols = a.size;
        cfg.bands = a.bands;
        cfg.p_true = a.p_true;
        cfg.ratio = a.ratio;
        cfg.sigma = a.sigma;
        cfg.msi_bands = a.msi_bands;
        cfg.seed = a.seed;
        const SyntheticScene scene = gen_scene(cfg);
        put_cube(scene.hrhsi, "hrhsi.cube");
        put_cube(scene.observed.lrhsi, "lrhsi.cube");
        put_cube(scene.observed.hrmsi, "hrmsi.cube");
        write_matrix_csv((dir / "true_psf.csv").string(), scene.psf.kernel);
        write_srf_weights_csv((dir / "true_srf.csv").string(), scene.srf_weights);
        write_matrix_csv((dir / "true_endmembers.csv").string(), scene.endmembers);
        write_matrix_csv((dir / "true_abundance.csv").string(), scene.abundance);
        std::vector<std::pair<double, double>> intervals;
        for (const auto& b : scene.coverage.bands) intervals.emplace_back(b.lo_nm, b.hi_nm);
        write_coverage_csv((dir / "coverage.csv").string(), intervals);
        for (const char* n : {"true_psf.csv", "true_srf.csv", "true_endmembers.csv",
                              "true_abundance.csv", "coverage.csv"})
            outputs.push_back(n);
        manifest["mode"] = "synthetic";
        manifest["rows"] = cfg.rows;
        manifest["cols"] = cfg.cols;
        manifest["bands"] = cfg.bands;
        manifest["p_true"] = cfg.p_true;
        manifest["ratio"] = cfg.ratio;
        manifest["sigma"] = cfg.sigma;
        manifest["msi_bands"] = cfg.msi_bands;
        manifest["seed"] = cfg.seed;
    } else {
        if (a.hrhsi.empty())
            throw ConfigError("simulate needs --synthetic or --hrhsi PATH");
        if (a.srf_table.empty())
            throw ConfigError("simulate --hrhsi needs --srf TABLE.csv");
        const ImageCube hrhsi = load_cube(a.hrhsi, a.normalize);
        if (hrhsi.wavelengths_nm.empty())
            throw ConfigError("input cube has no wavelengths; band grouping needs them: " +
                              a.hrhsi);
        const SrfTable table = read_srf_table(a.srf_table);
        const SpectralCoverage cov = build_coverage(hrhsi.wavelengths_nm, table.intervals);
        std::vector<Eigen::VectorXd> weights = table.weights;
        if (weights.empty())
            for (const auto& b : cov.bands)
                weights.push_back(Eigen::VectorXd::Ones(
                    static_cast<Eigen::Index>(b.hsi_indices.size())));
        const GaussianPsf psf = gaussian_kernel(a.ratio, a.sigma);
        const DegradedTriplet tri = simulate_triplet(hrhsi, psf, cov, weights);
        put_cube(tri.lrhsi, "lrhsi.cube");
        put_cube(tri.hrmsi, "hrmsi.cube");
        write_matrix_csv((dir / "true_psf.csv").string(), psf.kernel);
        write_coverage_csv((dir / "coverage.csv").string(), table.intervals);
        outputs.push_back("true_psf.csv");
        outputs.push_back("coverage.csv");
        manifest["mode"] = "degrade";
        manifest["hrhsi"] = a.hrhsi;
        manifest["rows"] = hrhsi.rows;
        manifest["cols"] = hrhsi.cols;
        manifest["bands"] = hrhsi.bands;
        manifest["ratio"] = a.ratio;
        manifest["sigma"] = a.sigma;
    }
    manifest["outputs"] = outputs;
    write_json(dir / "manifest.json", manifest);
    return 0;
}

// ---- fuse ----

struct FuseArgs {
    std::string lrhsi, hrmsi, coverage, out, config, truth;
    bool normalize = false;
};

// Option names double as JSON config keys; flags override file values.
struct FuseOverrides {
    std::optional<int> iterations, p, metrics_every;
    std::optional<double> lr0, alpha, beta, gamma, mu, nu, a_sparse, leaky_slope, eps_norm;
    std::optional<std::string> constraint, reduction;
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<int>> hidden;
    std::vector<std::string> ablate;
    std::optional<bool> reproducible;
};

void config_from_json(TrainConfig& cfg, const json& j) {
    for (const auto& [key, val] : j.items()) {
        if (key == "iterations")
            cfg.iterations = val.get<int>();
        else if (key == "lr0")
            cfg.lr0 = val.get<double>();
        else if (key == "alpha")
            cfg.weights.alpha = val.get<double>();
        else if (key == "beta")
            cfg.weights.beta = val.get<double>();
        else if (key == "gamma")
            cfg.weights.gamma = val.get<double>();
        else if (key == "mu")
            cfg.weights.mu = val.get<double>();
        else if (key == "nu")
            cfg.weights.nu = val.get<double>();
        else if (key == "a_sparse")
            cfg.weights.a_sparse = val.get<double>();
        else if (key == "p")
            cfg.p = val.get<int>();
        else if (key == "constraint") {
            const auto s = val.get<std::string>();
            if (s == "clamp")
                cfg.constraint = AbundanceConstraint::Clamp;
            else if (s == "softmax")
                cfg.constraint = AbundanceConstraint::Softmax;
            else
                throw ConfigError("config: constraint must be clamp or softmax");
        } else if (key == "ablate") {
            cfg.ablation = {};
            for (const auto& name : val) set_ablation(cfg.ablation, name.get<std::string>());
        } else if (key == "seed")
            cfg.seed = val.get<std::uint64_t>();
        else if (key == "reproducible")
            cfg.reproducible = val.get<bool>();
        else if (key == "hidden")
            cfg.encoder_hidden = val.get<std::vector<int>>();
        else if (key == "leaky_slope")
            cfg.leaky_slope = val.get<double>();
        else if (key == "eps_norm")
            cfg.eps_norm = val.get<double>();
        else if (key == "reduction") {
            const auto s = val.get<std::string>();
            if (s == "mean")
                cfg.reduction = Reduction::Mean;
            else if (s == "sum")
                cfg.reduction = Reduction::Sum;
            else
                throw ConfigError("config: reduction must be mean or sum");
        } else if (key == "metrics_every")
            cfg.metrics_every = val.get<int>();
        else
            throw ConfigError("config: unknown key '" + key + "'");
    }
}

json config_to_json(const TrainConfig& cfg) {
    json j;
    j["iterations"] = cfg.iterations;
    j["lr0"] = cfg.lr0;
    j["alpha"] = cfg.weights.alpha;
    j["beta"] = cfg.weights.beta;
    j["gamma"] = cfg.weights.gamma;
    j["mu"] = cfg.weights.mu;
    j["nu"] = cfg.weights.nu;
    j["a_sparse"] = cfg.weights.a_sparse;
    j["p"] = cfg.p;
    j["constraint"] = constraint_name(cfg.constraint);
    j["ablate"] = ablation_names(cfg.ablation);
    j["seed"] = cfg.seed;
    j["reproducible"] = cfg.reproducible;
    j["hidden"] = cfg.encoder_hidden;
    j["leaky_slope"] = cfg.leaky_slope;
    j["eps_norm"] = cfg.eps_norm;
    j["reduction"] = cfg.reduction == Reduction::Sum ? "sum" : "mean";
    j["metrics_every"] = cfg.metrics_every;
    return j;
}

TrainConfig merge_config(const std::string& config_path, const FuseOverrides& ov) {
    TrainConfig cfg;
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw ConfigError("cannot open config file: " + config_path);
        json j;
        try {
            f >> j;
        } catch (const json::exception& e) {
            throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
        }
        config_from_json(cfg, j);
    }
    if (ov.iterations) cfg.iterations = *ov.iterations;
    if (ov.lr0) cfg.lr0 = *ov.lr0;
    if (ov.alpha) cfg.weights.alpha = *ov.alpha;
    if (ov.beta) cfg.weights.beta = *ov.beta;
    if (ov.gamma) cfg.weights.gamma = *ov.gamma;
    if (ov.mu) cfg.weights.mu = *ov.mu;
    if (ov.nu) cfg.weights.nu = *ov.nu;
    if (ov.a_sparse) cfg.weights.a_sparse = *ov.a_sparse;
    if (ov.p) cfg.p = *ov.p;
    if (ov.constraint) {
        if (*ov.constraint == "clamp")
            cfg.constraint = AbundanceConstraint::Clamp;
        else if (*ov.constraint == "softmax")
            cfg.constraint = AbundanceConstraint::Softmax;
        else
            throw ConfigError("--constraint must be clamp or softmax");
    }
    if (!ov.ablate.empty()) {
        cfg.ablation = {};
        for (const auto& name : ov.ablate) set_ablation(cfg.ablation, name);
    }
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.reproducible) cfg.reproducible = *ov.reproducible;
    if (ov.hidden) cfg.encoder_hidden = *ov.hidden;
    if (ov.leaky_slope) cfg.leaky_slope = *ov.leaky_slope;
    if (ov.eps_norm) cfg.eps_norm = *ov.eps_norm;
    if (ov.reduction) {
        if (*ov.reduction == "mean")
            cfg.reduction = Reduction::Mean;
        else if (*ov.reduction == "sum")
            cfg.reduction = Reduction::Sum;
        else
            throw ConfigError("--reduction must be mean or sum");
    }
    if (ov.metrics_every) cfg.metrics_every = *ov.metrics_every;
    return cfg;
}

int cmd_fuse(const FuseArgs& a, const FuseOverrides& ov) {
    const fs::path dir = ensure_out_dir(a.out);
    const TrainConfig cfg = merge_config(a.config, ov);
    cfg.validate();

    const ImageCube lrhsi = load_cube(a.lrhsi, a.normalize);
    const ImageCube hrmsi = load_cube(a.hrmsi, a.normalize);
    if (lrhsi.wavelengths_nm.empty())
        throw ConfigError("low-res cube has no wavelengths; band grouping needs them: " +
                          a.lrhsi);
    if (hrmsi.rows % lrhsi.rows != 0 || hrmsi.cols % lrhsi.cols != 0 ||
        hrmsi.rows / lrhsi.rows != hrmsi.cols / lrhsi.cols)
        throw ConfigError("resolution ratio between inputs is not a single integer");
    const SrfTable table = read_srf_table(a.coverage);
    const SpectralCoverage cov = build_coverage(lrhsi.wavelengths_nm, table.intervals);
    if (hrmsi.bands != cov.msi_bands())
        throw ConfigError("high-res band count disagrees with the band table");

    const PlanarImage Z = to_planar(lrhsi);
    const PlanarImage Y = to_planar(hrmsi);
    std::optional<ImageCube> truth;
    if (!a.truth.empty()) truth = load_cube(a.truth, a.normalize);

    const TrainResult res =
        train(Z, Y, cov, cfg, truth ? &*truth : nullptr);

    const ImageCube xhat = fold(res.x_hat.m, res.x_hat.rows, res.x_hat.cols,
                                lrhsi.wavelengths_nm);
    save_cube(xhat, (dir / "xhat.cube").string());
    save_checkpoint(res.params, (dir / "checkpoint.bin").string());
    write_matrix_csv((dir / "learned_psf.csv").string(), res.params.psf_kernel);
    std::vector<Eigen::VectorXd> learned_srf;
    for (const auto& w : res.params.srf_weights) learned_srf.push_back(w.col(0));
    write_srf_weights_csv((dir / "learned_srf.csv").string(), learned_srf);
    res.log.write_csv((dir / "training_log.csv").string());
    write_json(dir / "effective_config.json", config_to_json(cfg));

    json manifest;
    manifest["command"] = "fuse";
    manifest["lrhsi"] = a.lrhsi;
    manifest["hrmsi"] = a.hrmsi;
    manifest["coverage"] = a.coverage;
    manifest["ratio"] = hrmsi.rows / lrhsi.rows;
    manifest["seed"] = cfg.seed;
    manifest["outputs"] = {"xhat.cube",        "xhat.cube.json", "checkpoint.bin",
                           "learned_psf.csv",  "learned_srf.csv", "training_log.csv",
                           "effective_config.json"};
    write_json(dir / "manifest.json", manifest);
    return 0;
}

// ---- evaluate ----

int cmd_evaluate(const std::string& ref_path, const std::string& est_path, int ratio,
                 const std::string& out, bool normalize) {
    if (ratio < 1) throw ConfigError("--ratio must be a positive integer");
    const fs::path dir = ensure_out_dir(out);
    const ImageCube ref = load_cube(ref_path, normalize);
    const ImageCube est = load_cube(est_path, normalize);
    const MetricsReport rep = evaluate_metrics(ref, est, ratio);

    {
        std::ofstream f(dir / "metrics.csv");
        if (!f) throw ConfigError("cannot write metrics.csv");
        f << "metric,value\n";
        char buf[64];
        auto row = [&](const char* name, double v) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            f << name << "," << buf << "\n";
        };
        row("mPSNR_dB", rep.mpsnr_db);
        row("mSAM_deg", rep.msam_deg);
        row("ERGAS", rep.ergas);
        row("RMSE", rep.rmse);
        row("MRAE", rep.mrae);
        f << "sam_excluded_pixels," << rep.sam_excluded << "\n";
    }
    {
        std::ofstream f(dir / "psnr_per_band.csv");
        if (!f) throw ConfigError("cannot write psnr_per_band.csv");
        f << "band,psnr_db\n";
        char buf[64];
        for (std::size_t b = 0; b < rep.psnr_per_band_db.size(); ++b) {
            std::snprintf(buf, sizeof(buf), "%.17g", rep.psnr_per_band_db[b]);
            f << b << "," << buf << "\n";
        }
    }
    write_heatmap(rep.rmse_map, (dir / "rmse_map").string());
    write_heatmap(rep.mrae_map, (dir / "mrae_map").string());
    write_heatmap(rep.sam_map, (dir / "sam_map").string());

    json manifest;
    manifest["command"] = "evaluate";
    manifest["ref"] = ref_path;
    manifest["est"] = est_path;
    manifest["ratio"] = ratio;
    manifest["outputs"] = {"metrics.csv",  "psnr_per_band.csv", "rmse_map.f32",
                           "rmse_map.pgm", "rmse_map.json",     "mrae_map.f32",
                           "mrae_map.pgm", "mrae_map.json",     "sam_map.f32",
                           "sam_map.pgm",  "sam_map.json"};
    write_json(dir / "manifest.json", manifest);
    return 0;
}

// ---- grad-check ----

struct GradCheckArgs {
    std::uint64_t seed = 0;
    double h = 1e-5;
    double tol = 1e-4;
    int coords = 64;
    std::string inject_group;
};

int cmd_grad_check(const GradCheckArgs& a) {
    SceneConfig scfg;
    scfg.rows = scfg.cols = 8;
    scfg.bands = 12;
    scfg.p_true = 3;
    scfg.ratio = 2;
    scfg.sigma = 0.5;
    scfg.seed = a.seed;
    const SyntheticScene scene = gen_scene(scfg);
    const PlanarImage Z = to_planar(scene.observed.lrhsi);
    const PlanarImage Y = to_planar(scene.observed.hrmsi);

    Rng rng(a.seed + 1);
    const ModelParams params = init_params(Z, scene.coverage, 4, scfg.ratio, {32, 16},
                                           0.02, rng);
    const ForwardOptions opt;
    const LossWeights w;
    const auto [loss0, grads] =
        loss_and_grads(params, Z, Y, scene.coverage, opt, w);
    (void)loss0;
    ad::ParamMap analytic = grads;
    if (!a.inject_group.empty()) {
        bool found = false;
        for (auto& [name, g] : analytic)
            if (name == a.inject_group && g.size() > 0) {
                g(0, 0) += 1.0;
                found = true;
            }
        if (!found) throw ConfigError("no such parameter group: " + a.inject_group);
    }
    auto loss_fn = [&](const ad::ParamMap& pm) {
        ModelParams p2 = params;
        assign_from_param_map(p2, pm);
        return eval_loss_once(p2, Z, Y, scene.coverage, opt, w);
    };
    const ad::FdReport rep = ad::fd_check(to_param_map(params), loss_fn, analytic, a.h,
                                          a.tol, a.coords, a.seed + 2);
    std::printf("group,checked,kink_skipped,max_rel_err,pass\n");
    for (const auto& g : rep.groups)
        std::printf("%s,%d,%d,%.3e,%s\n", g.name.c_str(), g.checked, g.kink_skipped,
                    g.max_rel_err, g.pass ? "true" : "false");
    return rep.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperspectral-multispectral fusion toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "array math threads (default: SPECFUSE_THREADS or 1)");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "generate or degrade a scene");
    simulate->add_flag("--synthetic", sim.synthetic, "generate a synthetic scene");
    simulate->add_option("--size", sim.size, "synthetic edge length");
    simulate->add_option("--bands", sim.bands, "synthetic band count");
    simulate->add_option("--p-true", sim.p_true, "synthetic material count");
    simulate->add_option("--ratio", sim.ratio, "resolution ratio / kernel size");
    simulate->add_option("--sigma", sim.sigma, "blur width");
    simulate->add_option("--msi-bands", sim.msi_bands, "synthetic broad-band count");
    simulate->add_option("--seed", sim.seed, "random seed");
    simulate->add_option("--hrhsi", sim.hrhsi, "degrade this cube instead");
    simulate->add_option("--srf", sim.srf_table, "band table CSV for degrade mode");
    simulate->add_flag("--normalize", sim.normalize, "min-max normalize loaded cubes");
    simulate->add_option("--out", sim.out, "output directory")->required();

    FuseArgs fuse;
    FuseOverrides ov;
    auto* fusec = app.add_subcommand("fuse", "train the fusion network");
    fusec->add_option("--lrhsi", fuse.lrhsi, "low-res hyperspectral cube")->required();
    fusec->add_option("--hrmsi", fuse.hrmsi, "high-res multispectral cube")->required();
    fusec->add_option("--coverage", fuse.coverage, "band table CSV")->required();
    fusec->add_option("--out", fuse.out, "output directory")->required();
    fusec->add_option("--config", fuse.config, "JSON config file");
    fusec->add_option("--truth", fuse.truth, "ground-truth cube for periodic quality columns");
    fusec->add_flag("--normalize", fuse.normalize, "min-max normalize loaded cubes");
    fusec->add_option("--iterations", ov.iterations);
    fusec->add_option("--lr0", ov.lr0);
    fusec->add_option("--alpha", ov.alpha);
    fusec->add_option("--beta", ov.beta);
    fusec->add_option("--gamma", ov.gamma);
    fusec->add_option("--mu", ov.mu);
    fusec->add_option("--nu", ov.nu);
    fusec->add_option("--a-sparse", ov.a_sparse);
    fusec->add_option("--p", ov.p, "endmember count");
    fusec->add_option("--constraint", ov.constraint, "clamp|softmax");
    fusec->add_option("--ablate", ov.ablate, "drop_Za|drop_Zb|drop_Y|drop_Ylr (repeatable)");
    fusec->add_option("--seed", ov.seed);
    fusec->add_option("--reproducible", ov.reproducible);
    fusec->add_option("--hidden", ov.hidden, "encoder hidden widths");
    fusec->add_option("--leaky", ov.leaky_slope);
    fusec->add_option("--eps-norm", ov.eps_norm);
    fusec->add_option("--reduction", ov.reduction, "mean|sum");
    fusec->add_option("--metrics-every", ov.metrics_every);

    std::string ev_ref, ev_est, ev_out;
    int ev_ratio = 0;
    bool ev_normalize = false;
    auto* evaluate = app.add_subcommand("evaluate", "quality measures between two cubes");
    evaluate->add_option("--ref", ev_ref, "reference cube")->required();
    evaluate->add_option("--est", ev_est, "estimate cube")->required();
    evaluate->add_option("--ratio", ev_ratio, "resolution ratio")->required();
    evaluate->add_option("--out", ev_out, "output directory")->required();
    evaluate->add_flag("--normalize", ev_normalize, "min-max normalize loaded cubes");

    GradCheckArgs gc;
    auto* gradcheck = app.add_subcommand("grad-check",
                                         "compare analytic gradients to finite differences");
    gradcheck->add_option("--seed", gc.seed);
    gradcheck->add_option("--step", gc.h, "difference step");
    gradcheck->add_option("--tol", gc.tol, "relative error bound");
    gradcheck->add_option("--coords", gc.coords, "sampled coordinates per group");
    gradcheck->add_option("--inject-grad-error", gc.inject_group)->group("");  // test hook

    CLI11_PARSE(app, argc, argv);

    try {
        apply_threads_hint(threads);
        if (simulate->parsed()) return cmd_simulate(sim);
        if (fusec->parsed()) return cmd_fuse(fuse, ov);
        if (evaluate->parsed())
            return cmd_evaluate(ev_ref, ev_est, ev_ratio, ev_out, ev_normalize);
        if (gradcheck->parsed()) return cmd_grad_check(gc);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

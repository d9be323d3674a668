#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "nlohmann/json.hpp"
#include "specfuse/csvio.hpp"
#include "specfuse/cube.hpp"
#include "specfuse/errors.hpp"
#include "test_util.hpp"

using namespace specfuse;
namespace fs = std::filesystem;

namespace {

// Runs the installed binary, returns its exit code, leaves stdout+stderr in
// `log` for content checks.
int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd =
        std::string(SPECFUSE_BIN) + " " + args + " > " + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    if (rc == -1) return -1;
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

long count_lines(const fs::path& p) {
    const std::string text = tu::slurp(p);
    long n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

}  // namespace

TEST_CASE("matrix csv round trip") {
    const auto dir = tu::temp_dir("csvio");
    const Eigen::MatrixXd m = tu::random_mat(4, 3, 70);
    const std::string path = (dir / "m.csv").string();
    write_matrix_csv(path, m);
    const Eigen::MatrixXd back = read_matrix_csv(path);
    CHECK(tu::max_abs_diff(m, back) == 0.0);  // %.17g round-trips doubles

    std::ofstream ragged(dir / "ragged.csv");
    ragged << "1,2,3\n1,2\n";
    ragged.close();
    CHECK_THROWS_AS(read_matrix_csv((dir / "ragged.csv").string()), ConfigError);
    CHECK_THROWS_AS(read_matrix_csv((dir / "absent.csv").string()), ConfigError);
}

TEST_CASE("band table reader accepts plain and weighted rows") {
    const auto dir = tu::temp_dir("srftable");
    {
        std::ofstream f(dir / "plain.csv");
        f << "msi_band,lambda_low_nm,lambda_high_nm\n";
        f << "1,550,700\n0,400,550\n";  // order independent
    }
    const SrfTable plain = read_srf_table((dir / "plain.csv").string());
    REQUIRE(plain.intervals.size() == 2);
    CHECK(plain.intervals[0].first == 400.0);
    CHECK(plain.intervals[1].second == 700.0);
    CHECK(plain.weights.empty());

    {
        std::ofstream f(dir / "weighted.csv");
        f << "0,400,550,0.2,0.8,1.0\n";
        f << "1,550,700,1.0,0.5\n";
    }
    const SrfTable weighted = read_srf_table((dir / "weighted.csv").string());
    REQUIRE(weighted.weights.size() == 2);
    CHECK(weighted.weights[0].size() == 3);
    CHECK(weighted.weights[1](1) == 0.5);

    {
        std::ofstream f(dir / "badidx.csv");
        f << "0,400,550\n2,550,700\n";  // gap in the index sequence
    }
    CHECK_THROWS_AS(read_srf_table((dir / "badidx.csv").string()), ConfigError);
    {
        std::ofstream f(dir / "badbounds.csv");
        f << "0,550,400\n";
    }
    CHECK_THROWS_AS(read_srf_table((dir / "badbounds.csv").string()), ConfigError);
    {
        std::ofstream f(dir / "mixed.csv");
        f << "0,400,550,1.0,1.0\n1,550,700\n";  // weights must be all-or-none
    }
    CHECK_THROWS_AS(read_srf_table((dir / "mixed.csv").string()), ConfigError);
}

TEST_CASE("coverage and weight writers emit readable tables") {
    const auto dir = tu::temp_dir("covwrite");
    write_coverage_csv((dir / "cov.csv").string(), {{400.0, 550.0}, {550.0, 700.0}});
    const SrfTable t = read_srf_table((dir / "cov.csv").string());
    REQUIRE(t.intervals.size() == 2);
    CHECK(t.intervals[1].first == 550.0);

    std::vector<Eigen::VectorXd> w(2);
    w[0] = Eigen::VectorXd::Constant(3, 0.5);
    w[1] = Eigen::VectorXd::Constant(2, 1.0);
    write_srf_weights_csv((dir / "w.csv").string(), w);
    const std::string text = tu::slurp(dir / "w.csv");
    CHECK(text.find("0,0.5,0.5,0.5") != std::string::npos);
    CHECK(text.find("1,1,1") != std::string::npos);
}

TEST_CASE("cli: synthetic simulation writes the full inventory") {
    const auto dir = tu::temp_dir("cli_sim");
    const auto out = dir / "scene";
    const int rc = run_cli("simulate --synthetic --size 16 --bands 12 --p-true 3 "
                           "--ratio 2 --msi-bands 3 --seed 5 --out " + out.string(),
                           dir / "run.log");
    REQUIRE(rc == 0);
    for (const char* name :
         {"hrhsi.cube", "hrhsi.cube.json", "lrhsi.cube", "lrhsi.cube.json",
          "hrmsi.cube", "hrmsi.cube.json", "true_psf.csv", "true_srf.csv",
          "true_endmembers.csv", "true_abundance.csv", "coverage.csv",
          "manifest.json"}) {
        INFO("missing ", name);
        CHECK(fs::exists(out / name));
    }
    const auto lr = load_cube((out / "lrhsi.cube").string());
    CHECK(lr.rows == 8);
    CHECK(lr.cols == 8);
    CHECK(lr.bands == 12);
    const auto hr = load_cube((out / "hrmsi.cube").string());
    CHECK(hr.rows == 16);
    CHECK(hr.bands == 3);
    const Eigen::MatrixXd psf = read_matrix_csv((out / "true_psf.csv").string());
    CHECK(psf.rows() == 2);
    CHECK(psf.sum() == doctest::Approx(1.0).epsilon(1e-12));

    nlohmann::json manifest;
    std::ifstream mf(out / "manifest.json");
    mf >> manifest;
    CHECK(manifest.at("mode") == "synthetic");
    CHECK(manifest.at("seed").get<int>() == 5);
}

TEST_CASE("cli: bad simulation settings exit with the config code") {
    const auto dir = tu::temp_dir("cli_sim_bad");
    // Degrade mode without a band table.
    CHECK(run_cli("simulate --hrhsi nothere.cube --out " + (dir / "o1").string(),
                  dir / "a.log") == 2);
    CHECK(tu::slurp(dir / "a.log").find("--srf") != std::string::npos);
    // Missing input cube.
    std::ofstream(dir / "table.csv") << "0,400,700\n";
    CHECK(run_cli("simulate --hrhsi nothere.cube --srf " + (dir / "table.csv").string() +
                      " --out " + (dir / "o2").string(),
                  dir / "b.log") == 2);
    CHECK(tu::slurp(dir / "b.log").find("nothere.cube") != std::string::npos);
    // Synthetic scene too small.
    CHECK(run_cli("simulate --synthetic --size 7 --out " + (dir / "o3").string(),
                  dir / "c.log") == 2);
    // No subcommand at all.
    CHECK(run_cli("", dir / "d.log") != 0);
}

TEST_CASE("cli: degrade mode reuses a provided cube") {
    const auto dir = tu::temp_dir("cli_degrade");
    const auto cube = tu::random_cube(12, 12, 6, 71);
    save_cube(cube, (dir / "in.cube").string());
    {
        std::ofstream f(dir / "table.csv");
        f << "msi_band,lambda_low_nm,lambda_high_nm\n0,400,420\n1,430,450\n";
    }
    const auto out = dir / "deg";
    const int rc = run_cli("simulate --hrhsi " + (dir / "in.cube").string() + " --srf " +
                               (dir / "table.csv").string() +
                               " --ratio 3 --sigma 0.8 --out " + out.string(),
                           dir / "run.log");
    REQUIRE(rc == 0);
    const auto lr = load_cube((out / "lrhsi.cube").string());
    CHECK(lr.rows == 4);
    CHECK(lr.bands == 6);
    const auto ms = load_cube((out / "hrmsi.cube").string());
    CHECK(ms.rows == 12);
    CHECK(ms.bands == 2);
}

TEST_CASE("cli: fuse trains, writes artifacts, and honors precedence") {
    const auto dir = tu::temp_dir("cli_fuse");
    const auto scene = dir / "scene";
    REQUIRE(run_cli("simulate --synthetic --size 16 --bands 12 --p-true 3 --ratio 2 "
                    "--msi-bands 3 --seed 9 --out " + scene.string(),
                    dir / "sim.log") == 0);

    // Config file asks for 7 iterations; the flag wins with 5.
    std::ofstream(dir / "cfg.json") << R"({"iterations": 7, "p": 4, "hidden": [8]})";
    const auto out = dir / "fused";
    const int rc = run_cli(
        "fuse --lrhsi " + (scene / "lrhsi.cube").string() + " --hrmsi " +
            (scene / "hrmsi.cube").string() + " --coverage " +
            (scene / "coverage.csv").string() + " --config " + (dir / "cfg.json").string() +
            " --iterations 5 --seed 3 --out " + out.string(),
        dir / "fuse.log");
    REQUIRE(rc == 0);
    for (const char* name :
         {"xhat.cube", "xhat.cube.json", "checkpoint.bin", "learned_psf.csv",
          "learned_srf.csv", "training_log.csv", "effective_config.json",
          "manifest.json"}) {
        INFO("missing ", name);
        CHECK(fs::exists(out / name));
    }
    const auto xhat = load_cube((out / "xhat.cube").string());
    CHECK(xhat.rows == 16);
    CHECK(xhat.cols == 16);
    CHECK(xhat.bands == 12);
    CHECK(xhat.wavelengths_nm.size() == 12);
    CHECK(count_lines(out / "training_log.csv") == 6);  // header + 5 rows

    nlohmann::json eff;
    std::ifstream(out / "effective_config.json") >> eff;
    CHECK(eff.at("iterations").get<int>() == 5);
    CHECK(eff.at("p").get<int>() == 4);
    CHECK(eff.at("hidden").get<std::vector<int>>() == std::vector<int>{8});
    CHECK(eff.at("seed").get<int>() == 3);

    const Eigen::MatrixXd lpsf = read_matrix_csv((out / "learned_psf.csv").string());
    CHECK(lpsf.rows() == 2);
    CHECK(lpsf.cols() == 2);
    CHECK(lpsf.minCoeff() >= 0.0);
    CHECK(lpsf.maxCoeff() <= 1.0);
}

TEST_CASE("cli: fuse rejects unknown config keys and bad grids") {
    const auto dir = tu::temp_dir("cli_fuse_bad");
    const auto scene = dir / "scene";
    REQUIRE(run_cli("simulate --synthetic --size 16 --bands 12 --ratio 2 --p-true 3 "
                    "--out " + scene.string(),
                    dir / "sim.log") == 0);

    std::ofstream(dir / "bad.json") << R"({"iteratons": 7})";  // typo on purpose
    CHECK(run_cli("fuse --lrhsi " + (scene / "lrhsi.cube").string() + " --hrmsi " +
                      (scene / "hrmsi.cube").string() + " --coverage " +
                      (scene / "coverage.csv").string() + " --config " +
                      (dir / "bad.json").string() + " --out " + (dir / "o1").string(),
                  dir / "a.log") == 2);
    CHECK(tu::slurp(dir / "a.log").find("iteratons") != std::string::npos);

    // Non-integer resolution ratio between the inputs.
    const auto odd = tu::random_cube(6, 6, 12, 72);
    save_cube(odd, (dir / "odd.cube").string());
    CHECK(run_cli("fuse --lrhsi " + (dir / "odd.cube").string() + " --hrmsi " +
                      (scene / "hrmsi.cube").string() + " --coverage " +
                      (scene / "coverage.csv").string() + " --iterations 1 --out " +
                      (dir / "o2").string(),
                  dir / "b.log") == 2);
    CHECK(tu::slurp(dir / "b.log").find("ratio") != std::string::npos);
}

TEST_CASE("cli: identical seeds give byte-identical fuse outputs") {
    const auto dir = tu::temp_dir("cli_fuse_repro");
    const auto scene = dir / "scene";
    REQUIRE(run_cli("simulate --synthetic --size 16 --bands 12 --p-true 3 --ratio 2 "
                    "--out " + scene.string(),
                    dir / "sim.log") == 0);
    const std::string common =
        "fuse --lrhsi " + (scene / "lrhsi.cube").string() + " --hrmsi " +
        (scene / "hrmsi.cube").string() + " --coverage " + (scene / "coverage.csv").string() +
        " --iterations 10 --p 4 --hidden 8 --seed 21 --out ";
    REQUIRE(run_cli(common + (dir / "r1").string(), dir / "r1.log") == 0);
    REQUIRE(run_cli(common + (dir / "r2").string(), dir / "r2.log") == 0);
    CHECK(tu::slurp(dir / "r1" / "checkpoint.bin") == tu::slurp(dir / "r2" / "checkpoint.bin"));
    CHECK(tu::slurp(dir / "r1" / "training_log.csv") ==
          tu::slurp(dir / "r2" / "training_log.csv"));
    CHECK(tu::slurp(dir / "r1" / "xhat.cube") == tu::slurp(dir / "r2" / "xhat.cube"));
}

TEST_CASE("cli: fuse with ground truth logs quality columns") {
    const auto dir = tu::temp_dir("cli_fuse_truth");
    const auto scene = dir / "scene";
    REQUIRE(run_cli("simulate --synthetic --size 16 --bands 12 --p-true 3 --ratio 2 "
                    "--out " + scene.string(),
                    dir / "sim.log") == 0);
    const auto out = dir / "fused";
    REQUIRE(run_cli("fuse --lrhsi " + (scene / "lrhsi.cube").string() + " --hrmsi " +
                        (scene / "hrmsi.cube").string() + " --coverage " +
                        (scene / "coverage.csv").string() + " --truth " +
                        (scene / "hrhsi.cube").string() +
                        " --iterations 6 --p 4 --hidden 8 --metrics-every 5 --out " +
                        out.string(),
                    dir / "fuse.log") == 0);
    const std::string log = tu::slurp(out / "training_log.csv");
    CHECK(log.find(",mPSNR,mSAM\n") != std::string::npos);
    CHECK(log.find(",,\n") != std::string::npos);  // off-cadence rows stay blank
}

TEST_CASE("cli: evaluation of identical cubes reports the cap") {
    const auto dir = tu::temp_dir("cli_eval");
    const auto cube = tu::random_cube(9, 9, 4, 73);
    save_cube(cube, (dir / "ref.cube").string());
    save_cube(cube, (dir / "est.cube").string());
    const auto out = dir / "metrics";
    REQUIRE(run_cli("evaluate --ref " + (dir / "ref.cube").string() + " --est " +
                        (dir / "est.cube").string() + " --ratio 3 --out " + out.string(),
                    dir / "run.log") == 0);
    const std::string metrics = tu::slurp(out / "metrics.csv");
    CHECK(metrics.find("metric,value\n") == 0);
    CHECK(metrics.find("mPSNR_dB,100") != std::string::npos);
    CHECK(metrics.find("mSAM_deg,0") != std::string::npos);
    CHECK(metrics.find("sam_excluded_pixels,0") != std::string::npos);
    CHECK(count_lines(out / "psnr_per_band.csv") == 5);  // header + one per band

    const std::string pgm = tu::slurp(out / "rmse_map.pgm");
    CHECK(pgm.substr(0, 9) == "P5\n9 9\n25");  // dims in the header
    CHECK(fs::file_size(out / "rmse_map.f32") == 9 * 9 * 4);
    CHECK(run_cli("evaluate --ref " + (dir / "ref.cube").string() + " --est " +
                      (dir / "est.cube").string() + " --ratio 0 --out " +
                      (dir / "o2").string(),
                  dir / "bad.log") == 2);
}

TEST_CASE("cli: gradient check passes and the sabotage hook fails it") {
    const auto dir = tu::temp_dir("cli_gradcheck");
    const int rc = run_cli("grad-check --seed 1 --coords 8", dir / "ok.log");
    CHECK(rc == 0);
    const std::string ok = tu::slurp(dir / "ok.log");
    CHECK(ok.find("group,checked,kink_skipped,max_rel_err,pass\n") == 0);
    CHECK(ok.find("endmembers,") != std::string::npos);
    CHECK(ok.find("false") == std::string::npos);

    // Default coordinate budget covers the whole endmember group, so the
    // corrupted entry is always sampled.
    const int rc_bad = run_cli("grad-check --seed 1 --inject-grad-error endmembers",
                               dir / "bad.log");
    CHECK(rc_bad == 1);
    const std::string bad = tu::slurp(dir / "bad.log");
    CHECK(bad.find("false") != std::string::npos);
}

TEST_CASE("cli: thread hint is accepted from the environment") {
    const auto dir = tu::temp_dir("cli_threads");
    const std::string cmd = "SPECFUSE_THREADS=1 " + std::string(SPECFUSE_BIN) +
                            " simulate --synthetic --size 16 --bands 6 --p-true 2 "
                            "--ratio 2 --msi-bands 2 --out " +
                            (dir / "o").string() + " > " + (dir / "t.log").string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    CHECK(WIFEXITED(rc));
    CHECK(WEXITSTATUS(rc) == 0);
}

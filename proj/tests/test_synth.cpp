#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "specfuse/degrade.hpp"
#include "specfuse/errors.hpp"
#include "specfuse/synth.hpp"
#include "test_util.hpp"

using namespace specfuse;

namespace {

double angle_deg(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double c = a.dot(b) / (a.norm() * b.norm());
    return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

SceneConfig small_config(std::uint64_t seed) {
    SceneConfig cfg;
    cfg.rows = 16;
    cfg.cols = 16;
    cfg.bands = 12;
    cfg.p_true = 3;
    cfg.ratio = 2;
    cfg.sigma = 0.5;
    cfg.msi_bands = 3;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("wavelength grid spans 400 to 700 nm") {
    const auto wl = synth_wavelengths(31);
    REQUIRE(wl.size() == 31);
    CHECK(wl.front() == doctest::Approx(400.0));
    CHECK(wl.back() == doctest::Approx(700.0));
    CHECK(wl[1] - wl[0] == doctest::Approx(10.0));
    for (std::size_t i = 1; i < wl.size(); ++i) CHECK(wl[i] > wl[i - 1]);
    CHECK_THROWS_AS(synth_wavelengths(1), ConfigError);
}

TEST_CASE("scene generation is seed-deterministic") {
    const auto a = gen_scene(small_config(42));
    const auto b = gen_scene(small_config(42));
    CHECK(a.hrhsi.data == b.hrhsi.data);
    CHECK(tu::max_abs_diff(a.endmembers, b.endmembers) == 0.0);
    CHECK(tu::max_abs_diff(a.abundance, b.abundance) == 0.0);
    CHECK(a.observed.lrhsi.data == b.observed.lrhsi.data);
    CHECK(a.observed.hrmsi.data == b.observed.hrmsi.data);

    const auto c = gen_scene(small_config(43));
    CHECK(a.hrhsi.data != c.hrhsi.data);
}

TEST_CASE("endmember spectra are bounded and mutually distinct") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const auto em = gen_endmembers(4, 31, seed);
        REQUIRE(em.rows() == 4);
        REQUIRE(em.cols() == 31);
        CHECK(em.minCoeff() >= 0.05 - 1e-12);
        CHECK(em.maxCoeff() <= 0.95 + 1e-12);
        for (int p = 0; p < 4; ++p)
            for (int q = p + 1; q < 4; ++q)
                CHECK(angle_deg(em.row(p).transpose(), em.row(q).transpose()) >= 10.0);
    }
    CHECK_THROWS_AS(gen_endmembers(1, 31, 0), ConfigError);
    CHECK_THROWS_AS(gen_endmembers(3, 2, 0), ConfigError);
}

TEST_CASE("abundance rows live on the simplex") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto ab = gen_abundance_field(16, 16, 4, seed);
        REQUIRE(ab.rows() == 256);
        REQUIRE(ab.cols() == 4);
        CHECK(ab.minCoeff() >= 0.0);
        CHECK(ab.maxCoeff() <= 1.0);
        for (Eigen::Index r = 0; r < ab.rows(); ++r)
            CHECK(ab.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("single material makes a constant abundance field") {
    const auto ab = gen_abundance_field(4, 5, 1, 9);
    REQUIRE(ab.rows() == 20);
    REQUIRE(ab.cols() == 1);
    CHECK((ab.array() == 1.0).all());
}

TEST_CASE("sharpened softmax keeps most abundances small") {
    // The training sparsity assumption: well over half of all entries nearly
    // inactive when four materials compete.
    long small = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto ab = gen_abundance_field(48, 48, 4, seed);
        small += (ab.array() < 0.1).count();
        total += ab.size();
    }
    CHECK(static_cast<double>(small) / static_cast<double>(total) >= 0.5);
}

TEST_CASE("mixed cube equals abundance times endmembers") {
    const auto scene = gen_scene(small_config(7));
    const Eigen::MatrixXd rebuilt = scene.abundance * scene.endmembers;
    CHECK(tu::max_abs_diff(unfold(scene.hrhsi), rebuilt) <= 1e-14);
}

TEST_CASE("blurred scene factors through blurred abundances") {
    // Blur commutes with linear mixing, so the low-res cube must equal the
    // blurred abundance field times the same endmembers.
    const auto scene = gen_scene(small_config(3));
    const auto ab_cube = fold(scene.abundance, 16, 16);
    const auto ab_lr = apply_psf(ab_cube, scene.psf);
    const Eigen::MatrixXd z_planted = unfold(ab_lr) * scene.endmembers;
    CHECK(tu::max_abs_diff(unfold(scene.observed.lrhsi), z_planted) <= 1e-10);
}

TEST_CASE("observed triplet has the expected shapes") {
    SceneConfig cfg;  // defaults: 48x48x31, ratio 4, 3 msi bands
    cfg.seed = 5;
    const auto scene = gen_scene(cfg);
    CHECK(scene.hrhsi.rows == 48);
    CHECK(scene.hrhsi.bands == 31);
    CHECK(scene.observed.lrhsi.rows == 12);
    CHECK(scene.observed.lrhsi.cols == 12);
    CHECK(scene.observed.lrhsi.bands == 31);
    CHECK(scene.observed.hrmsi.rows == 48);
    CHECK(scene.observed.hrmsi.bands == 3);
    CHECK(scene.observed.lrmsi.rows == 12);
    CHECK(scene.observed.lrmsi.bands == 3);
    CHECK(scene.psf.size == 4);
    REQUIRE(scene.srf_weights.size() == 3);
}

TEST_CASE("coverage intervals jointly reach every band") {
    const auto scene = gen_scene(small_config(1));
    std::vector<bool> seen(static_cast<std::size_t>(scene.hrhsi.bands), false);
    for (const auto& band : scene.coverage.bands)
        for (int j : band.hsi_indices) seen[static_cast<std::size_t>(j)] = true;
    for (bool s : seen) CHECK(s);
}

TEST_CASE("triangular responses peak at the interval center") {
    const auto wl = synth_wavelengths(21);
    const auto cov = build_coverage(wl, {{400.0, 550.0}, {550.0, 700.0}});
    const auto w = triangular_srf(cov, wl);
    REQUIRE(w.size() == 2);
    for (const auto& v : w) {
        CHECK(v.minCoeff() >= 0.05 - 1e-12);
        CHECK(v.maxCoeff() <= 1.0 + 1e-12);
    }
    // 475 nm is the exact center of the first interval and on the grid.
    Eigen::Index argmax = 0;
    w[0].maxCoeff(&argmax);
    CHECK(wl[static_cast<std::size_t>(cov.bands[0].hsi_indices[argmax])] ==
          doctest::Approx(475.0));
    CHECK(w[0].maxCoeff() == doctest::Approx(1.0));
}

TEST_CASE("scene config validation rejects bad settings") {
    auto bad = [](auto mutate) {
        SceneConfig cfg;
        mutate(cfg);
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    };
    bad([](SceneConfig& c) { c.rows = 7; });
    bad([](SceneConfig& c) { c.bands = 3; });
    bad([](SceneConfig& c) { c.p_true = 1; });
    bad([](SceneConfig& c) { c.ratio = 0; });
    bad([](SceneConfig& c) { c.ratio = 5; });  // 48 not divisible by 5
    bad([](SceneConfig& c) { c.sigma = 0.0; });
    bad([](SceneConfig& c) { c.msi_bands = 0; });
    bad([](SceneConfig& c) { c.msi_bands = 40; });
    SceneConfig ok;
    CHECK_NOTHROW(ok.validate());
}

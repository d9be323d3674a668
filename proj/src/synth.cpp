#include "specfuse/synth.hpp"

#include <cmath>
#include <numbers>

#include "specfuse/errors.hpp"
#include "specfuse/rng.hpp"

namespace specfuse {

namespace {

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) {
    // SplitMix64 finalizer over a stream-offset seed, so the endmember,
    // abundance, and kernel draws come from unrelated sequences.
    std::uint64_t z = seed + stream * 0x9e3779b97f4a7c15ULL + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double spectral_angle_deg(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 90.0;
    double c = a.dot(b) / (na * nb);
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c) * 180.0 / std::numbers::pi;
}

}  // namespace

void SceneConfig::validate() const {
    if (rows < 8 || cols < 8) throw ConfigError("scene: rows and cols must be at least 8");
    if (bands < 4) throw ConfigError("scene: at least 4 bands required");
    if (p_true < 2) throw ConfigError("scene: at least 2 materials required");
    if (ratio < 1) throw ConfigError("scene: ratio must be positive");
    if (rows % ratio != 0 || cols % ratio != 0)
        throw ConfigError("scene: rows and cols must be divisible by ratio");
    if (!(sigma > 0.0)) throw ConfigError("scene: sigma must be positive");
    if (msi_bands < 1 || msi_bands > bands)
        throw ConfigError("scene: msi_bands must lie in [1, bands]");
}

std::vector<double> synth_wavelengths(int bands) {
    if (bands < 2) throw ConfigError("wavelength grid needs at least 2 bands");
    std::vector<double> wl(static_cast<std::size_t>(bands));
    for (int i = 0; i < bands; ++i)
        wl[static_cast<std::size_t>(i)] = 400.0 + 300.0 * i / (bands - 1);
    return wl;
}

Eigen::MatrixXd gen_endmembers(int p_true, int bands, std::uint64_t seed) {
    if (p_true < 2) throw ConfigError("endmembers: at least 2 required");
    if (bands < 4) throw ConfigError("endmembers: at least 4 bands required");
    Rng rng(seed);
    Eigen::MatrixXd em(p_true, bands);
    const int kMaxTries = 1000;
    for (int p = 0; p < p_true; ++p) {
        bool accepted = false;
        for (int attempt = 0; attempt < kMaxTries && !accepted; ++attempt) {
            const int n_bumps = 2 + static_cast<int>(rng.index(3));
            Eigen::VectorXd s = Eigen::VectorXd::Zero(bands);
            for (int bu = 0; bu < n_bumps; ++bu) {
                const double mu = rng.uniform(0.0, static_cast<double>(bands - 1));
                const double width = rng.uniform(bands / 12.0, bands / 3.0);
                const double amp = rng.uniform(0.3, 1.0);
                for (int j = 0; j < bands; ++j) {
                    const double d = (j - mu) / width;
                    s[j] += amp * std::exp(-0.5 * d * d);
                }
            }
            const double lo = rng.uniform(0.05, 0.20);
            const double hi = rng.uniform(0.60, 0.95);
            const double smin = s.minCoeff(), smax = s.maxCoeff();
            if (smax - smin < 1e-9) continue;
            s = ((s.array() - smin) / (smax - smin)) * (hi - lo) + lo;
            accepted = true;
            for (int q = 0; q < p && accepted; ++q)
                if (spectral_angle_deg(s, em.row(q).transpose()) < 10.0) accepted = false;
            if (accepted) em.row(p) = s.transpose();
        }
        if (!accepted)
            throw NumericError("endmembers: could not find a sufficiently distinct spectrum");
    }
    return em;
}

Eigen::MatrixXd gen_abundance_field(int rows, int cols, int p_true, std::uint64_t seed) {
    if (rows < 1 || cols < 1 || p_true < 1)
        throw ConfigError("abundance field: dimensions must be positive");
    const Eigen::Index n = static_cast<Eigen::Index>(rows) * cols;
    if (p_true == 1) return Eigen::MatrixXd::Ones(n, 1);
    Rng rng(seed);
    const double kSharpness = 5.0;
    const int kWaves = 5;
    Eigen::MatrixXd field(n, p_true);
    for (int p = 0; p < p_true; ++p) {
        struct Wave {
            double u, v, phase, amp;
        };
        std::vector<Wave> waves(kWaves);
        for (auto& w : waves) {
            w.u = static_cast<double>(rng.index(4));
            w.v = static_cast<double>(rng.index(4));
            w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            w.amp = rng.uniform(0.5, 1.0);
        }
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                double f = 0.0;
                for (const auto& w : waves)
                    f += w.amp * std::cos(2.0 * std::numbers::pi *
                                              (w.u * r / rows + w.v * c / cols) +
                                          w.phase);
                field(static_cast<Eigen::Index>(r) * cols + c, p) = f;
            }
        }
        auto col = field.col(p);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().mean());
        if (sd > 1e-12)
            col = (col.array() - mean) / sd;
        else
            col.setZero();
    }
    for (Eigen::Index r = 0; r < n; ++r) {
        auto row = field.row(r);
        row = (kSharpness * (row.array() - row.maxCoeff())).exp();
        row /= row.sum();
    }
    return field;
}

std::vector<Eigen::VectorXd> triangular_srf(const SpectralCoverage& cov,
                                            const std::vector<double>& wavelengths) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(cov.bands.size());
    const double kFloor = 0.05;
    for (const auto& band : cov.bands) {
        const double center = 0.5 * (band.lo_nm + band.hi_nm);
        const double half = 0.5 * (band.hi_nm - band.lo_nm);
        Eigen::VectorXd w(static_cast<Eigen::Index>(band.hsi_indices.size()));
        for (std::size_t j = 0; j < band.hsi_indices.size(); ++j) {
            const double lam = wavelengths[static_cast<std::size_t>(band.hsi_indices[j])];
            const double t = half > 0.0 ? 1.0 - std::abs(lam - center) / half : 1.0;
            w[static_cast<Eigen::Index>(j)] = kFloor + (1.0 - kFloor) * std::max(t, 0.0);
        }
        out.push_back(std::move(w));
    }
    return out;
}

SyntheticScene gen_scene(const SceneConfig& cfg) {
    cfg.validate();
    SyntheticScene scene;
    const auto wl = synth_wavelengths(cfg.bands);
    scene.endmembers = gen_endmembers(cfg.p_true, cfg.bands, sub_seed(cfg.seed, 1));
    scene.abundance = gen_abundance_field(cfg.rows, cfg.cols, cfg.p_true, sub_seed(cfg.seed, 2));
    const Eigen::MatrixXd mixed = scene.abundance * scene.endmembers;
    scene.hrhsi = fold(mixed, cfg.rows, cfg.cols, wl);

    scene.psf = gaussian_kernel(cfg.ratio, cfg.sigma);

    std::vector<std::pair<double, double>> intervals;
    const double lo = wl.front(), hi = wl.back();
    const double width = (hi - lo) / cfg.msi_bands;
    for (int i = 0; i < cfg.msi_bands; ++i)
        intervals.emplace_back(lo + i * width, i + 1 == cfg.msi_bands ? hi : lo + (i + 1) * width);
    scene.coverage = build_coverage(wl, intervals);
    scene.srf_weights = triangular_srf(scene.coverage, wl);

    scene.observed = simulate_triplet(scene.hrhsi, scene.psf, scene.coverage, scene.srf_weights);
    return scene;
}

}  // namespace specfuse

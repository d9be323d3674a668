#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "specfuse/cube.hpp"
#include "specfuse/degrade.hpp"

namespace specfuse {

struct SceneConfig {
    int rows = 48;
    int cols = 48;
    int bands = 31;
    int p_true = 4;
    int ratio = 4;
    double sigma = 0.5;
    int msi_bands = 3;
    std::uint64_t seed = 0;
    void validate() const;
};

struct SyntheticScene {
    ImageCube hrhsi;
    Eigen::MatrixXd endmembers;        // p_true x bands, rows in [0,1]
    Eigen::MatrixXd abundance;         // pixels x p_true, rows on the simplex
    GaussianPsf psf;
    SpectralCoverage coverage;
    std::vector<Eigen::VectorXd> srf_weights;
    DegradedTriplet observed;
};

// Evenly spaced band centers over 400..700 nm.
std::vector<double> synth_wavelengths(int bands);

// Smooth bump-mixture spectra rescaled into sub-ranges of [0.05, 0.95];
// any two rows are at least 10 degrees apart in spectral angle.
Eigen::MatrixXd gen_endmembers(int p_true, int bands, std::uint64_t seed);

// Low-frequency cosine fields pushed through a sharpened softmax. Rows sum
// to one; the sharpening leaves most entries small.
Eigen::MatrixXd gen_abundance_field(int rows, int cols, int p_true, std::uint64_t seed);

// Triangular response over each coverage interval with a small floor, so
// every covered band keeps nonzero weight.
std::vector<Eigen::VectorXd> triangular_srf(const SpectralCoverage& cov,
                                            const std::vector<double>& wavelengths);

// Full scene: mixed cube, ground-truth factors, blur kernel, band grouping,
// and the degraded observation pair derived from them.
SyntheticScene gen_scene(const SceneConfig& cfg);

}  // namespace specfuse

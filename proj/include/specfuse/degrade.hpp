#pragma once

#include <Eigen/Dense>
#include <vector>

#include "specfuse/cube.hpp"

namespace specfuse {

// Ground-truth spatial blur: a normalized, rotation-symmetric Gaussian tap
// grid of side `size`, which is also the downsampling stride.
struct GaussianPsf {
    int size = 0;
    double sigma = 0.0;
    Eigen::MatrixXd kernel;  // size x size, entries >= 0, sums to 1
};

// Samples exp(-(x^2+y^2)/(2 sigma^2)) at offsets centered on (size-1)/2 and
// normalizes to unit sum.
GaussianPsf gaussian_kernel(int size, double sigma);

// Non-overlapping k x k blocks, one weighted sum per block per band.
// rows and cols must be divisible by the kernel side.
ImageCube apply_psf(const ImageCube& cube, const Eigen::MatrixXd& kernel);
inline ImageCube apply_psf(const ImageCube& cube, const GaussianPsf& psf) {
    return apply_psf(cube, psf.kernel);
}

// Band i of the output is the normalized weighted sum of the covered HSI
// bands: sum_j w_ij * x_j / sum_j w_ij, per pixel.
ImageCube apply_srf(const ImageCube& cube, const SpectralCoverage& cov,
                    const std::vector<Eigen::VectorXd>& weights);

struct DegradedTriplet {
    ImageCube lrhsi;
    ImageCube hrmsi;
    ImageCube lrmsi;
};

// LrHSI = PSF(X), HrMSI = SRF(X), LrMSI = SRF(PSF(X)). The two operator
// orders for the LrMSI agree because the blur is band-wise and the band
// resampling is pixel-wise.
DegradedTriplet simulate_triplet(const ImageCube& hrhsi, const GaussianPsf& psf,
                                 const SpectralCoverage& cov,
                                 const std::vector<Eigen::VectorXd>& weights);

}  // namespace specfuse

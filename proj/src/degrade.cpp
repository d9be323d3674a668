#include "specfuse/degrade.hpp"

#include <cmath>
#include <string>

#include "specfuse/errors.hpp"

namespace specfuse {

GaussianPsf gaussian_kernel(int size, double sigma) {
    if (size < 1) throw ConfigError("gaussian_kernel: size must be >= 1, got " + std::to_string(size));
    if (!(sigma > 0.0)) throw ConfigError("gaussian_kernel: sigma must be > 0");

    GaussianPsf psf;
    psf.size = size;
    psf.sigma = sigma;
    psf.kernel.resize(size, size);
    const double center = (size - 1) / 2.0;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    double sum = 0.0;
    for (int u = 0; u < size; ++u) {
        for (int v = 0; v < size; ++v) {
            const double xu = u - center;
            const double xv = v - center;
            const double w = std::exp(-(xu * xu + xv * xv) * inv2s2);
            psf.kernel(u, v) = w;
            sum += w;
        }
    }
    psf.kernel /= sum;
    return psf;
}

ImageCube apply_psf(const ImageCube& cube, const Eigen::MatrixXd& kernel) {
    const int k = static_cast<int>(kernel.rows());
    if (kernel.cols() != k) throw ShapeError("apply_psf: kernel must be square");
    if (cube.rows % k != 0)
        throw ShapeError("apply_psf: rows (" + std::to_string(cube.rows) +
                         ") not divisible by kernel size " + std::to_string(k));
    if (cube.cols % k != 0)
        throw ShapeError("apply_psf: cols (" + std::to_string(cube.cols) +
                         ") not divisible by kernel size " + std::to_string(k));

    const int orows = cube.rows / k;
    const int ocols = cube.cols / k;
    ImageCube out;
    out.rows = orows;
    out.cols = ocols;
    out.bands = cube.bands;
    out.wavelengths_nm = cube.wavelengths_nm;
    out.data.resize(out.size());
    for (int b = 0; b < cube.bands; ++b) {
        for (int br = 0; br < orows; ++br) {
            for (int bc = 0; bc < ocols; ++bc) {
                double acc = 0.0;
                for (int u = 0; u < k; ++u)
                    for (int v = 0; v < k; ++v)
                        acc += kernel(u, v) * cube.at(br * k + u, bc * k + v, b);
                out.at(br, bc, b) = acc;
            }
        }
    }
    return ImageCube::create(out.rows, out.cols, out.bands, std::move(out.data),
                             std::move(out.wavelengths_nm));
}

ImageCube apply_srf(const ImageCube& cube, const SpectralCoverage& cov,
                    const std::vector<Eigen::VectorXd>& weights) {
    if (cov.hsi_bands != cube.bands)
        throw ShapeError("apply_srf: coverage built for " + std::to_string(cov.hsi_bands) +
                         " bands, cube has " + std::to_string(cube.bands));
    if (weights.size() != cov.bands.size())
        throw ShapeError("apply_srf: expected " + std::to_string(cov.bands.size()) +
                         " weight vectors, got " + std::to_string(weights.size()));

    const int l = cov.msi_bands();
    for (int i = 0; i < l; ++i) {
        const auto& idx = cov.bands[i].hsi_indices;
        if (weights[i].size() != static_cast<long>(idx.size()))
            throw ShapeError("apply_srf: weight vector " + std::to_string(i) + " has " +
                             std::to_string(weights[i].size()) + " entries, coverage has " +
                             std::to_string(idx.size()));
        if ((weights[i].array() < 0.0).any())
            throw ConfigError("apply_srf: negative weight in MSI band " + std::to_string(i));
        if (!(weights[i].sum() > 0.0))
            throw ConfigError("apply_srf: degenerate all-zero weights for MSI band " +
                              std::to_string(i));
    }

    ImageCube out;
    out.rows = cube.rows;
    out.cols = cube.cols;
    out.bands = l;
    out.data.resize(out.size());

    // band centers as output metadata, kept only if they stay ordered
    std::vector<double> centers(l);
    bool ordered = true;
    for (int i = 0; i < l; ++i) {
        centers[i] = 0.5 * (cov.bands[i].lo_nm + cov.bands[i].hi_nm);
        if (i > 0 && !(centers[i - 1] < centers[i])) ordered = false;
    }

    const std::size_t plane = cube.plane();
    for (int i = 0; i < l; ++i) {
        const auto& idx = cov.bands[i].hsi_indices;
        const double wsum = weights[i].sum();
        double* dst = out.data.data() + static_cast<std::size_t>(i) * plane;
        for (std::size_t px = 0; px < plane; ++px) dst[px] = 0.0;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const double w = weights[i](static_cast<long>(j)) / wsum;
            const double* src = cube.data.data() + static_cast<std::size_t>(idx[j]) * plane;
            for (std::size_t px = 0; px < plane; ++px) dst[px] += w * src[px];
        }
    }
    return ImageCube::create(out.rows, out.cols, out.bands, std::move(out.data),
                             ordered ? std::move(centers) : std::vector<double>{});
}

DegradedTriplet simulate_triplet(const ImageCube& hrhsi, const GaussianPsf& psf,
                                 const SpectralCoverage& cov,
                                 const std::vector<Eigen::VectorXd>& weights) {
    DegradedTriplet t;
    t.lrhsi = apply_psf(hrhsi, psf);
    t.hrmsi = apply_srf(hrhsi, cov, weights);
    t.lrmsi = apply_srf(t.lrhsi, cov, weights);
    return t;
}

}  // namespace specfuse

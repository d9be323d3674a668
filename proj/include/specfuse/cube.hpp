#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace specfuse {

// Dense reflectance cube, band-sequential storage: data[b*rows*cols + r*cols + c].
// Values live in [0,1]; construction through create() validates that (with a
// 1e-9 snap tolerance so float32 round trips survive).
struct ImageCube {
    int rows = 0;
    int cols = 0;
    int bands = 0;
    std::vector<double> data;
    std::vector<double> wavelengths_nm;  // empty, or one center per band, strictly increasing

    std::size_t plane() const { return static_cast<std::size_t>(rows) * cols; }
    std::size_t size() const { return plane() * bands; }

    double at(int r, int c, int b) const { return data[static_cast<std::size_t>(b) * plane() + static_cast<std::size_t>(r) * cols + c]; }
    double& at(int r, int c, int b) { return data[static_cast<std::size_t>(b) * plane() + static_cast<std::size_t>(r) * cols + c]; }

    static ImageCube create(int rows, int cols, int bands, std::vector<double> data,
                            std::vector<double> wavelengths_nm = {});
    static ImageCube zeros(int rows, int cols, int bands, std::vector<double> wavelengths_nm = {});
};

// Unfolded view of a cube: one spectrum per row, pixels in row-major order,
// plus the spatial dims needed by anything that convolves.
struct PlanarImage {
    Eigen::MatrixXd m;  // (rows*cols) x channels
    int rows = 0;
    int cols = 0;

    int channels() const { return static_cast<int>(m.cols()); }
    long pixels() const { return m.rows(); }
};

// Row k of the result is the spectrum of pixel k (row-major order).
Eigen::MatrixXd unfold(const ImageCube& cube);
ImageCube fold(const Eigen::MatrixXd& mat, int rows, int cols,
               std::vector<double> wavelengths_nm = {});

PlanarImage to_planar(const ImageCube& cube);

// Elementwise min(max(x,0),1). Gradient contract (used by the tape): the
// adjoint passes through only where 0 < x < 1 strictly, and is zero elsewhere.
double clamp01(double x);
Eigen::MatrixXd clamp01(const Eigen::MatrixXd& x);  // rejects NaN input
std::vector<double> clamp01(const std::vector<double>& x);

// Which HSI bands feed each MSI band. Membership uses band centers and
// inclusive bounds: j is covered by band i iff lo_i <= wl_j <= hi_i.
struct SpectralCoverage {
    struct Band {
        double lo_nm = 0.0;
        double hi_nm = 0.0;
        std::vector<int> hsi_indices;
    };
    std::vector<Band> bands;
    int hsi_bands = 0;

    int msi_bands() const { return static_cast<int>(bands.size()); }
};

SpectralCoverage build_coverage(const std::vector<double>& hsi_wavelengths_nm,
                                const std::vector<std::pair<double, double>>& msi_intervals_nm);

// Cube file format: raw little-endian float32, band-sequential, with a JSON
// sidecar at <path>.json holding {rows, cols, bands, dtype, interleave,
// wavelengths_nm}. Byte count is enforced on load.
void save_cube(const ImageCube& cube, const std::string& path);
ImageCube load_cube(const std::string& path, bool normalize = false);

}  // namespace specfuse

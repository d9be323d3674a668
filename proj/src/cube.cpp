#include "specfuse/cube.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "nlohmann/json.hpp"
#include "specfuse/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "cube I/O assumes a little-endian host");

namespace specfuse {

namespace {

constexpr double kRangeTol = 1e-9;

void validate_cube(ImageCube& c) {
    if (c.rows <= 0 || c.cols <= 0 || c.bands <= 0)
        throw ShapeError("cube dimensions must be positive, got " + std::to_string(c.rows) + "x" +
                         std::to_string(c.cols) + "x" + std::to_string(c.bands));
    if (c.data.size() != c.size())
        throw ShapeError("cube data length " + std::to_string(c.data.size()) + " does not match " +
                         std::to_string(c.rows) + "x" + std::to_string(c.cols) + "x" +
                         std::to_string(c.bands));
    for (std::size_t i = 0; i < c.data.size(); ++i) {
        double v = c.data[i];
        if (!std::isfinite(v))
            throw ConfigError("cube contains a non-finite value at flat index " + std::to_string(i));
        if (v < 0.0 || v > 1.0) {
            if (v >= -kRangeTol && v <= 1.0 + kRangeTol) {
                c.data[i] = std::clamp(v, 0.0, 1.0);
            } else {
                throw ConfigError("cube value " + std::to_string(v) + " at flat index " +
                                  std::to_string(i) + " is outside [0,1]");
            }
        }
    }
    if (!c.wavelengths_nm.empty()) {
        if (static_cast<int>(c.wavelengths_nm.size()) != c.bands)
            throw ShapeError("wavelength vector length " + std::to_string(c.wavelengths_nm.size()) +
                             " does not match band count " + std::to_string(c.bands));
        for (int b = 1; b < c.bands; ++b)
            if (!(c.wavelengths_nm[b - 1] < c.wavelengths_nm[b]))
                throw ConfigError("wavelengths must be strictly increasing (violated at band " +
                                  std::to_string(b) + ")");
    }
}

}  // namespace

ImageCube ImageCube::create(int rows, int cols, int bands, std::vector<double> data,
                            std::vector<double> wavelengths_nm) {
    ImageCube c;
    c.rows = rows;
    c.cols = cols;
    c.bands = bands;
    c.data = std::move(data);
    c.wavelengths_nm = std::move(wavelengths_nm);
    validate_cube(c);
    return c;
}

ImageCube ImageCube::zeros(int rows, int cols, int bands, std::vector<double> wavelengths_nm) {
    std::vector<double> d(static_cast<std::size_t>(rows) * cols * bands, 0.0);
    return create(rows, cols, bands, std::move(d), std::move(wavelengths_nm));
}

Eigen::MatrixXd unfold(const ImageCube& cube) {
    const std::size_t plane = cube.plane();
    Eigen::MatrixXd m(static_cast<long>(plane), cube.bands);
    for (int b = 0; b < cube.bands; ++b) {
        const double* src = cube.data.data() + static_cast<std::size_t>(b) * plane;
        for (std::size_t k = 0; k < plane; ++k) m(static_cast<long>(k), b) = src[k];
    }
    return m;
}

ImageCube fold(const Eigen::MatrixXd& mat, int rows, int cols, std::vector<double> wavelengths_nm) {
    if (rows <= 0 || cols <= 0)
        throw ShapeError("fold: target dims must be positive");
    const std::size_t plane = static_cast<std::size_t>(rows) * cols;
    if (static_cast<std::size_t>(mat.rows()) != plane)
        throw ShapeError("fold: matrix has " + std::to_string(mat.rows()) + " rows, expected " +
                         std::to_string(plane));
    const int bands = static_cast<int>(mat.cols());
    std::vector<double> data(plane * bands);
    for (int b = 0; b < bands; ++b) {
        double* dst = data.data() + static_cast<std::size_t>(b) * plane;
        for (std::size_t k = 0; k < plane; ++k) dst[k] = mat(static_cast<long>(k), b);
    }
    return ImageCube::create(rows, cols, bands, std::move(data), std::move(wavelengths_nm));
}

PlanarImage to_planar(const ImageCube& cube) {
    return PlanarImage{unfold(cube), cube.rows, cube.cols};
}

double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

Eigen::MatrixXd clamp01(const Eigen::MatrixXd& x) {
    if (x.hasNaN()) throw ConfigError("clamp01: NaN input");
    return x.array().max(0.0).min(1.0);
}

std::vector<double> clamp01(const std::vector<double>& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::isnan(x[i])) throw ConfigError("clamp01: NaN input");
        out[i] = clamp01(x[i]);
    }
    return out;
}

SpectralCoverage build_coverage(const std::vector<double>& hsi_wavelengths_nm,
                                const std::vector<std::pair<double, double>>& msi_intervals_nm) {
    if (hsi_wavelengths_nm.empty()) throw ConfigError("build_coverage: empty wavelength vector");
    for (std::size_t j = 1; j < hsi_wavelengths_nm.size(); ++j)
        if (!(hsi_wavelengths_nm[j - 1] < hsi_wavelengths_nm[j]))
            throw ConfigError("build_coverage: wavelengths must be strictly increasing");

    SpectralCoverage cov;
    cov.hsi_bands = static_cast<int>(hsi_wavelengths_nm.size());
    for (std::size_t i = 0; i < msi_intervals_nm.size(); ++i) {
        const auto [lo, hi] = msi_intervals_nm[i];
        if (!(lo < hi))
            throw ConfigError("build_coverage: MSI band " + std::to_string(i) +
                              " has a degenerate interval [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
        SpectralCoverage::Band band;
        band.lo_nm = lo;
        band.hi_nm = hi;
        for (int j = 0; j < cov.hsi_bands; ++j)
            if (lo <= hsi_wavelengths_nm[j] && hsi_wavelengths_nm[j] <= hi)
                band.hsi_indices.push_back(j);
        if (band.hsi_indices.empty())
            throw ConfigError("build_coverage: empty coverage for MSI band " + std::to_string(i) +
                              " [" + std::to_string(lo) + ", " + std::to_string(hi) + "] nm");
        cov.bands.push_back(std::move(band));
    }
    return cov;
}

void save_cube(const ImageCube& cube, const std::string& path) {
    std::ofstream raw(path, std::ios::binary | std::ios::trunc);
    if (!raw) throw ConfigError("cannot open " + path + " for writing");
    std::vector<float> buf(cube.data.size());
    for (std::size_t i = 0; i < cube.data.size(); ++i) buf[i] = static_cast<float>(cube.data[i]);
    raw.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!raw) throw ConfigError("short write to " + path);
    raw.close();

    nlohmann::json sidecar;
    sidecar["rows"] = cube.rows;
    sidecar["cols"] = cube.cols;
    sidecar["bands"] = cube.bands;
    sidecar["dtype"] = "f32le";
    sidecar["interleave"] = "bsq";
    if (!cube.wavelengths_nm.empty()) sidecar["wavelengths_nm"] = cube.wavelengths_nm;
    std::ofstream side(path + ".json", std::ios::trunc);
    if (!side) throw ConfigError("cannot open " + path + ".json for writing");
    side << sidecar.dump(2) << "\n";
}

ImageCube load_cube(const std::string& path, bool normalize) {
    std::ifstream side(path + ".json");
    if (!side) throw ConfigError("cube sidecar not found: " + path + ".json");
    nlohmann::json sidecar;
    try {
        side >> sidecar;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse " + path + ".json: " + e.what());
    }
    const int rows = sidecar.at("rows").get<int>();
    const int cols = sidecar.at("cols").get<int>();
    const int bands = sidecar.at("bands").get<int>();
    if (sidecar.at("dtype").get<std::string>() != "f32le")
        throw ConfigError(path + ": unsupported dtype (expected f32le)");
    if (sidecar.at("interleave").get<std::string>() != "bsq")
        throw ConfigError(path + ": unsupported interleave (expected bsq)");
    std::vector<double> wl;
    if (sidecar.contains("wavelengths_nm")) wl = sidecar["wavelengths_nm"].get<std::vector<double>>();

    std::ifstream raw(path, std::ios::binary | std::ios::ate);
    if (!raw) throw ConfigError("cube file not found: " + path);
    const std::size_t expected =
        static_cast<std::size_t>(rows) * cols * bands * sizeof(float);
    const std::size_t actual = static_cast<std::size_t>(raw.tellg());
    if (actual != expected)
        throw ConfigError(path + ": file is " + std::to_string(actual) + " bytes, expected " +
                          std::to_string(expected));
    raw.seekg(0);
    std::vector<float> buf(static_cast<std::size_t>(rows) * cols * bands);
    raw.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expected));
    if (!raw) throw ConfigError("short read from " + path);

    std::vector<double> data(buf.begin(), buf.end());
    if (normalize) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (double v : data) {
            if (!std::isfinite(v)) throw ConfigError(path + ": non-finite value, cannot normalize");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(hi > lo)) throw ConfigError(path + ": constant cube, cannot min-max normalize");
        const double scale = 1.0 / (hi - lo);
        for (double& v : data) v = (v - lo) * scale;
    }
    return ImageCube::create(rows, cols, bands, std::move(data), std::move(wl));
}

}  // namespace specfuse

#include "specfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "nlohmann/json.hpp"
#include "specfuse/errors.hpp"

namespace specfuse {

namespace {

constexpr double kRadToDeg = 57.295779513082320876798154814105;

void check_same_shape(const ImageCube& ref, const ImageCube& est) {
    if (ref.rows != est.rows || ref.cols != est.cols || ref.bands != est.bands)
        throw ShapeError("metrics: shape mismatch " + std::to_string(ref.rows) + "x" +
                         std::to_string(ref.cols) + "x" + std::to_string(ref.bands) + " vs " +
                         std::to_string(est.rows) + "x" + std::to_string(est.cols) + "x" +
                         std::to_string(est.bands));
}

}  // namespace

double psnr_band(const ImageCube& ref, const ImageCube& est, int band) {
    check_same_shape(ref, est);
    const std::size_t plane = ref.plane();
    const double* r = ref.data.data() + static_cast<std::size_t>(band) * plane;
    const double* e = est.data.data() + static_cast<std::size_t>(band) * plane;
    double peak = 0.0;
    double sse = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
        peak = std::max(peak, r[i]);
        const double d = r[i] - e[i];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(plane);
    if (mse == 0.0) return kPsnrCapDb;
    if (peak <= 0.0) return 0.0;  // all-zero reference band with nonzero error
    return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

double mpsnr(const ImageCube& ref, const ImageCube& est) {
    check_same_shape(ref, est);
    double acc = 0.0;
    for (int b = 0; b < ref.bands; ++b) acc += psnr_band(ref, est, b);
    return acc / ref.bands;
}

double sam_pixel(const ImageCube& ref, const ImageCube& est, int r, int c) {
    double dot = 0.0, nr2 = 0.0, ne2 = 0.0;
    for (int b = 0; b < ref.bands; ++b) {
        const double rv = ref.at(r, c, b);
        const double ev = est.at(r, c, b);
        dot += rv * ev;
        nr2 += rv * rv;
        ne2 += ev * ev;
    }
    if (nr2 == 0.0) return 0.0;   // excluded upstream
    if (ne2 == 0.0) return 90.0;  // zero estimate against a nonzero reference
    const double cosv = std::clamp(dot / std::sqrt(nr2 * ne2), -1.0, 1.0);
    return std::acos(cosv) * kRadToDeg;
}

double msam(const ImageCube& ref, const ImageCube& est) {
    check_same_shape(ref, est);
    double acc = 0.0;
    long counted = 0;
    for (int r = 0; r < ref.rows; ++r) {
        for (int c = 0; c < ref.cols; ++c) {
            double nr2 = 0.0;
            for (int b = 0; b < ref.bands; ++b) nr2 += ref.at(r, c, b) * ref.at(r, c, b);
            if (nr2 == 0.0) continue;
            acc += sam_pixel(ref, est, r, c);
            ++counted;
        }
    }
    return counted > 0 ? acc / counted : 0.0;
}

double ergas(const ImageCube& ref, const ImageCube& est, int ratio) {
    check_same_shape(ref, est);
    if (ratio < 1) throw ConfigError("ergas: ratio must be >= 1");
    const std::size_t plane = ref.plane();
    double acc = 0.0;
    for (int b = 0; b < ref.bands; ++b) {
        const double* r = ref.data.data() + static_cast<std::size_t>(b) * plane;
        const double* e = est.data.data() + static_cast<std::size_t>(b) * plane;
        double sse = 0.0, sum = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            const double d = r[i] - e[i];
            sse += d * d;
            sum += r[i];
        }
        const double band_rmse = std::sqrt(sse / static_cast<double>(plane));
        const double band_mean = std::max(std::abs(sum / static_cast<double>(plane)), 1e-12);
        const double ratio_term = band_rmse / band_mean;
        acc += ratio_term * ratio_term;
    }
    return 100.0 / ratio * std::sqrt(acc / ref.bands);
}

double rmse(const ImageCube& ref, const ImageCube& est) {
    check_same_shape(ref, est);
    double sse = 0.0;
    for (std::size_t i = 0; i < ref.data.size(); ++i) {
        const double d = ref.data[i] - est.data[i];
        sse += d * d;
    }
    return std::sqrt(sse / static_cast<double>(ref.data.size()));
}

double mrae(const ImageCube& ref, const ImageCube& est) {
    check_same_shape(ref, est);
    double acc = 0.0;
    for (std::size_t i = 0; i < ref.data.size(); ++i)
        acc += std::abs(ref.data[i] - est.data[i]) / std::max(ref.data[i], kMraeEps);
    return acc / static_cast<double>(ref.data.size());
}

MetricsReport evaluate_metrics(const ImageCube& ref, const ImageCube& est, int ratio) {
    check_same_shape(ref, est);
    MetricsReport rep;
    rep.psnr_per_band_db.resize(ref.bands);
    for (int b = 0; b < ref.bands; ++b) rep.psnr_per_band_db[b] = psnr_band(ref, est, b);
    rep.mpsnr_db = 0.0;
    for (double v : rep.psnr_per_band_db) rep.mpsnr_db += v;
    rep.mpsnr_db /= ref.bands;

    rep.ergas = ergas(ref, est, ratio);
    rep.rmse = rmse(ref, est);
    rep.mrae = mrae(ref, est);

    rep.rmse_map.resize(ref.rows, ref.cols);
    rep.mrae_map.resize(ref.rows, ref.cols);
    rep.sam_map.resize(ref.rows, ref.cols);
    double sam_acc = 0.0;
    long sam_counted = 0;
    for (int r = 0; r < ref.rows; ++r) {
        for (int c = 0; c < ref.cols; ++c) {
            double sse = 0.0, rel = 0.0, nr2 = 0.0;
            for (int b = 0; b < ref.bands; ++b) {
                const double rv = ref.at(r, c, b);
                const double ev = est.at(r, c, b);
                const double d = rv - ev;
                sse += d * d;
                rel += std::abs(d) / std::max(rv, kMraeEps);
                nr2 += rv * rv;
            }
            rep.rmse_map(r, c) = std::sqrt(sse / ref.bands);
            rep.mrae_map(r, c) = rel / ref.bands;
            const double sam = sam_pixel(ref, est, r, c);
            rep.sam_map(r, c) = sam;
            if (nr2 == 0.0) {
                ++rep.sam_excluded;
            } else {
                sam_acc += sam;
                ++sam_counted;
            }
        }
    }
    rep.msam_deg = sam_counted > 0 ? sam_acc / sam_counted : 0.0;
    return rep;
}

double psf_kernel_error(const Eigen::MatrixXd& learned, const Eigen::MatrixXd& truth) {
    if (learned.rows() != truth.rows() || learned.cols() != truth.cols())
        throw ShapeError("psf_kernel_error: kernel size mismatch");
    const double ls = learned.sum();
    const double ts = truth.sum();
    if (!(ls > 0.0) || !(ts > 0.0))
        throw ConfigError("psf_kernel_error: kernel sums must be positive to normalize");
    const Eigen::MatrixXd d = learned / ls - truth / ts;
    return std::sqrt(d.array().square().mean());
}

void write_heatmap(const Eigen::MatrixXd& map, const std::string& base_path) {
    const long rows = map.rows(), cols = map.cols();

    {
        std::ofstream raw(base_path + ".f32", std::ios::binary | std::ios::trunc);
        if (!raw) throw ConfigError("cannot open " + base_path + ".f32 for writing");
        std::vector<float> buf(static_cast<std::size_t>(rows) * cols);
        for (long r = 0; r < rows; ++r)
            for (long c = 0; c < cols; ++c)
                buf[static_cast<std::size_t>(r) * cols + c] = static_cast<float>(map(r, c));
        raw.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }

    const double lo = map.minCoeff();
    const double hi = map.maxCoeff();
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    {
        std::ofstream pgm(base_path + ".pgm", std::ios::binary | std::ios::trunc);
        if (!pgm) throw ConfigError("cannot open " + base_path + ".pgm for writing");
        pgm << "P5\n" << cols << " " << rows << "\n255\n";
        std::vector<std::uint8_t> buf(static_cast<std::size_t>(rows) * cols);
        for (long r = 0; r < rows; ++r)
            for (long c = 0; c < cols; ++c)
                buf[static_cast<std::size_t>(r) * cols + c] =
                    static_cast<std::uint8_t>(std::lround((map(r, c) - lo) * scale));
        pgm.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
    }

    nlohmann::json sidecar;
    sidecar["rows"] = rows;
    sidecar["cols"] = cols;
    sidecar["dtype"] = "f32le";
    sidecar["min"] = lo;
    sidecar["max"] = hi;
    std::ofstream side(base_path + ".json", std::ios::trunc);
    if (!side) throw ConfigError("cannot open " + base_path + ".json for writing");
    side << sidecar.dump(2) << "\n";
}

}  // namespace specfuse

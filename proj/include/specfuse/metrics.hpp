#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "specfuse/cube.hpp"

namespace specfuse {

// Quality measures between a reference cube and an estimate of it, plus the
// per-band and per-pixel diagnostics the CLI exports.
struct MetricsReport {
    double mpsnr_db = 0.0;
    double msam_deg = 0.0;
    double ergas = 0.0;
    double rmse = 0.0;
    double mrae = 0.0;
    std::vector<double> psnr_per_band_db;
    Eigen::MatrixXd rmse_map;  // rows x cols, per-pixel RMSE over bands
    Eigen::MatrixXd mrae_map;
    Eigen::MatrixXd sam_map;   // degrees
    long sam_excluded = 0;     // pixels with zero reference norm, left out of msam
};

// Peak is the reference band maximum; exact bands and anything above the cap
// report 100 dB.
double psnr_band(const ImageCube& ref, const ImageCube& est, int band);
double mpsnr(const ImageCube& ref, const ImageCube& est);

double sam_pixel(const ImageCube& ref, const ImageCube& est, int r, int c);
double msam(const ImageCube& ref, const ImageCube& est);

double ergas(const ImageCube& ref, const ImageCube& est, int ratio);

double rmse(const ImageCube& ref, const ImageCube& est);
double mrae(const ImageCube& ref, const ImageCube& est);

MetricsReport evaluate_metrics(const ImageCube& ref, const ImageCube& est, int ratio);

// RMSE between two kernels after normalizing each to unit sum, so a learned
// kernel is compared up to scale.
double psf_kernel_error(const Eigen::MatrixXd& learned, const Eigen::MatrixXd& truth);

// Writes <base>.f32 (raw little-endian float32, row-major), <base>.pgm
// (8-bit, min-max scaled) and <base>.json (dims plus the scaling range).
void write_heatmap(const Eigen::MatrixXd& map, const std::string& base_path);

constexpr double kPsnrCapDb = 100.0;
constexpr double kMraeEps = 1e-3;

}  // namespace specfuse

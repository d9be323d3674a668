#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "specfuse/autodiff.hpp"
#include "specfuse/cube.hpp"

namespace specfuse {

class Rng;

// Stack of 1x1 convolutions over pixel spectra, i.e. per-pixel dense layers:
// widths [in, hidden..., out], leaky activation between layers, none after
// the last.
struct Conv1x1Stack {
    std::vector<Eigen::MatrixXd> weights;  // layer i: widths[i] x widths[i+1]
    std::vector<Eigen::MatrixXd> biases;   // 1 x widths[i+1]
    double leaky_slope = 0.02;

    int in_width() const;
    int out_width() const;
};

// Everything the optimizer updates. The two encoders are private per input;
// the endmember matrix, blur kernel, and band weights are shared across the
// reconstruction paths.
struct ModelParams {
    Conv1x1Stack enc_lr;                        // spectra -> abundances, low-res input
    Conv1x1Stack enc_hr;                        // spectra -> abundances, high-res input
    Eigen::MatrixXd endmembers;                 // p x hsi_bands, entries in [0,1]
    Eigen::MatrixXd psf_kernel;                 // ratio x ratio, entries in [0,1]
    std::vector<Eigen::MatrixXd> srf_weights;   // per MSI band: n_i x 1, entries in [0,1]

    int p() const { return static_cast<int>(endmembers.rows()); }
    int hsi_bands() const { return static_cast<int>(endmembers.cols()); }
    int ratio() const { return static_cast<int>(psf_kernel.rows()); }

    // Canonical (name, array) enumeration; fixed order keyed by these names
    // everywhere gradients, optimizer state, and checkpoints meet.
    std::vector<std::pair<std::string, Eigen::MatrixXd*>> entries();
    std::vector<std::pair<std::string, const Eigen::MatrixXd*>> entries() const;
};

// Arrays kept inside [0,1] by projection after each optimizer step.
bool is_box_constrained(const std::string& entry_name);

enum class AbundanceConstraint { Clamp, Softmax };

// Reconstruction branches that can be dropped for ablation runs. The main
// spectra path (abundances and the decoded high-res cube) always runs.
struct Ablation {
    bool drop_Za = false;   // low-res self-reconstruction
    bool drop_Zb = false;   // cross path: blurred abundances re-decoded
    bool drop_Y = false;    // band-resampled high-res reconstruction
    bool drop_Ylr = false;  // low-res consistency pair
};

struct ForwardOptions {
    AbundanceConstraint constraint = AbundanceConstraint::Clamp;
    Ablation ablation;
    double eps_norm = 1e-8;  // band-weight normalization guard
};

// Graph handles for one recorded forward pass. Invalid Vars mark branches
// the ablation dropped.
struct ForwardVars {
    ad::Var A_lr;       // abundances from the low-res input
    ad::Var A_hr;       // abundances from the high-res input
    ad::Var A_blur;     // A_hr pushed through the blur kernel
    ad::Var Z_rec_a;    // decode(A_lr)
    ad::Var Z_rec_b;    // decode(A_blur)
    ad::Var X_rec;      // decode(A_hr), the fused product
    ad::Var Y_rec;      // band-resampled X_rec
    ad::Var Ylr_a;      // blurred high-res MSI input
    ad::Var Ylr_b;      // band-resampled low-res HSI input
};

struct ParamVars {
    std::vector<ad::Var> enc_lr_w, enc_lr_b, enc_hr_w, enc_hr_b;
    ad::Var endmembers, psf_kernel;
    std::vector<ad::Var> srf_weights;
    std::vector<std::pair<std::string, ad::Var>> named;  // entries() order
    double slope_lr = 0.02, slope_hr = 0.02;
};

ParamVars register_params(ad::Tape& tape, const ModelParams& params);

ForwardVars build_forward(ad::Tape& tape, const ParamVars& pv, ad::Var Z, ad::Var Y,
                          const SpectralCoverage& cov, const ForwardOptions& opt);

// Plain-value snapshot of the same pass.
struct ForwardBundle {
    PlanarImage A_lr, A_hr, A_blur;
    PlanarImage Z_rec_a, Z_rec_b, X_rec, Y_rec, Ylr_a, Ylr_b;
};

ForwardBundle forward_all(const ModelParams& params, const PlanarImage& Z,
                          const PlanarImage& Y, const SpectralCoverage& cov,
                          const ForwardOptions& opt = {});

// Single-op helpers sharing the tape math, for piecewise use.
PlanarImage encode(const PlanarImage& x, const Conv1x1Stack& stack,
                   AbundanceConstraint constraint);
PlanarImage decode_shared(const PlanarImage& abundances, const Eigen::MatrixXd& endmembers);
PlanarImage psf_forward(const PlanarImage& x, const Eigen::MatrixXd& kernel);
PlanarImage srf_forward(const PlanarImage& x, const SpectralCoverage& cov,
                        const std::vector<Eigen::MatrixXd>& weights, double eps = 1e-8);

// Encoder weights ~ U(+-sqrt(1/fan_in)), zero biases; endmembers seeded from
// p sampled pixel spectra of Z; uniform kernel; all-ones band weights.
ModelParams init_params(const PlanarImage& Z, const SpectralCoverage& cov, int p,
                        int ratio, const std::vector<int>& hidden, double leaky_slope,
                        Rng& rng);

// Binary checkpoint: magic, entry count, then per entry a length-prefixed
// name, the two dims, and row-major f64 little-endian data.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

// Bridge to the finite-difference checker's generic parameter map.
ad::ParamMap to_param_map(const ModelParams& params);
void assign_from_param_map(ModelParams& params, const ad::ParamMap& map);

}  // namespace specfuse

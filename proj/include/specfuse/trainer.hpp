#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "specfuse/cube.hpp"
#include "specfuse/losses.hpp"
#include "specfuse/model.hpp"

namespace specfuse {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;  // added to the root of the second moment, not under it
};

struct TrainConfig {
    int iterations = 10000;
    double lr0 = 5e-3;
    AdamConfig adam;
    LossWeights weights;
    int p = 100;
    AbundanceConstraint constraint = AbundanceConstraint::Clamp;
    Ablation ablation;
    std::uint64_t seed = 0;
    bool reproducible = true;  // kept in the config surface; this build is
                               // sequential, so runs are deterministic either way
    std::vector<int> encoder_hidden = {128, 64};
    double leaky_slope = 0.02;
    double eps_norm = 1e-8;
    Reduction reduction = Reduction::Mean;
    int metrics_every = 100;
    void validate() const;
};

// One first/second moment pair per parameter entry, entries() order; the
// step counter is shared.
struct AdamState {
    std::vector<Eigen::MatrixXd> m, v;
    long step = 0;
};

struct TrainLogRow {
    int iter = 0;
    double lr = 0.0;
    LossBreakdown loss;
    bool has_metrics = false;
    double mpsnr_db = 0.0;
    double msam_deg = 0.0;
};

struct TrainLog {
    bool with_metrics = false;
    std::vector<TrainLogRow> rows;
    // Numbers printed with %.17g so identical runs give identical bytes.
    void write_csv(const std::string& path) const;
};

struct TrainResult {
    ModelParams params;
    PlanarImage x_hat;
    ForwardBundle final_bundle;
    TrainLog log;
};

// Called after the projection of each iteration, before the next forward.
using IterObserver =
    std::function<void(int iter, const ModelParams& params, const LossBreakdown& loss)>;

double lr_at(int iter, const TrainConfig& cfg);

// Bias-corrected update of one array: p -= lr * m_hat / (sqrt(v_hat) + eps).
// The caller advances state.step once per iteration before the first array.
void adam_update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad,
                 Eigen::MatrixXd& m, Eigen::MatrixXd& v, long step, double lr,
                 const AdamConfig& cfg);

// All arrays in entries() order; throws NumericError naming the parameter on
// a non-finite gradient.
void adam_step(ModelParams& params, const std::vector<Eigen::MatrixXd>& grads,
               AdamState& state, double lr, const AdamConfig& cfg);

// Clamps the endmember, blur-kernel, and band-weight arrays into [0,1];
// encoder weights pass through untouched.
void project_boxes(ModelParams& params);

// Full loop: forward, joint loss, backward, Adam, projection, decayed step
// size. Supplying the ground-truth cube adds periodic quality columns to the
// log. Throws NumericError if the loss leaves the finite range.
TrainResult train(const PlanarImage& Z, const PlanarImage& Y, const SpectralCoverage& cov,
                  const TrainConfig& cfg, const ImageCube* truth = nullptr,
                  const IterObserver& observer = {});

// Per-row softmax, the alternative abundance constraint.
Eigen::MatrixXd softmax_abundance_variant(const Eigen::MatrixXd& logits);

}  // namespace specfuse

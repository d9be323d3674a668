#pragma once

#include <Eigen/Dense>

#include "specfuse/autodiff.hpp"
#include "specfuse/model.hpp"

namespace specfuse {

// Trade-offs between the four reconstruction residuals and the two abundance
// regularizers, plus the sparsity target.
struct LossWeights {
    double alpha = 10.0;   // cross-path low-res residual
    double beta = 10.0;    // high-res band-resampled residual
    double gamma = 100.0;  // low-res consistency residual
    double mu = 1e-3;      // sum-to-one
    double nu = 1e-3;      // sparsity
    double a_sparse = 1e-4;
    void validate() const;
};

enum class Reduction { Mean, Sum };

// Weighted per-family contributions; they sum to total up to rounding.
struct LossBreakdown {
    double total = 0.0;
    double term_Za = 0.0;
    double term_Zb = 0.0;
    double term_Y = 0.0;
    double term_Ylr = 0.0;
    double term_sum2one = 0.0;
    double term_sparse = 0.0;
};

// Graph handles owned by the recording tape. Invalid Vars mark components an
// ablation removed; they contribute 0 to the breakdown.
struct LossVars {
    ad::Var total;
    ad::Var raw_Za, raw_Zb, raw_Y, raw_Ylr;          // unweighted residual means
    ad::Var raw_s2o_A, raw_s2o_Aa, raw_s2o_Ab;       // per-cube sum-to-one
    ad::Var raw_kl_A, raw_kl_Aa;                     // per-cube sparsity
};

constexpr double kEpsKl = 1e-6;

// Records residual, sum-to-one, and sparsity terms for whichever branches the
// forward pass produced, then combines them with the given weights.
LossVars build_loss(ad::Tape& tape, const ForwardVars& fv, ad::Var Z, ad::Var Y,
                    const LossWeights& w, Reduction reduction = Reduction::Mean);

LossBreakdown read_breakdown(const ad::Tape& tape, const LossVars& lv,
                             const LossWeights& w);

// Plain-value evaluations of the same definitions, for use outside training.
// Empty (0x0) bundle members count as dropped branches.
double l_base(const ForwardBundle& bundle, const PlanarImage& Z, const PlanarImage& Y,
              const LossWeights& w, Reduction reduction = Reduction::Mean);
double l_sum2one(const Eigen::MatrixXd& A, const Eigen::MatrixXd& A_h_a,
                 const Eigen::MatrixXd& A_h_b);
double l_sparse(const Eigen::MatrixXd& A, const Eigen::MatrixXd& A_h_a, double a_sparse);
LossBreakdown l_joint(const ForwardBundle& bundle, const PlanarImage& Z,
                      const PlanarImage& Y, const LossWeights& w,
                      Reduction reduction = Reduction::Mean);

// Single KL term of the sparsity penalty at one squashed abundance value.
double kl_term(double a_sparse, double abundance);

// One forward + loss evaluation, returning the scalar and the nonlinearity
// region signature (for finite-difference kink detection).
ad::FdEval eval_loss_once(const ModelParams& params, const PlanarImage& Z,
                          const PlanarImage& Y, const SpectralCoverage& cov,
                          const ForwardOptions& opt, const LossWeights& w,
                          Reduction reduction = Reduction::Mean);

// Same evaluation plus a backward pass; gradients come back in entries()
// order.
std::pair<double, ad::ParamMap> loss_and_grads(const ModelParams& params,
                                               const PlanarImage& Z, const PlanarImage& Y,
                                               const SpectralCoverage& cov,
                                               const ForwardOptions& opt,
                                               const LossWeights& w,
                                               Reduction reduction = Reduction::Mean);

}  // namespace specfuse

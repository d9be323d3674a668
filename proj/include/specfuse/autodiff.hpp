#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "specfuse/cube.hpp"

namespace specfuse::ad {

using Mat = Eigen::MatrixXd;

// Handle to a tape node.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape over the closed op set the fusion graph needs: per-pixel
// matmul, strided block convolution, masked weighted band resampling, clamp,
// leaky activation, softmax, and the L1 / sum-to-one / KL reductions.
// One tape records one forward evaluation; backward() replays the adjoints
// in reverse order, visiting each recorded op exactly once.
class Tape {
public:
    // Leaves. Constants never receive gradients; params are named so the
    // trainer can key gradients by parameter name.
    Var constant(Mat value, int rows_px = 0, int cols_px = 0);
    Var param(const std::string& name, Mat value, int rows_px = 0, int cols_px = 0);

    // x*W (+ bias broadcast over rows when given). Keeps x's spatial dims.
    Var matmul_bias(Var x, Var weight, Var bias = {});
    Var leaky(Var x, double slope);
    // Adjoint passes through only where lo < x < hi strictly.
    Var clamp(Var x, double lo, double hi);
    Var softmax_rows(Var x);
    // Non-overlapping k x k blocks with stride k over x's spatial grid, the
    // same single-channel kernel applied to every channel.
    Var block_conv(Var x, Var kernel);
    // out.col(i) = sum_j w_i(j) x.col(cov_i(j)) / (sum_j w_i(j) + eps).
    // Coverage must outlive the tape.
    Var srf(Var x, const std::vector<Var>& weights, const SpectralCoverage& cov, double eps);
    Var sub(Var a, Var b);

    // Scalar reductions (1x1 nodes).
    Var mean_abs(Var x);
    Var sum_abs(Var x);
    // Per pixel |1 - sum of channels|, averaged over pixels when mean is set.
    Var sum2one(Var x, bool mean);
    // Elementwise target*log(target/x) + (1-target)*log((1-target)/(1-x)),
    // summed and scaled by norm. x must already be squashed inside (0,1).
    Var kl_div(Var x, double target, double norm);
    Var add_scaled(const std::vector<std::pair<Var, double>>& terms);
    Var sum_squares(Var x);  // gradient-test graph

    const Mat& value(Var v) const;
    double scalar(Var v) const;
    int rows_px(Var v) const;
    int cols_px(Var v) const;

    void backward(Var loss);
    // Valid after backward(); zero for params the loss never touched.
    const Mat& grad(Var v) const;
    // Whether any recorded op consumed this leaf.
    bool consumed(Var v) const;

    // Region pattern of every kinked nonlinearity (clamp regions, leaky and
    // absolute-value signs), concatenated in op order. Two evaluations of the
    // same graph whose signatures differ straddle a kink somewhere.
    std::vector<std::int8_t> signature() const;

private:
    enum class Op : std::uint8_t {
        Leaf,
        MatmulBias,
        Leaky,
        Clamp,
        Softmax,
        BlockConv,
        Srf,
        Sub,
        MeanAbs,
        SumAbs,
        Sum2One,
        KlDiv,
        AddScaled,
        SumSquares,
    };

    struct Node {
        Op op = Op::Leaf;
        Mat value;
        Mat grad;
        bool needs_grad = false;
        bool has_grad = false;
        bool consumed = false;
        int rows_px = 0, cols_px = 0;
        int a = -1, b = -1, c = -1;
        std::vector<int> list;
        std::vector<double> coeffs;
        double p0 = 0.0, p1 = 0.0;
        std::vector<std::int8_t> mask;
        const SpectralCoverage* cov = nullptr;
        std::string name;
    };

    int push(Node n);
    Node& node(Var v);
    const Node& node(Var v) const;
    void mark(Var v) { nodes_[v.id].consumed = true; }
    bool any_needs_grad(std::initializer_list<Var> vs) const;
    Mat& grad_buf(int id);
    void accumulate(int id, const Mat& g);

    std::vector<Node> nodes_;
};

// Finite-difference comparison of analytic gradients, generic over an ordered
// set of named parameter arrays.
using ParamMap = std::vector<std::pair<std::string, Mat>>;

struct FdEval {
    double loss = 0.0;
    std::vector<std::int8_t> signature;
};

struct FdGroupReport {
    std::string name;
    int checked = 0;
    int kink_skipped = 0;
    double max_rel_err = 0.0;
    bool pass = true;
};

struct FdReport {
    std::vector<FdGroupReport> groups;
    bool all_pass = true;
};

// Central differences (f(x+h)-f(x-h))/2h on up to coords_per_group sampled
// coordinates per array. Coordinates whose +/-h evaluations land in different
// nonlinearity regions are skipped and counted as kink_skipped. Relative
// error uses max(|fd|, |analytic|, noise_floor) in the denominator.
FdReport fd_check(const ParamMap& params,
                  const std::function<FdEval(const ParamMap&)>& loss_fn,
                  const ParamMap& analytic_grads, double h, double tolerance,
                  int coords_per_group, std::uint64_t seed,
                  double noise_floor = 1e-6);

}  // namespace specfuse::ad

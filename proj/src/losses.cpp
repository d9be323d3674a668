#include "specfuse/losses.hpp"

#include <cmath>

#include "specfuse/errors.hpp"

namespace specfuse {

void LossWeights::validate() const {
    for (double w : {alpha, beta, gamma, mu, nu})
        if (!(w >= 0.0) || !std::isfinite(w))
            throw ConfigError("loss weights must be finite and non-negative");
    if (!(a_sparse > 0.0 && a_sparse < 1.0))
        throw ConfigError("sparsity target must lie strictly inside (0,1)");
}

LossVars build_loss(ad::Tape& t, const ForwardVars& fv, ad::Var Z, ad::Var Y,
                    const LossWeights& w, Reduction reduction) {
    w.validate();
    if (!fv.A_lr.valid() || !fv.A_hr.valid() || !fv.X_rec.valid())
        throw ConfigError("loss: forward pass lacks the always-on branches");
    LossVars lv;
    std::vector<std::pair<ad::Var, double>> terms;
    auto residual = [&](ad::Var target, ad::Var rec) {
        const ad::Var d = t.sub(target, rec);
        return reduction == Reduction::Mean ? t.mean_abs(d) : t.sum_abs(d);
    };
    if (fv.Z_rec_a.valid()) {
        lv.raw_Za = residual(Z, fv.Z_rec_a);
        terms.emplace_back(lv.raw_Za, 1.0);
    }
    if (fv.Z_rec_b.valid()) {
        lv.raw_Zb = residual(Z, fv.Z_rec_b);
        terms.emplace_back(lv.raw_Zb, w.alpha);
    }
    if (fv.Y_rec.valid()) {
        lv.raw_Y = residual(Y, fv.Y_rec);
        terms.emplace_back(lv.raw_Y, w.beta);
    }
    if (fv.Ylr_a.valid() && fv.Ylr_b.valid()) {
        lv.raw_Ylr = residual(fv.Ylr_a, fv.Ylr_b);
        terms.emplace_back(lv.raw_Ylr, w.gamma);
    }
    lv.raw_s2o_A = t.sum2one(fv.A_hr, true);
    terms.emplace_back(lv.raw_s2o_A, w.mu);
    lv.raw_s2o_Aa = t.sum2one(fv.A_lr, true);
    terms.emplace_back(lv.raw_s2o_Aa, w.mu);
    if (fv.A_blur.valid()) {
        lv.raw_s2o_Ab = t.sum2one(fv.A_blur, true);
        terms.emplace_back(lv.raw_s2o_Ab, w.mu);
    }
    auto kl_of = [&](ad::Var a) {
        const ad::Var squashed = t.clamp(a, kEpsKl, 1.0 - kEpsKl);
        return t.kl_div(squashed, w.a_sparse,
                        1.0 / static_cast<double>(t.value(a).size()));
    };
    lv.raw_kl_A = kl_of(fv.A_hr);
    terms.emplace_back(lv.raw_kl_A, w.nu);
    lv.raw_kl_Aa = kl_of(fv.A_lr);
    terms.emplace_back(lv.raw_kl_Aa, w.nu);
    lv.total = t.add_scaled(terms);
    return lv;
}

LossBreakdown read_breakdown(const ad::Tape& t, const LossVars& lv, const LossWeights& w) {
    LossBreakdown b;
    auto val = [&t](ad::Var v) { return v.valid() ? t.scalar(v) : 0.0; };
    b.term_Za = val(lv.raw_Za);
    b.term_Zb = w.alpha * val(lv.raw_Zb);
    b.term_Y = w.beta * val(lv.raw_Y);
    b.term_Ylr = w.gamma * val(lv.raw_Ylr);
    b.term_sum2one = w.mu * val(lv.raw_s2o_A) + w.mu * val(lv.raw_s2o_Aa) +
                     w.mu * val(lv.raw_s2o_Ab);
    b.term_sparse = w.nu * val(lv.raw_kl_A) + w.nu * val(lv.raw_kl_Aa);
    b.total = t.scalar(lv.total);
    return b;
}

namespace {

double abs_reduce(const Eigen::MatrixXd& d, Reduction reduction) {
    const double s = d.array().abs().sum();
    return reduction == Reduction::Mean ? s / static_cast<double>(d.size()) : s;
}

double sum2one_of(const Eigen::MatrixXd& a) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r) acc += std::abs(1.0 - a.row(r).sum());
    return acc / static_cast<double>(a.rows());
}

double kl_cube(const Eigen::MatrixXd& a, double target) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double x = std::clamp(a.data()[i], kEpsKl, 1.0 - kEpsKl);
        acc += kl_term(target, x);
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace

double kl_term(double a_sparse, double abundance) {
    return a_sparse * std::log(a_sparse / abundance) +
           (1.0 - a_sparse) * std::log((1.0 - a_sparse) / (1.0 - abundance));
}

double l_base(const ForwardBundle& bundle, const PlanarImage& Z, const PlanarImage& Y,
              const LossWeights& w, Reduction reduction) {
    w.validate();
    auto check = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                    const char* what) {
        if (a.rows() != b.rows() || a.cols() != b.cols())
            throw ShapeError(std::string("loss: shape mismatch in ") + what);
    };
    double acc = 0.0;
    if (bundle.Z_rec_a.m.size() > 0) {
        check(Z.m, bundle.Z_rec_a.m, "low-res reconstruction");
        acc += abs_reduce(Z.m - bundle.Z_rec_a.m, reduction);
    }
    if (bundle.Z_rec_b.m.size() > 0) {
        check(Z.m, bundle.Z_rec_b.m, "cross-path reconstruction");
        acc += w.alpha * abs_reduce(Z.m - bundle.Z_rec_b.m, reduction);
    }
    if (bundle.Y_rec.m.size() > 0) {
        check(Y.m, bundle.Y_rec.m, "high-res reconstruction");
        acc += w.beta * abs_reduce(Y.m - bundle.Y_rec.m, reduction);
    }
    if (bundle.Ylr_a.m.size() > 0 && bundle.Ylr_b.m.size() > 0) {
        check(bundle.Ylr_a.m, bundle.Ylr_b.m, "low-res consistency");
        acc += w.gamma * abs_reduce(bundle.Ylr_a.m - bundle.Ylr_b.m, reduction);
    }
    return acc;
}

double l_sum2one(const Eigen::MatrixXd& A, const Eigen::MatrixXd& A_h_a,
                 const Eigen::MatrixXd& A_h_b) {
    return sum2one_of(A) + sum2one_of(A_h_a) + sum2one_of(A_h_b);
}

double l_sparse(const Eigen::MatrixXd& A, const Eigen::MatrixXd& A_h_a, double a_sparse) {
    if (!(a_sparse > 0.0 && a_sparse < 1.0))
        throw ConfigError("sparsity target must lie strictly inside (0,1)");
    return kl_cube(A, a_sparse) + kl_cube(A_h_a, a_sparse);
}

LossBreakdown l_joint(const ForwardBundle& bundle, const PlanarImage& Z,
                      const PlanarImage& Y, const LossWeights& w, Reduction reduction) {
    w.validate();
    LossBreakdown b;
    if (bundle.Z_rec_a.m.size() > 0)
        b.term_Za = abs_reduce(Z.m - bundle.Z_rec_a.m, reduction);
    if (bundle.Z_rec_b.m.size() > 0)
        b.term_Zb = w.alpha * abs_reduce(Z.m - bundle.Z_rec_b.m, reduction);
    if (bundle.Y_rec.m.size() > 0)
        b.term_Y = w.beta * abs_reduce(Y.m - bundle.Y_rec.m, reduction);
    if (bundle.Ylr_a.m.size() > 0 && bundle.Ylr_b.m.size() > 0)
        b.term_Ylr = w.gamma * abs_reduce(bundle.Ylr_a.m - bundle.Ylr_b.m, reduction);
    b.term_sum2one = w.mu * sum2one_of(bundle.A_hr.m) + w.mu * sum2one_of(bundle.A_lr.m);
    if (bundle.A_blur.m.size() > 0) b.term_sum2one += w.mu * sum2one_of(bundle.A_blur.m);
    b.term_sparse =
        w.nu * kl_cube(bundle.A_hr.m, w.a_sparse) + w.nu * kl_cube(bundle.A_lr.m, w.a_sparse);
    b.total = b.term_Za + b.term_Zb + b.term_Y + b.term_Ylr + b.term_sum2one + b.term_sparse;
    return b;
}

ad::FdEval eval_loss_once(const ModelParams& params, const PlanarImage& Z,
                          const PlanarImage& Y, const SpectralCoverage& cov,
                          const ForwardOptions& opt, const LossWeights& w,
                          Reduction reduction) {
    ad::Tape tape;
    const ad::Var z = tape.constant(Z.m, Z.rows, Z.cols);
    const ad::Var y = tape.constant(Y.m, Y.rows, Y.cols);
    const ParamVars pv = register_params(tape, params);
    const ForwardVars fv = build_forward(tape, pv, z, y, cov, opt);
    const LossVars lv = build_loss(tape, fv, z, y, w, reduction);
    return {tape.scalar(lv.total), tape.signature()};
}

std::pair<double, ad::ParamMap> loss_and_grads(const ModelParams& params,
                                               const PlanarImage& Z, const PlanarImage& Y,
                                               const SpectralCoverage& cov,
                                               const ForwardOptions& opt,
                                               const LossWeights& w, Reduction reduction) {
    ad::Tape tape;
    const ad::Var z = tape.constant(Z.m, Z.rows, Z.cols);
    const ad::Var y = tape.constant(Y.m, Y.rows, Y.cols);
    const ParamVars pv = register_params(tape, params);
    const ForwardVars fv = build_forward(tape, pv, z, y, cov, opt);
    const LossVars lv = build_loss(tape, fv, z, y, w, reduction);
    tape.backward(lv.total);
    ad::ParamMap grads;
    for (const auto& [name, var] : pv.named) grads.emplace_back(name, tape.grad(var));
    return {tape.scalar(lv.total), std::move(grads)};
}

}  // namespace specfuse

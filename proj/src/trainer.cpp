#include "specfuse/trainer.hpp"

#include <cassert>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <memory>
#include <set>

#include "specfuse/errors.hpp"
#include "specfuse/metrics.hpp"
#include "specfuse/rng.hpp"

namespace specfuse {

void TrainConfig::validate() const {
    if (iterations < 1) throw ConfigError("train: iterations must be at least 1");
    if (!(lr0 > 0.0) || !std::isfinite(lr0))
        throw ConfigError("train: initial learning rate must be positive");
    if (p < 1) throw ConfigError("train: endmember count must be at least 1");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
        !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0))
        throw ConfigError("train: invalid optimizer constants");
    if (metrics_every < 1) throw ConfigError("train: metrics cadence must be at least 1");
    if (!(eps_norm > 0.0)) throw ConfigError("train: band-weight guard must be positive");
    for (int wdt : encoder_hidden)
        if (wdt < 1) throw ConfigError("train: encoder widths must be positive");
    weights.validate();
}

double lr_at(int iter, const TrainConfig& cfg) {
    if (iter < 0 || iter > cfg.iterations)
        throw ConfigError("lr_at: iteration outside schedule");
    return cfg.lr0 * (1.0 - static_cast<double>(iter) / cfg.iterations);
}

void adam_update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad,
                 Eigen::MatrixXd& m, Eigen::MatrixXd& v, long step, double lr,
                 const AdamConfig& cfg) {
    if (step < 1) throw ConfigError("adam: step counter must start at 1");
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
}

void adam_step(ModelParams& params, const std::vector<Eigen::MatrixXd>& grads,
               AdamState& state, double lr, const AdamConfig& cfg) {
    auto ents = params.entries();
    if (grads.size() != ents.size())
        throw ConfigError("adam: gradient count disagrees with parameter count");
    if (state.m.empty()) {
        for (auto& [name, mat] : ents) {
            state.m.push_back(Eigen::MatrixXd::Zero(mat->rows(), mat->cols()));
            state.v.push_back(Eigen::MatrixXd::Zero(mat->rows(), mat->cols()));
        }
    }
    if (state.m.size() != ents.size())
        throw ConfigError("adam: optimizer state does not match parameter layout");
    ++state.step;
    for (std::size_t i = 0; i < ents.size(); ++i) {
        auto& [name, mat] = ents[i];
        if (grads[i].rows() != mat->rows() || grads[i].cols() != mat->cols())
            throw ShapeError("adam: gradient shape differs for " + name);
        if (!grads[i].allFinite())
            throw NumericError("adam: non-finite gradient for " + name);
        adam_update(*mat, grads[i], state.m[i], state.v[i], state.step, lr, cfg);
    }
}

void project_boxes(ModelParams& params) {
    for (auto& [name, mat] : params.entries()) {
        if (!is_box_constrained(name)) continue;
        *mat = mat->array().min(1.0).max(0.0).matrix();
        assert(mat->minCoeff() >= 0.0 && mat->maxCoeff() <= 1.0);
    }
}

Eigen::MatrixXd softmax_abundance_variant(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out = logits;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        row = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
    }
    return out;
}

void TrainLog::write_csv(const std::string& path) const {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "wb"),
                                                      std::fclose);
    if (!f) throw ConfigError("training log: cannot open for writing: " + path);
    std::fprintf(f.get(), "iter,lr,L_total,L_Za,L_Zb,L_Y,L_Ylr,L_sum2one,L_sparse%s\n",
                 with_metrics ? ",mPSNR,mSAM" : "");
    for (const auto& row : rows) {
        std::fprintf(f.get(), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                     row.iter, row.lr, row.loss.total, row.loss.term_Za, row.loss.term_Zb,
                     row.loss.term_Y, row.loss.term_Ylr, row.loss.term_sum2one,
                     row.loss.term_sparse);
        if (with_metrics) {
            if (row.has_metrics)
                std::fprintf(f.get(), ",%.17g,%.17g", row.mpsnr_db, row.msam_deg);
            else
                std::fprintf(f.get(), ",,");
        }
        std::fputc('\n', f.get());
    }
}

TrainResult train(const PlanarImage& Z, const PlanarImage& Y, const SpectralCoverage& cov,
                  const TrainConfig& cfg, const ImageCube* truth,
                  const IterObserver& observer) {
    cfg.validate();
    if (Z.rows < 1 || Z.cols < 1 || Y.rows < 1 || Y.cols < 1)
        throw ShapeError("train: empty input image");
    if (Y.rows % Z.rows != 0 || Y.cols % Z.cols != 0 ||
        Y.rows / Z.rows != Y.cols / Z.cols)
        throw ShapeError("train: high-res grid is not an integer multiple of the low-res grid");
    const int ratio = Y.rows / Z.rows;
    if (Z.channels() != cov.hsi_bands)
        throw ShapeError("train: low-res band count disagrees with coverage");
    if (Y.channels() != cov.msi_bands())
        throw ShapeError("train: high-res band count disagrees with coverage");
    if (truth && (truth->rows != Y.rows || truth->cols != Y.cols ||
                  truth->bands != Z.channels()))
        throw ShapeError("train: ground-truth cube shape disagrees with inputs");

    Rng rng(cfg.seed);
    ModelParams params =
        init_params(Z, cov, cfg.p, ratio, cfg.encoder_hidden, cfg.leaky_slope, rng);
    AdamState state;
    ForwardOptions fopt;
    fopt.constraint = cfg.constraint;
    fopt.ablation = cfg.ablation;
    fopt.eps_norm = cfg.eps_norm;

    TrainResult result;
    result.log.with_metrics = truth != nullptr;
    result.log.rows.reserve(static_cast<std::size_t>(cfg.iterations));
    std::set<std::string> warned;
    std::vector<Eigen::MatrixXd> grads;

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        ad::Tape tape;
        const ad::Var z = tape.constant(Z.m, Z.rows, Z.cols);
        const ad::Var y = tape.constant(Y.m, Y.rows, Y.cols);
        const ParamVars pv = register_params(tape, params);
        const ForwardVars fv = build_forward(tape, pv, z, y, cov, fopt);
        const LossVars lv = build_loss(tape, fv, z, y, cfg.weights, cfg.reduction);
        const LossBreakdown breakdown = read_breakdown(tape, lv, cfg.weights);
        if (!std::isfinite(breakdown.total))
            throw NumericError("train: loss is not finite at iteration " +
                               std::to_string(iter));
        tape.backward(lv.total);
        if (iter == 0) {
            for (const auto& [name, var] : pv.named)
                if (!tape.consumed(var) && warned.insert(name).second)
                    std::cerr << "warning: parameter " << name
                              << " is absent from the loss graph; gradient stays zero\n";
        }
        grads.clear();
        for (const auto& [name, var] : pv.named) grads.push_back(tape.grad(var));

        adam_step(params, grads, state, lr_at(iter, cfg), cfg.adam);
        project_boxes(params);

        TrainLogRow row;
        row.iter = iter;
        row.lr = lr_at(iter, cfg);
        row.loss = breakdown;
        if (truth && iter % cfg.metrics_every == 0) {
            const ImageCube est = fold(tape.value(fv.X_rec), Y.rows, Y.cols);
            row.has_metrics = true;
            row.mpsnr_db = mpsnr(*truth, est);
            row.msam_deg = msam(*truth, est);
        }
        result.log.rows.push_back(row);
        if (observer) observer(iter, params, breakdown);
    }

    result.final_bundle = forward_all(params, Z, Y, cov, fopt);
    result.x_hat = result.final_bundle.X_rec;
    result.params = std::move(params);
    return result;
}

}  // namespace specfuse

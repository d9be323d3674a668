#include "specfuse/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "specfuse/errors.hpp"
#include "specfuse/rng.hpp"

namespace specfuse::ad {

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Tape::Node& Tape::node(Var v) {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
        throw ConfigError("tape: invalid node handle");
    return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
        throw ConfigError("tape: invalid node handle");
    return nodes_[v.id];
}

bool Tape::any_needs_grad(std::initializer_list<Var> vs) const {
    for (Var v : vs)
        if (v.valid() && node(v).needs_grad) return true;
    return false;
}

Var Tape::constant(Mat value, int rows_px, int cols_px) {
    Node n;
    n.value = std::move(value);
    n.rows_px = rows_px;
    n.cols_px = cols_px;
    return {push(std::move(n))};
}

Var Tape::param(const std::string& name, Mat value, int rows_px, int cols_px) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = true;
    n.rows_px = rows_px;
    n.cols_px = cols_px;
    n.name = name;
    return {push(std::move(n))};
}

Var Tape::matmul_bias(Var x, Var weight, Var bias) {
    const Node& nx = node(x);
    const Node& nw = node(weight);
    if (nx.value.cols() != nw.value.rows())
        throw ShapeError("matmul: inner dimensions disagree");
    Node n;
    n.op = Op::MatmulBias;
    n.a = x.id;
    n.b = weight.id;
    n.value = nx.value * nw.value;
    if (bias.valid()) {
        const Node& nb = node(bias);
        if (nb.value.rows() != 1 || nb.value.cols() != n.value.cols())
            throw ShapeError("matmul: bias must be 1 x output-width");
        n.value.rowwise() += nb.value.row(0);
        n.c = bias.id;
        mark(bias);
    }
    n.rows_px = nx.rows_px;
    n.cols_px = nx.cols_px;
    n.needs_grad = any_needs_grad({x, weight, bias});
    mark(x);
    mark(weight);
    return {push(std::move(n))};
}

Var Tape::leaky(Var x, double slope) {
    const Node& nx = node(x);
    Node n;
    n.op = Op::Leaky;
    n.a = x.id;
    n.p0 = slope;
    n.rows_px = nx.rows_px;
    n.cols_px = nx.cols_px;
    n.needs_grad = nx.needs_grad;
    n.value = nx.value;
    n.mask.resize(static_cast<std::size_t>(n.value.size()));
    double* v = n.value.data();
    for (Eigen::Index i = 0; i < n.value.size(); ++i) {
        if (v[i] > 0.0) {
            n.mask[static_cast<std::size_t>(i)] = 1;
        } else {
            n.mask[static_cast<std::size_t>(i)] = 0;
            v[i] *= slope;
        }
    }
    mark(x);
    return {push(std::move(n))};
}

Var Tape::clamp(Var x, double lo, double hi) {
    if (!(lo < hi)) throw ConfigError("clamp: lo must be below hi");
    const Node& nx = node(x);
    Node n;
    n.op = Op::Clamp;
    n.a = x.id;
    n.p0 = lo;
    n.p1 = hi;
    n.rows_px = nx.rows_px;
    n.cols_px = nx.cols_px;
    n.needs_grad = nx.needs_grad;
    n.value = nx.value;
    n.mask.resize(static_cast<std::size_t>(n.value.size()));
    double* v = n.value.data();
    for (Eigen::Index i = 0; i < n.value.size(); ++i) {
        if (!(v[i] == v[i]))
            throw NumericError("clamp: NaN input");
        if (v[i] <= lo) {
            n.mask[static_cast<std::size_t>(i)] = 0;
            v[i] = lo;
        } else if (v[i] >= hi) {
            n.mask[static_cast<std::size_t>(i)] = 2;
            v[i] = hi;
        } else {
            n.mask[static_cast<std::size_t>(i)] = 1;
        }
    }
    mark(x);
    return {push(std::move(n))};
}

Var Tape::softmax_rows(Var x) {
    const Node& nx = node(x);
    Node n;
    n.op = Op::Softmax;
    n.a = x.id;
    n.rows_px = nx.rows_px;
    n.cols_px = nx.cols_px;
    n.needs_grad = nx.needs_grad;
    n.value = nx.value;
    for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
        auto row = n.value.row(r);
        row = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
    }
    mark(x);
    return {push(std::move(n))};
}

Var Tape::block_conv(Var x, Var kernel) {
    const Node& nx = node(x);
    const Node& nk = node(kernel);
    const int k = static_cast<int>(nk.value.rows());
    if (nk.value.cols() != k) throw ShapeError("block_conv: kernel must be square");
    if (nx.rows_px <= 0 || nx.cols_px <= 0)
        throw ShapeError("block_conv: input lacks spatial dimensions");
    if (nx.rows_px % k != 0 || nx.cols_px % k != 0)
        throw ShapeError("block_conv: spatial dimensions not divisible by kernel size");
    if (static_cast<Eigen::Index>(nx.rows_px) * nx.cols_px != nx.value.rows())
        throw ShapeError("block_conv: spatial dimensions disagree with row count");
    const int out_r = nx.rows_px / k;
    const int out_c = nx.cols_px / k;
    const int ch = static_cast<int>(nx.value.cols());
    Node n;
    n.op = Op::BlockConv;
    n.a = x.id;
    n.b = kernel.id;
    n.rows_px = out_r;
    n.cols_px = out_c;
    n.needs_grad = any_needs_grad({x, kernel});
    n.value = Mat::Zero(static_cast<Eigen::Index>(out_r) * out_c, ch);
    for (int br = 0; br < out_r; ++br) {
        for (int bc = 0; bc < out_c; ++bc) {
            auto out_row = n.value.row(static_cast<Eigen::Index>(br) * out_c + bc);
            for (int u = 0; u < k; ++u) {
                for (int v = 0; v < k; ++v) {
                    const Eigen::Index px =
                        static_cast<Eigen::Index>(br * k + u) * nx.cols_px + (bc * k + v);
                    out_row += nk.value(u, v) * nx.value.row(px);
                }
            }
        }
    }
    mark(x);
    mark(kernel);
    return {push(std::move(n))};
}

Var Tape::srf(Var x, const std::vector<Var>& weights, const SpectralCoverage& cov, double eps) {
    const Node& nx = node(x);
    if (static_cast<int>(nx.value.cols()) != cov.hsi_bands)
        throw ShapeError("srf: channel count disagrees with coverage");
    if (weights.size() != cov.bands.size())
        throw ShapeError("srf: one weight vector per output band required");
    Node n;
    n.op = Op::Srf;
    n.a = x.id;
    n.cov = &cov;
    n.p0 = eps;
    n.rows_px = nx.rows_px;
    n.cols_px = nx.cols_px;
    n.list.reserve(weights.size());
    n.needs_grad = nx.needs_grad;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const Node& nw = node(weights[i]);
        if (nw.value.cols() != 1 ||
            nw.value.rows() != static_cast<Eigen::Index>(cov.bands[i].hsi_indices.size()))
            throw ShapeError("srf: weight vector length disagrees with coverage");
        n.list.push_back(weights[i].id);
        n.needs_grad = n.needs_grad || nw.needs_grad;
        mark(weights[i]);
    }
    n.value = Mat::Zero(nx.value.rows(), static_cast<Eigen::Index>(cov.bands.size()));
    for (std::size_t i = 0; i < cov.bands.size(); ++i) {
        const auto& idx = cov.bands[i].hsi_indices;
        const Mat& w = nodes_[n.list[i]].value;
        const double denom = w.sum() + eps;
        auto out_col = n.value.col(static_cast<Eigen::Index>(i));
        for (std::size_t j = 0; j < idx.size(); ++j)
            out_col += (w(static_cast<Eigen::Index>(j), 0) / denom) * nx.value.col(idx[j]);
    }
    mark(x);
    return {push(std::move(n))};
}

Var Tape::sub(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.value.rows() != nb.value.rows() || na.value.cols() != nb.value.cols())
        throw ShapeError("sub: shape mismatch");
    Node n;
    n.op = Op::Sub;
    n.a = a.id;
    n.b = b.id;
    n.rows_px = na.rows_px;
    n.cols_px = na.cols_px;
    n.needs_grad = any_needs_grad({a, b});
    n.value = na.value - nb.value;
    mark(a);
    mark(b);
    return {push(std::move(n))};
}

namespace {

std::int8_t sign8(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

}  // namespace

Var Tape::mean_abs(Var x) {
    const Node& nx = node(x);
    if (nx.value.size() == 0) throw ShapeError("mean_abs: empty input");
    Node n;
    n.op = Op::MeanAbs;
    n.a = x.id;
    n.needs_grad = nx.needs_grad;
    n.mask.resize(static_cast<std::size_t>(nx.value.size()));
    double acc = 0.0;
    const double* v = nx.value.data();
    for (Eigen::Index i = 0; i < nx.value.size(); ++i) {
        n.mask[static_cast<std::size_t>(i)] = sign8(v[i]);
        acc += std::abs(v[i]);
    }
    n.value = Mat::Constant(1, 1, acc / static_cast<double>(nx.value.size()));
    mark(x);
    return {push(std::move(n))};
}

Var Tape::sum_abs(Var x) {
    const Node& nx = node(x);
    Node n;
    n.op = Op::SumAbs;
    n.a = x.id;
    n.needs_grad = nx.needs_grad;
    n.mask.resize(static_cast<std::size_t>(nx.value.size()));
    double acc = 0.0;
    const double* v = nx.value.data();
    for (Eigen::Index i = 0; i < nx.value.size(); ++i) {
        n.mask[static_cast<std::size_t>(i)] = sign8(v[i]);
        acc += std::abs(v[i]);
    }
    n.value = Mat::Constant(1, 1, acc);
    mark(x);
    return {push(std::move(n))};
}

Var Tape::sum2one(Var x, bool mean) {
    const Node& nx = node(x);
    if (nx.value.rows() == 0) throw ShapeError("sum2one: empty input");
    Node n;
    n.op = Op::Sum2One;
    n.a = x.id;
    n.p0 = mean ? 1.0 : 0.0;
    n.needs_grad = nx.needs_grad;
    n.mask.resize(static_cast<std::size_t>(nx.value.rows()));
    double acc = 0.0;
    for (Eigen::Index r = 0; r < nx.value.rows(); ++r) {
        const double resid = 1.0 - nx.value.row(r).sum();
        n.mask[static_cast<std::size_t>(r)] = sign8(resid);
        acc += std::abs(resid);
    }
    if (mean) acc /= static_cast<double>(nx.value.rows());
    n.value = Mat::Constant(1, 1, acc);
    mark(x);
    return {push(std::move(n))};
}

Var Tape::kl_div(Var x, double target, double norm) {
    if (!(target > 0.0 && target < 1.0))
        throw ConfigError("kl_div: target must lie strictly inside (0,1)");
    const Node& nx = node(x);
    Node n;
    n.op = Op::KlDiv;
    n.a = x.id;
    n.p0 = target;
    n.p1 = norm;
    n.needs_grad = nx.needs_grad;
    double acc = 0.0;
    const double* v = nx.value.data();
    for (Eigen::Index i = 0; i < nx.value.size(); ++i) {
        if (!(v[i] > 0.0 && v[i] < 1.0))
            throw NumericError("kl_div: input outside (0,1); squash first");
        acc += target * std::log(target / v[i]) +
               (1.0 - target) * std::log((1.0 - target) / (1.0 - v[i]));
    }
    n.value = Mat::Constant(1, 1, norm * acc);
    mark(x);
    return {push(std::move(n))};
}

Var Tape::add_scaled(const std::vector<std::pair<Var, double>>& terms) {
    if (terms.empty()) throw ConfigError("add_scaled: no terms");
    Node n;
    n.op = Op::AddScaled;
    double acc = 0.0;
    for (const auto& [v, c] : terms) {
        const Node& nt = node(v);
        if (nt.value.size() != 1) throw ShapeError("add_scaled: terms must be scalar");
        n.list.push_back(v.id);
        n.coeffs.push_back(c);
        n.needs_grad = n.needs_grad || nt.needs_grad;
        acc += c * nt.value(0, 0);
        mark(v);
    }
    n.value = Mat::Constant(1, 1, acc);
    return {push(std::move(n))};
}

Var Tape::sum_squares(Var x) {
    const Node& nx = node(x);
    Node n;
    n.op = Op::SumSquares;
    n.a = x.id;
    n.needs_grad = nx.needs_grad;
    n.value = Mat::Constant(1, 1, nx.value.squaredNorm());
    mark(x);
    return {push(std::move(n))};
}

const Mat& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar(Var v) const {
    const Node& n = node(v);
    if (n.value.size() != 1) throw ShapeError("scalar: node is not 1x1");
    return n.value(0, 0);
}

int Tape::rows_px(Var v) const { return node(v).rows_px; }
int Tape::cols_px(Var v) const { return node(v).cols_px; }

bool Tape::consumed(Var v) const { return node(v).consumed; }

Mat& Tape::grad_buf(int id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
        n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::accumulate(int id, const Mat& g) {
    if (id < 0) return;
    if (!nodes_[id].needs_grad) return;
    grad_buf(id) += g;
}

const Mat& Tape::grad(Var v) const {
    const Node& n = node(v);
    if (!n.has_grad) throw ConfigError("grad: backward() has not reached this node");
    return n.grad;
}

void Tape::backward(Var loss) {
    Node& root = node(loss);
    if (root.value.size() != 1) throw ShapeError("backward: loss must be scalar");
    // Pre-size every leaf gradient so untouched params read back as zero.
    for (auto& n : nodes_)
        if (n.op == Op::Leaf && n.needs_grad) {
            n.grad = Mat::Zero(n.value.rows(), n.value.cols());
            n.has_grad = true;
        }
    grad_buf(loss.id).setConstant(1.0);

    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.has_grad || n.op == Op::Leaf) continue;
        const Mat& g = n.grad;
        switch (n.op) {
            case Op::MatmulBias: {
                const Node& nx = nodes_[n.a];
                const Node& nw = nodes_[n.b];
                if (nx.needs_grad) grad_buf(n.a).noalias() += g * nw.value.transpose();
                if (nw.needs_grad) grad_buf(n.b).noalias() += nx.value.transpose() * g;
                if (n.c >= 0 && nodes_[n.c].needs_grad)
                    grad_buf(n.c).row(0) += g.colwise().sum();
                break;
            }
            case Op::Leaky: {
                if (!nodes_[n.a].needs_grad) break;
                Mat& gx = grad_buf(n.a);
                const double* gp = g.data();
                double* out = gx.data();
                for (Eigen::Index i = 0; i < g.size(); ++i)
                    out[i] += n.mask[static_cast<std::size_t>(i)] ? gp[i] : n.p0 * gp[i];
                break;
            }
            case Op::Clamp: {
                if (!nodes_[n.a].needs_grad) break;
                Mat& gx = grad_buf(n.a);
                const double* gp = g.data();
                double* out = gx.data();
                for (Eigen::Index i = 0; i < g.size(); ++i)
                    if (n.mask[static_cast<std::size_t>(i)] == 1) out[i] += gp[i];
                break;
            }
            case Op::Softmax: {
                if (!nodes_[n.a].needs_grad) break;
                Mat& gx = grad_buf(n.a);
                for (Eigen::Index r = 0; r < g.rows(); ++r) {
                    const double dot = g.row(r).dot(n.value.row(r));
                    gx.row(r).array() += n.value.row(r).array() * (g.row(r).array() - dot);
                }
                break;
            }
            case Op::BlockConv: {
                const Node& nx = nodes_[n.a];
                const Node& nk = nodes_[n.b];
                const int k = static_cast<int>(nk.value.rows());
                const bool want_x = nx.needs_grad;
                const bool want_k = nk.needs_grad;
                Mat* gx = want_x ? &grad_buf(n.a) : nullptr;
                Mat* gk = want_k ? &grad_buf(n.b) : nullptr;
                for (int br = 0; br < n.rows_px; ++br) {
                    for (int bc = 0; bc < n.cols_px; ++bc) {
                        const auto gout = g.row(static_cast<Eigen::Index>(br) * n.cols_px + bc);
                        for (int u = 0; u < k; ++u) {
                            for (int v = 0; v < k; ++v) {
                                const Eigen::Index px =
                                    static_cast<Eigen::Index>(br * k + u) * nx.cols_px +
                                    (bc * k + v);
                                if (want_x) gx->row(px) += nk.value(u, v) * gout;
                                if (want_k) (*gk)(u, v) += gout.dot(nx.value.row(px));
                            }
                        }
                    }
                }
                break;
            }
            case Op::Srf: {
                const Node& nx = nodes_[n.a];
                const bool want_x = nx.needs_grad;
                Mat* gx = want_x ? &grad_buf(n.a) : nullptr;
                for (std::size_t i = 0; i < n.list.size(); ++i) {
                    const auto& idx = n.cov->bands[i].hsi_indices;
                    const Node& nw = nodes_[n.list[i]];
                    const double denom = nw.value.sum() + n.p0;
                    const auto gout = g.col(static_cast<Eigen::Index>(i));
                    const auto out = n.value.col(static_cast<Eigen::Index>(i));
                    Mat* gw = nw.needs_grad ? &grad_buf(n.list[i]) : nullptr;
                    for (std::size_t j = 0; j < idx.size(); ++j) {
                        const double w = nw.value(static_cast<Eigen::Index>(j), 0);
                        if (want_x) gx->col(idx[j]) += (w / denom) * gout;
                        if (gw)
                            (*gw)(static_cast<Eigen::Index>(j), 0) +=
                                (gout.dot(nx.value.col(idx[j])) - gout.dot(out)) / denom;
                    }
                }
                break;
            }
            case Op::Sub: {
                if (nodes_[n.a].needs_grad) grad_buf(n.a) += g;
                if (nodes_[n.b].needs_grad) grad_buf(n.b) -= g;
                break;
            }
            case Op::MeanAbs:
            case Op::SumAbs: {
                if (!nodes_[n.a].needs_grad) break;
                const double scale =
                    g(0, 0) / (n.op == Op::MeanAbs
                                   ? static_cast<double>(nodes_[n.a].value.size())
                                   : 1.0);
                Mat& gx = grad_buf(n.a);
                double* out = gx.data();
                for (Eigen::Index i = 0; i < gx.size(); ++i)
                    out[i] += scale * n.mask[static_cast<std::size_t>(i)];
                break;
            }
            case Op::Sum2One: {
                if (!nodes_[n.a].needs_grad) break;
                Mat& gx = grad_buf(n.a);
                const double scale =
                    g(0, 0) / (n.p0 > 0.0 ? static_cast<double>(gx.rows()) : 1.0);
                for (Eigen::Index r = 0; r < gx.rows(); ++r) {
                    const double d = -scale * n.mask[static_cast<std::size_t>(r)];
                    if (d != 0.0) gx.row(r).array() += d;
                }
                break;
            }
            case Op::KlDiv: {
                if (!nodes_[n.a].needs_grad) break;
                const Node& nx = nodes_[n.a];
                const double scale = g(0, 0) * n.p1;
                Mat& gx = grad_buf(n.a);
                const double* v = nx.value.data();
                double* out = gx.data();
                for (Eigen::Index i = 0; i < gx.size(); ++i)
                    out[i] += scale * (-n.p0 / v[i] + (1.0 - n.p0) / (1.0 - v[i]));
                break;
            }
            case Op::AddScaled: {
                for (std::size_t i = 0; i < n.list.size(); ++i)
                    if (nodes_[n.list[i]].needs_grad)
                        grad_buf(n.list[i])(0, 0) += g(0, 0) * n.coeffs[i];
                break;
            }
            case Op::SumSquares: {
                if (nodes_[n.a].needs_grad)
                    grad_buf(n.a) += (2.0 * g(0, 0)) * nodes_[n.a].value;
                break;
            }
            case Op::Leaf:
                break;
        }
    }
}

std::vector<std::int8_t> Tape::signature() const {
    std::vector<std::int8_t> sig;
    for (const auto& n : nodes_)
        sig.insert(sig.end(), n.mask.begin(), n.mask.end());
    return sig;
}

FdReport fd_check(const ParamMap& params,
                  const std::function<FdEval(const ParamMap&)>& loss_fn,
                  const ParamMap& analytic_grads, double h, double tolerance,
                  int coords_per_group, std::uint64_t seed, double noise_floor) {
    if (!(h > 0.0)) throw ConfigError("fd_check: step must be positive");
    if (params.size() != analytic_grads.size())
        throw ConfigError("fd_check: parameter and gradient group counts differ");
    FdReport report;
    Rng rng(seed);
    ParamMap work = params;
    for (std::size_t gi = 0; gi < params.size(); ++gi) {
        const auto& [name, base] = params[gi];
        const Mat& grad = analytic_grads[gi].second;
        if (analytic_grads[gi].first != name)
            throw ConfigError("fd_check: gradient group order differs from parameters");
        if (grad.rows() != base.rows() || grad.cols() != base.cols())
            throw ShapeError("fd_check: gradient shape differs for " + name);
        FdGroupReport gr;
        gr.name = name;
        const Eigen::Index total = base.size();
        std::vector<Eigen::Index> coords;
        if (total <= coords_per_group) {
            coords.resize(static_cast<std::size_t>(total));
            for (Eigen::Index i = 0; i < total; ++i) coords[static_cast<std::size_t>(i)] = i;
        } else {
            std::set<Eigen::Index> seen;
            while (static_cast<int>(seen.size()) < coords_per_group)
                seen.insert(static_cast<Eigen::Index>(
                    rng.index(static_cast<std::uint64_t>(total))));
            coords.assign(seen.begin(), seen.end());
        }
        for (Eigen::Index ci : coords) {
            double* slot = work[gi].second.data() + ci;
            const double saved = *slot;
            *slot = saved + h;
            const FdEval plus = loss_fn(work);
            *slot = saved - h;
            const FdEval minus = loss_fn(work);
            *slot = saved;
            if (plus.signature != minus.signature) {
                ++gr.kink_skipped;
                continue;
            }
            const double fd = (plus.loss - minus.loss) / (2.0 * h);
            const double an = grad.data()[ci];
            const double denom = std::max({std::abs(fd), std::abs(an), noise_floor});
            const double rel = std::abs(fd - an) / denom;
            ++gr.checked;
            gr.max_rel_err = std::max(gr.max_rel_err, rel);
        }
        gr.pass = gr.max_rel_err <= tolerance;
        report.all_pass = report.all_pass && gr.pass;
        report.groups.push_back(std::move(gr));
    }
    return report;
}

}  // namespace specfuse::ad

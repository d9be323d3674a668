#include "specfuse/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>

#include "specfuse/errors.hpp"
#include "specfuse/rng.hpp"

namespace specfuse {

int Conv1x1Stack::in_width() const {
    if (weights.empty()) throw ConfigError("encoder stack has no layers");
    return static_cast<int>(weights.front().rows());
}

int Conv1x1Stack::out_width() const {
    if (weights.empty()) throw ConfigError("encoder stack has no layers");
    return static_cast<int>(weights.back().cols());
}

std::vector<std::pair<std::string, Eigen::MatrixXd*>> ModelParams::entries() {
    std::vector<std::pair<std::string, Eigen::MatrixXd*>> out;
    auto add_stack = [&out](const std::string& prefix, Conv1x1Stack& s) {
        for (std::size_t i = 0; i < s.weights.size(); ++i) {
            out.emplace_back(prefix + ".w" + std::to_string(i), &s.weights[i]);
            out.emplace_back(prefix + ".b" + std::to_string(i), &s.biases[i]);
        }
    };
    add_stack("enc_lr", enc_lr);
    add_stack("enc_hr", enc_hr);
    out.emplace_back("endmembers", &endmembers);
    out.emplace_back("psf.kernel", &psf_kernel);
    for (std::size_t i = 0; i < srf_weights.size(); ++i)
        out.emplace_back("srf.w" + std::to_string(i), &srf_weights[i]);
    return out;
}

std::vector<std::pair<std::string, const Eigen::MatrixXd*>> ModelParams::entries() const {
    auto mut = const_cast<ModelParams*>(this)->entries();
    std::vector<std::pair<std::string, const Eigen::MatrixXd*>> out;
    out.reserve(mut.size());
    for (auto& [name, ptr] : mut) out.emplace_back(name, ptr);
    return out;
}

bool is_box_constrained(const std::string& entry_name) {
    return entry_name == "endmembers" || entry_name.rfind("psf.", 0) == 0 ||
           entry_name.rfind("srf.", 0) == 0;
}

ParamVars register_params(ad::Tape& tape, const ModelParams& params) {
    ParamVars pv;
    auto add_stack = [&](const std::string& prefix, const Conv1x1Stack& s,
                         std::vector<ad::Var>& ws, std::vector<ad::Var>& bs) {
        for (std::size_t i = 0; i < s.weights.size(); ++i) {
            ws.push_back(tape.param(prefix + ".w" + std::to_string(i), s.weights[i]));
            bs.push_back(tape.param(prefix + ".b" + std::to_string(i), s.biases[i]));
            pv.named.emplace_back(prefix + ".w" + std::to_string(i), ws.back());
            pv.named.emplace_back(prefix + ".b" + std::to_string(i), bs.back());
        }
    };
    add_stack("enc_lr", params.enc_lr, pv.enc_lr_w, pv.enc_lr_b);
    add_stack("enc_hr", params.enc_hr, pv.enc_hr_w, pv.enc_hr_b);
    pv.slope_lr = params.enc_lr.leaky_slope;
    pv.slope_hr = params.enc_hr.leaky_slope;
    pv.endmembers = tape.param("endmembers", params.endmembers);
    pv.named.emplace_back("endmembers", pv.endmembers);
    pv.psf_kernel = tape.param("psf.kernel", params.psf_kernel);
    pv.named.emplace_back("psf.kernel", pv.psf_kernel);
    for (std::size_t i = 0; i < params.srf_weights.size(); ++i) {
        pv.srf_weights.push_back(tape.param("srf.w" + std::to_string(i), params.srf_weights[i]));
        pv.named.emplace_back("srf.w" + std::to_string(i), pv.srf_weights.back());
    }
    return pv;
}

namespace {

ad::Var encode_on_tape(ad::Tape& t, ad::Var x, const std::vector<ad::Var>& ws,
                       const std::vector<ad::Var>& bs, double slope,
                       AbundanceConstraint constraint) {
    ad::Var h = x;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        h = t.matmul_bias(h, ws[i], bs[i]);
        if (i + 1 < ws.size()) h = t.leaky(h, slope);
    }
    return constraint == AbundanceConstraint::Softmax ? t.softmax_rows(h)
                                                      : t.clamp(h, 0.0, 1.0);
}

ad::Var decode_on_tape(ad::Tape& t, ad::Var abundances, ad::Var endmembers) {
    return t.clamp(t.matmul_bias(abundances, endmembers), 0.0, 1.0);
}

PlanarImage planar_of(const ad::Tape& t, ad::Var v) {
    if (!v.valid()) return {};
    return {t.value(v), t.rows_px(v), t.cols_px(v)};
}

}  // namespace

ForwardVars build_forward(ad::Tape& tape, const ParamVars& pv, ad::Var Z, ad::Var Y,
                          const SpectralCoverage& cov, const ForwardOptions& opt) {
    const auto& ab = opt.ablation;
    ForwardVars fv;
    fv.A_lr = encode_on_tape(tape, Z, pv.enc_lr_w, pv.enc_lr_b, pv.slope_lr, opt.constraint);
    if (!ab.drop_Za) fv.Z_rec_a = decode_on_tape(tape, fv.A_lr, pv.endmembers);
    fv.A_hr = encode_on_tape(tape, Y, pv.enc_hr_w, pv.enc_hr_b, pv.slope_hr, opt.constraint);
    fv.X_rec = decode_on_tape(tape, fv.A_hr, pv.endmembers);
    if (!ab.drop_Y) fv.Y_rec = tape.srf(fv.X_rec, pv.srf_weights, cov, opt.eps_norm);
    if (!ab.drop_Zb) {
        fv.A_blur = tape.block_conv(fv.A_hr, pv.psf_kernel);
        fv.Z_rec_b = decode_on_tape(tape, fv.A_blur, pv.endmembers);
    }
    if (!ab.drop_Ylr) {
        fv.Ylr_a = tape.block_conv(Y, pv.psf_kernel);
        fv.Ylr_b = tape.srf(Z, pv.srf_weights, cov, opt.eps_norm);
    }
    return fv;
}

ForwardBundle forward_all(const ModelParams& params, const PlanarImage& Z,
                          const PlanarImage& Y, const SpectralCoverage& cov,
                          const ForwardOptions& opt) {
    if (Z.channels() != params.enc_lr.in_width())
        throw ShapeError("forward: low-res band count disagrees with encoder input width");
    if (Y.channels() != params.enc_hr.in_width())
        throw ShapeError("forward: high-res band count disagrees with encoder input width");
    ad::Tape tape;
    const ad::Var z = tape.constant(Z.m, Z.rows, Z.cols);
    const ad::Var y = tape.constant(Y.m, Y.rows, Y.cols);
    const ParamVars pv = register_params(tape, params);
    const ForwardVars fv = build_forward(tape, pv, z, y, cov, opt);
    ForwardBundle b;
    b.A_lr = planar_of(tape, fv.A_lr);
    b.A_hr = planar_of(tape, fv.A_hr);
    b.A_blur = planar_of(tape, fv.A_blur);
    b.Z_rec_a = planar_of(tape, fv.Z_rec_a);
    b.Z_rec_b = planar_of(tape, fv.Z_rec_b);
    b.X_rec = planar_of(tape, fv.X_rec);
    b.Y_rec = planar_of(tape, fv.Y_rec);
    b.Ylr_a = planar_of(tape, fv.Ylr_a);
    b.Ylr_b = planar_of(tape, fv.Ylr_b);
    return b;
}

PlanarImage encode(const PlanarImage& x, const Conv1x1Stack& stack,
                   AbundanceConstraint constraint) {
    if (x.channels() != stack.in_width())
        throw ShapeError("encode: channel count disagrees with stack input width");
    ad::Tape t;
    ad::Var h = t.constant(x.m, x.rows, x.cols);
    std::vector<ad::Var> ws, bs;
    for (std::size_t i = 0; i < stack.weights.size(); ++i) {
        ws.push_back(t.constant(stack.weights[i]));
        bs.push_back(t.constant(stack.biases[i]));
    }
    const ad::Var out = encode_on_tape(t, h, ws, bs, stack.leaky_slope, constraint);
    return planar_of(t, out);
}

PlanarImage decode_shared(const PlanarImage& abundances, const Eigen::MatrixXd& endmembers) {
    ad::Tape t;
    const ad::Var a = t.constant(abundances.m, abundances.rows, abundances.cols);
    const ad::Var out = decode_on_tape(t, a, t.constant(endmembers));
    return planar_of(t, out);
}

PlanarImage psf_forward(const PlanarImage& x, const Eigen::MatrixXd& kernel) {
    ad::Tape t;
    const ad::Var out = t.block_conv(t.constant(x.m, x.rows, x.cols), t.constant(kernel));
    return planar_of(t, out);
}

PlanarImage srf_forward(const PlanarImage& x, const SpectralCoverage& cov,
                        const std::vector<Eigen::MatrixXd>& weights, double eps) {
    ad::Tape t;
    std::vector<ad::Var> ws;
    ws.reserve(weights.size());
    for (const auto& w : weights) ws.push_back(t.constant(w));
    const ad::Var out = t.srf(t.constant(x.m, x.rows, x.cols), ws, cov, eps);
    return planar_of(t, out);
}

namespace {

Conv1x1Stack init_stack(const std::vector<int>& widths, double slope, Rng& rng) {
    Conv1x1Stack s;
    s.leaky_slope = slope;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const int fan_in = widths[i], fan_out = widths[i + 1];
        if (fan_in < 1 || fan_out < 1) throw ConfigError("encoder widths must be positive");
        Eigen::MatrixXd w(fan_in, fan_out);
        const double scale = std::sqrt(1.0 / fan_in);
        for (Eigen::Index k = 0; k < w.size(); ++k)
            w.data()[k] = rng.uniform(-scale, scale);
        s.weights.push_back(std::move(w));
        s.biases.push_back(Eigen::MatrixXd::Zero(1, fan_out));
    }
    return s;
}

}  // namespace

ModelParams init_params(const PlanarImage& Z, const SpectralCoverage& cov, int p,
                        int ratio, const std::vector<int>& hidden, double leaky_slope,
                        Rng& rng) {
    if (p < 1) throw ConfigError("init: endmember count must be positive");
    if (ratio < 1) throw ConfigError("init: ratio must be positive");
    if (Z.channels() != cov.hsi_bands)
        throw ShapeError("init: low-res band count disagrees with coverage");
    ModelParams mp;
    std::vector<int> w_lr{Z.channels()};
    w_lr.insert(w_lr.end(), hidden.begin(), hidden.end());
    w_lr.push_back(p);
    std::vector<int> w_hr{cov.msi_bands()};
    w_hr.insert(w_hr.end(), hidden.begin(), hidden.end());
    w_hr.push_back(p);
    mp.enc_lr = init_stack(w_lr, leaky_slope, rng);
    mp.enc_hr = init_stack(w_hr, leaky_slope, rng);
    mp.endmembers.resize(p, Z.channels());
    for (int i = 0; i < p; ++i) {
        const auto px = static_cast<Eigen::Index>(
            rng.index(static_cast<std::uint64_t>(Z.pixels())));
        mp.endmembers.row(i) = Z.m.row(px);
    }
    mp.psf_kernel = Eigen::MatrixXd::Constant(ratio, ratio, 1.0 / (ratio * ratio));
    for (const auto& band : cov.bands)
        mp.srf_weights.push_back(
            Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(band.hsi_indices.size()), 1));
    return mp;
}

namespace {

constexpr char kMagic[8] = {'S', 'P', 'E', 'C', 'F', 'U', 'S', 'E'};

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_bytes(std::FILE* f, const void* p, std::size_t n, const std::string& path) {
    if (std::fwrite(p, 1, n, f) != n) throw ConfigError("checkpoint: write failed: " + path);
}

void read_bytes(std::FILE* f, void* p, std::size_t n, const std::string& path) {
    if (std::fread(p, 1, n, f) != n)
        throw ConfigError("checkpoint: truncated or unreadable: " + path);
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw ConfigError("checkpoint: cannot open for writing: " + path);
    write_bytes(f.get(), kMagic, sizeof(kMagic), path);
    const auto ents = params.entries();
    const std::uint64_t count = ents.size();
    write_bytes(f.get(), &count, sizeof(count), path);
    std::vector<double> row_major;
    for (const auto& [name, mat] : ents) {
        const auto len = static_cast<std::uint32_t>(name.size());
        write_bytes(f.get(), &len, sizeof(len), path);
        write_bytes(f.get(), name.data(), name.size(), path);
        const std::uint64_t rows = static_cast<std::uint64_t>(mat->rows());
        const std::uint64_t cols = static_cast<std::uint64_t>(mat->cols());
        write_bytes(f.get(), &rows, sizeof(rows), path);
        write_bytes(f.get(), &cols, sizeof(cols), path);
        row_major.resize(static_cast<std::size_t>(mat->size()));
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            row_major.data(), mat->rows(), mat->cols()) = *mat;
        write_bytes(f.get(), row_major.data(), row_major.size() * sizeof(double), path);
    }
}

ModelParams load_checkpoint(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw ConfigError("checkpoint: cannot open: " + path);
    char magic[8];
    read_bytes(f.get(), magic, sizeof(magic), path);
    if (std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw ConfigError("checkpoint: bad magic: " + path);
    std::uint64_t count = 0;
    read_bytes(f.get(), &count, sizeof(count), path);
    if (count > 100000) throw ConfigError("checkpoint: implausible entry count: " + path);
    std::map<std::string, Eigen::MatrixXd> arrays;
    std::vector<double> row_major;
    for (std::uint64_t e = 0; e < count; ++e) {
        std::uint32_t len = 0;
        read_bytes(f.get(), &len, sizeof(len), path);
        if (len > 4096) throw ConfigError("checkpoint: implausible name length: " + path);
        std::string name(len, '\0');
        read_bytes(f.get(), name.data(), len, path);
        std::uint64_t rows = 0, cols = 0;
        read_bytes(f.get(), &rows, sizeof(rows), path);
        read_bytes(f.get(), &cols, sizeof(cols), path);
        if (rows == 0 || cols == 0 || rows * cols > (1ULL << 32))
            throw ConfigError("checkpoint: implausible dims for " + name);
        row_major.resize(static_cast<std::size_t>(rows * cols));
        read_bytes(f.get(), row_major.data(), row_major.size() * sizeof(double), path);
        Eigen::MatrixXd m =
            Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                row_major.data(), static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(cols));
        arrays.emplace(std::move(name), std::move(m));
    }
    auto take = [&arrays, &path](const std::string& name) {
        auto it = arrays.find(name);
        if (it == arrays.end())
            throw ConfigError("checkpoint: missing array " + name + " in " + path);
        Eigen::MatrixXd m = std::move(it->second);
        arrays.erase(it);
        return m;
    };
    auto take_stack = [&arrays, &take](const std::string& prefix) {
        Conv1x1Stack s;
        for (std::size_t i = 0;; ++i) {
            const std::string wname = prefix + ".w" + std::to_string(i);
            if (arrays.find(wname) == arrays.end()) break;
            s.weights.push_back(take(wname));
            s.biases.push_back(take(prefix + ".b" + std::to_string(i)));
        }
        if (s.weights.empty()) throw ConfigError("checkpoint: no layers for " + prefix);
        return s;
    };
    ModelParams mp;
    mp.enc_lr = take_stack("enc_lr");
    mp.enc_hr = take_stack("enc_hr");
    mp.endmembers = take("endmembers");
    mp.psf_kernel = take("psf.kernel");
    if (mp.psf_kernel.rows() != mp.psf_kernel.cols())
        throw ConfigError("checkpoint: blur kernel must be square");
    for (std::size_t i = 0;; ++i) {
        const std::string wname = "srf.w" + std::to_string(i);
        if (arrays.find(wname) == arrays.end()) break;
        mp.srf_weights.push_back(take(wname));
    }
    if (!arrays.empty())
        throw ConfigError("checkpoint: unrecognized array " + arrays.begin()->first);
    return mp;
}

ad::ParamMap to_param_map(const ModelParams& params) {
    ad::ParamMap map;
    for (const auto& [name, mat] : params.entries()) map.emplace_back(name, *mat);
    return map;
}

void assign_from_param_map(ModelParams& params, const ad::ParamMap& map) {
    auto ents = params.entries();
    if (ents.size() != map.size())
        throw ConfigError("parameter map: entry count disagrees with model layout");
    for (std::size_t i = 0; i < ents.size(); ++i) {
        if (ents[i].first != map[i].first)
            throw ConfigError("parameter map: unexpected entry " + map[i].first);
        if (ents[i].second->rows() != map[i].second.rows() ||
            ents[i].second->cols() != map[i].second.cols())
            throw ShapeError("parameter map: shape differs for " + map[i].first);
        *ents[i].second = map[i].second;
    }
}

}  // namespace specfuse

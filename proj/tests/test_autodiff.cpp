#include <cmath>
#include <vector>

#include "doctest.h"
#include "specfuse/autodiff.hpp"
#include "specfuse/cube.hpp"
#include "specfuse/errors.hpp"
#include "test_util.hpp"

using namespace specfuse;
using ad::Mat;

namespace {

// Runs fd_check for a single-output graph described by `build`, which must
// recreate the same graph for any parameter values, returning the loss Var.
ad::FdReport fd_check_graph(
    const ad::ParamMap& params,
    const std::function<ad::Var(ad::Tape&, const ad::ParamMap&)>& build, double h,
    double tol, std::uint64_t seed = 99) {
    ad::Tape tape;
    const ad::Var loss = build(tape, params);
    tape.backward(loss);

    // Rebuild to harvest leaf handles in order: params are pushed first by
    // every builder below, ids 0..n-1.
    ad::ParamMap grads;
    for (std::size_t i = 0; i < params.size(); ++i)
        grads.emplace_back(params[i].first, tape.grad(ad::Var{static_cast<int>(i)}));

    auto eval = [&](const ad::ParamMap& pm) -> ad::FdEval {
        ad::Tape t;
        const ad::Var l = build(t, pm);
        return {t.scalar(l), t.signature()};
    };
    return ad::fd_check(params, eval, grads, h, tol, 64, seed);
}

void require_all_pass(const ad::FdReport& rep) {
    for (const auto& g : rep.groups) {
        INFO(g.name, ": max_rel_err=", g.max_rel_err, " checked=", g.checked,
             " kink_skipped=", g.kink_skipped);
        CHECK(g.pass);
        CHECK(g.checked > 0);
    }
    CHECK(rep.all_pass);
}

}  // namespace

TEST_CASE("sum_squares gradient is exactly 2x") {
    const Mat x0 = tu::random_mat(3, 4, 1);
    ad::Tape t;
    const ad::Var x = t.param("x", x0);
    const ad::Var loss = t.sum_squares(x);
    t.backward(loss);
    CHECK(tu::max_abs_diff(t.grad(x), 2.0 * x0) == 0.0);
    CHECK(t.scalar(loss) == doctest::Approx(x0.array().square().sum()).epsilon(1e-15));
}

TEST_CASE("matmul with bias matches finite differences") {
    ad::ParamMap params = {{"x", tu::random_mat(5, 3, 2)},
                           {"w", tu::random_mat(3, 4, 3)},
                           {"b", tu::random_mat(1, 4, 4)}};
    auto build = [](ad::Tape& t, const ad::ParamMap& pm) {
        const ad::Var x = t.param("x", pm[0].second);
        const ad::Var w = t.param("w", pm[1].second);
        const ad::Var b = t.param("b", pm[2].second);
        return t.sum_squares(t.matmul_bias(x, w, b));
    };
    require_all_pass(fd_check_graph(params, build, 1e-6, 1e-7));
}

TEST_CASE("leaky activation matches finite differences and its slope") {
    ad::ParamMap params = {{"x", tu::random_mat(4, 4, 5)}};
    auto build = [](ad::Tape& t, const ad::ParamMap& pm) {
        return t.sum_squares(t.leaky(t.param("x", pm[0].second), 0.02));
    };
    require_all_pass(fd_check_graph(params, build, 1e-6, 1e-6));

    // Hand values through sum_squares: d/dx = 2*leaky(x)*slope' with
    // slope'=0.25 on the negative side and 1 on the positive side.
    Mat x0(1, 2);
    x0 << -2.0, 3.0;
    ad::Tape t;
    const ad::Var x = t.param("x", x0);
    const ad::Var loss = t.sum_squares(t.leaky(x, 0.25));
    t.backward(loss);
    CHECK(t.grad(x)(0, 0) == doctest::Approx(2.0 * (-0.5) * 0.25).epsilon(1e-15));
    CHECK(t.grad(x)(0, 1) == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("clamp matches finite differences away from its edges") {
    Mat x0 = tu::random_mat(4, 5, 7, -0.5, 1.5);
    ad::ParamMap params = {{"x", x0}};
    auto build = [](ad::Tape& t, const ad::ParamMap& pm) {
        return t.sum_squares(t.clamp(t.param("x", pm[0].second), 0.0, 1.0));
    };
    require_all_pass(fd_check_graph(params, build, 1e-6, 1e-6));
}

TEST_CASE("clamp adjoint passes only strictly inside") {
    Mat x0(1, 4);
    x0 << -0.5, 0.5, 1.5, 0.0;
    ad::Tape t;
    const ad::Var x = t.param("x", x0);
    const ad::Var loss = t.sum_abs(t.clamp(x, 0.0, 1.0));
    t.backward(loss);
    CHECK(t.grad(x)(0, 0) == 0.0);  // below lo
    CHECK(t.grad(x)(0, 1) == 1.0);  // inside, positive branch of |.|
    CHECK(t.grad(x)(0, 2) == 0.0);  // above hi
    CHECK(t.grad(x)(0, 3) == 0.0);  // exactly at lo: boundary blocks
    CHECK_THROWS_AS(t.clamp(x, 1.0, 0.0), ConfigError);
}

TEST_CASE("softmax rows match finite differences") {
    ad::ParamMap params = {{"x", tu::random_mat(6, 4, 9, -2.0, 2.0)}};
    const Mat target = tu::random_mat(6, 4, 10, 0.0, 1.0);
    auto build = [&](ad::Tape& t, const ad::ParamMap& pm) {
        const ad::Var x = t.param("x", pm[0].second);
        const ad::Var tgt = t.constant(target);
        return t.sum_squares(t.sub(t.softmax_rows(x), tgt));
    };
    require_all_pass(fd_check_graph(params, build, 1e-6, 1e-6));

    ad::Tape t;
    const ad::Var sm = t.softmax_rows(t.param("x", params[0].second));
    for (Eigen::Index r = 0; r < 6; ++r)
        CHECK(t.value(sm).row(r).sum() == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("block conv value and gradients") {
    // 2x2 grid, one channel: output is the kernel-weighted sum of the block.
    Mat x0(4, 1);
    x0 << 0.1, 0.2, 0.3, 0.4;
    Mat k0(2, 2);
    k0 << 1.0, 2.0, 3.0, 4.0;
    {
        ad::Tape t;
        const ad::Var x = t.param("x", x0, 2, 2);
        const ad::Var k = t.param("k", k0);
        const ad::Var y = t.block_conv(x, k);
        CHECK(t.value(y)(0, 0) ==
              doctest::Approx(0.1 * 1 + 0.2 * 2 + 0.3 * 3 + 0.4 * 4).epsilon(1e-15));
        CHECK(t.rows_px(y) == 1);
        CHECK(t.cols_px(y) == 1);
        const ad::Var loss = t.sum_abs(y);  // output positive: plain sum
        t.backward(loss);
        Mat gx(4, 1), gk(2, 2);
        gx << 1.0, 2.0, 3.0, 4.0;       // kernel taps, row-major pixel order
        gk << 0.1, 0.2, 0.3, 0.4;       // input values under each tap
        CHECK(tu::max_abs_diff(t.grad(x), gx) <= 1e-15);
        CHECK(tu::max_abs_diff(t.grad(k), gk) <= 1e-15);
    }

    ad::ParamMap params = {{"x", tu::random_mat(36, 3, 11)}, {"k", tu::random_mat(3, 3, 12)}};
    auto build = [](ad::Tape& t, const ad::ParamMap& pm) {
        const ad::Var x = t.param("x", pm[0].second, 6, 6);
        const ad::Var k = t.param("k", pm[1].second);
        return t.sum_squares(t.block_conv(x, k));
    };
    require_all_pass(fd_check_graph(params, build, 1e-6, 1e-6));
}

TEST_CASE("band resampling value and gradients") {
    const std::vector<double> wl = {400, 410, 420};
    const auto cov = build_coverage(wl, {{400.0, 410.0}, {410.0, 420.0}});

    {
        Mat x0(1, 3);
        x0 << 0.2, 0.4, 0.6;
        ad::Tape t;
        const ad::Var x = t.param("x", x0);
        const std::vector<ad::Var> w = {t.param("w0", Mat::Ones(2, 1)),
                                        t.param("w1", Mat::Ones(2, 1))};
        const ad::Var y = t.srf(x, w, cov, 0.0);
        CHECK(t.value(y)(0, 0) == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(t.value(y)(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    }

    ad::ParamMap params = {{"x", tu::random_mat(8, 3, 13, 0.1, 0.9)},
                           {"w0", tu::random_mat(2, 1, 14, 0.2, 1.0)},
                           {"w1", tu::random_mat(2, 1, 15, 0.2, 1.0)}};
    auto build = [&](ad::Tape& t, const ad::ParamMap& pm) {
        const ad::Var x = t.param("x", pm[0].second);
        const std::vector<ad::Var> w = {t.param("w0", pm[1].second),
                                        t.param("w1", pm[2].second)};
        return t.sum_squares(t.srf(x, w, cov, 1e-8));
    };
    require_all_pass(fd_check_graph(params, build, 1e-6, 1e-6));
}

TEST_CASE("absolute-value reductions match finite differences") {
    const Mat target = tu::random_mat(5, 3, 16);
    ad::ParamMap params = {{"x", tu::random_mat(5, 3, 17)}};
    // Push the parameter before the constant so it holds node id 0.
    auto build_mean = [&](ad::Tape& t, const ad::ParamMap& pm) {
        const ad::Var x = t.param("x", pm[0].second);
        return t.mean_abs(t.sub(x, t.constant(target)));
    };
    require_all_pass(fd_check_graph(params, build_mean, 1e-6, 1e-8));
    auto build_sum = [&](ad::Tape& t, const ad::ParamMap& pm) {
        const ad::Var x = t.param("x", pm[0].second);
        return t.sum_abs(t.sub(x, t.constant(target)));
    };
    require_all_pass(fd_check_graph(params, build_sum, 1e-6, 1e-8));
}

TEST_CASE("zero residual gives a zero subgradient") {
    const Mat x0 = tu::random_mat(4, 4, 18);
    ad::Tape t;
    const ad::Var x = t.param("x", x0);
    const ad::Var loss = t.mean_abs(t.sub(x, t.constant(x0)));
    t.backward(loss);
    CHECK(t.scalar(loss) == 0.0);
    CHECK(t.grad(x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sum-to-one penalty matches finite differences") {
    // Rows deliberately off the simplex so |1 - sum| sits away from zero.
    ad::ParamMap params = {{"x", tu::random_mat(6, 4, 19, 0.05, 0.2)}};
    for (bool mean : {true, false}) {
        auto build = [mean](ad::Tape& t, const ad::ParamMap& pm) {
            return t.sum2one(t.param("x", pm[0].second), mean);
        };
        require_all_pass(fd_check_graph(params, build, 1e-6, 1e-8));
    }
    Mat simplex(2, 2);
    simplex << 0.25, 0.75, 0.5, 0.5;
    ad::Tape t;
    CHECK(t.scalar(t.sum2one(t.param("x", simplex), true)) == doctest::Approx(0.0));
}

TEST_CASE("kl penalty behind the squash matches finite differences") {
    ad::ParamMap params = {{"x", tu::random_mat(5, 4, 20, 0.05, 0.95)}};
    auto build = [](ad::Tape& t, const ad::ParamMap& pm) {
        const ad::Var x = t.param("x", pm[0].second);
        const ad::Var s = t.clamp(x, 1e-6, 1.0 - 1e-6);
        return t.kl_div(s, 1e-4, 1.0 / static_cast<double>(pm[0].second.size()));
    };
    require_all_pass(fd_check_graph(params, build, 1e-7, 1e-5));

    ad::Tape t;
    CHECK_THROWS_AS(t.kl_div(t.constant(Mat::Constant(1, 1, 0.5)), 1.5, 1.0), ConfigError);
    CHECK_THROWS_AS(t.kl_div(t.constant(Mat::Constant(1, 1, 0.0)), 1e-4, 1.0), NumericError);
}

TEST_CASE("weighted sums of losses keep gradients linear") {
    const Mat x0 = tu::random_mat(4, 5, 21);
    auto grad_of = [&](double c1, double c2) {
        ad::Tape t;
        const ad::Var x = t.param("x", x0);
        const ad::Var l1 = t.sum_squares(x);
        const ad::Var l2 = t.mean_abs(x);
        const ad::Var loss = t.add_scaled({{l1, c1}, {l2, c2}});
        t.backward(loss);
        return std::pair<double, Mat>(t.scalar(loss), t.grad(x));
    };
    const auto [v10, g10] = grad_of(1.0, 0.0);
    const auto [v01, g01] = grad_of(0.0, 1.0);
    const auto [v23, g23] = grad_of(2.0, 3.0);
    CHECK(std::abs(v23 - (2.0 * v10 + 3.0 * v01)) <= 1e-12);
    CHECK(tu::max_abs_diff(g23, 2.0 * g10 + 3.0 * g01) <= 1e-12);
}

TEST_CASE("signatures separate clamp regions") {
    auto sig_at = [](double v) {
        ad::Tape t;
        t.sum_squares(t.clamp(t.param("x", Mat::Constant(1, 1, v)), 0.0, 1.0));
        return t.signature();
    };
    CHECK(sig_at(0.4) == sig_at(0.6));   // same side
    CHECK(sig_at(-0.1) != sig_at(0.1));  // straddles lo
    CHECK(sig_at(0.9) != sig_at(1.1));   // straddles hi
}

TEST_CASE("fd_check skips coordinates that straddle a kink") {
    Mat x0(2, 2);
    x0 << 0.5, 0.0, 0.6, 0.7;  // one entry exactly on the clamp edge
    ad::ParamMap params = {{"x", x0}};
    auto build = [](ad::Tape& t, const ad::ParamMap& pm) {
        return t.sum_squares(t.clamp(t.param("x", pm[0].second), 0.0, 1.0));
    };
    const auto rep = fd_check_graph(params, build, 1e-5, 1e-6);
    REQUIRE(rep.groups.size() == 1);
    CHECK(rep.groups[0].kink_skipped == 1);
    CHECK(rep.groups[0].checked == 3);
    CHECK(rep.groups[0].pass);
}

TEST_CASE("fd_check flags a corrupted analytic gradient") {
    const Mat x0 = tu::random_mat(3, 3, 22);
    ad::ParamMap params = {{"x", x0}};
    ad::Tape t;
    const ad::Var x = t.param("x", x0);
    const ad::Var loss = t.sum_squares(x);
    t.backward(loss);
    Mat g = t.grad(x);
    g(1, 1) += 0.5;
    ad::ParamMap bad = {{"x", g}};
    auto eval = [&](const ad::ParamMap& pm) -> ad::FdEval {
        ad::Tape tt;
        const ad::Var l = tt.sum_squares(tt.param("x", pm[0].second));
        return {tt.scalar(l), tt.signature()};
    };
    const auto rep = ad::fd_check(params, eval, bad, 1e-6, 1e-6, 64, 1);
    CHECK_FALSE(rep.all_pass);
    CHECK_FALSE(rep.groups[0].pass);
    CHECK(rep.groups[0].max_rel_err > 0.1);
}

TEST_CASE("fd_check validates the gradient map against the parameters") {
    ad::ParamMap params = {{"a", Mat::Ones(2, 2)}, {"b", Mat::Ones(2, 2)}};
    auto eval = [](const ad::ParamMap&) { return ad::FdEval{0.0, {}}; };
    ad::ParamMap swapped = {{"b", Mat::Zero(2, 2)}, {"a", Mat::Zero(2, 2)}};
    CHECK_THROWS_AS(ad::fd_check(params, eval, swapped, 1e-6, 1e-6, 8, 1), ConfigError);
    ad::ParamMap wrong_shape = {{"a", Mat::Zero(2, 3)}, {"b", Mat::Zero(2, 2)}};
    CHECK_THROWS_AS(ad::fd_check(params, eval, wrong_shape, 1e-6, 1e-6, 8, 1), ShapeError);
    ad::ParamMap short_map = {{"a", Mat::Zero(2, 2)}};
    CHECK_THROWS_AS(ad::fd_check(params, eval, short_map, 1e-6, 1e-6, 8, 1), ConfigError);
}

TEST_CASE("untouched parameters read back zero and unconsumed") {
    ad::Tape t;
    const ad::Var used = t.param("used", Mat::Ones(2, 2));
    const ad::Var idle = t.param("idle", Mat::Ones(3, 3));
    const ad::Var loss = t.sum_squares(used);
    CHECK_THROWS_AS(t.grad(used), ConfigError);  // before backward
    t.backward(loss);
    CHECK(t.consumed(used));
    CHECK_FALSE(t.consumed(idle));
    CHECK(t.grad(idle).cwiseAbs().maxCoeff() == 0.0);
    CHECK(t.grad(idle).rows() == 3);
}

TEST_CASE("backward rejects a non-scalar root") {
    ad::Tape t;
    const ad::Var x = t.param("x", Mat::Ones(2, 2));
    CHECK_THROWS_AS(t.backward(x), ShapeError);
}

TEST_CASE("shape guards on tape ops") {
    ad::Tape t;
    const ad::Var a = t.param("a", Mat::Ones(2, 3));
    const ad::Var b = t.param("b", Mat::Ones(2, 2));
    CHECK_THROWS_AS(t.matmul_bias(a, a), ShapeError);
    CHECK_THROWS_AS(t.sub(a, b), ShapeError);
    CHECK_THROWS_AS(t.block_conv(a, b), ShapeError);  // no spatial dims on a
    CHECK_THROWS_AS(t.add_scaled({{a, 1.0}}), ShapeError);
    CHECK_THROWS_AS(t.add_scaled({}), ConfigError);
}

#include <doctest.h>

#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "errdyn/mllp.hpp"

using namespace errdyn;

namespace {

std::filesystem::path tmp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("squash maps the real line into [-1, 1]") {
    CHECK(squash(0.0) == 0.0);
    CHECK(std::abs(squash(1.0) - 0.5) < 1e-15);  // atan(1) = pi/4
    // the closure of the range is hit in floating point: atan rounds to pi/2
    CHECK(squash(1e300) <= 1.0);
    CHECK(squash(1e300) > 0.999);
    CHECK(squash(-1e300) >= -1.0);
    CHECK(squash(-1.7) == -squash(1.7));
    CHECK(squash(3.0) > squash(2.0));
}

TEST_CASE("feature matrix stacks squashed per-coordinate and scalar rows") {
    Eigen::VectorXd g(3), v(3);
    g << 1.0, -2.0, 0.0;
    v << 0.0, 4.0, 0.25;
    DiagnosticSnapshot snap;
    snap.b = 0.5;
    snap.nu = 2.0;
    snap.s = -1.0;
    const Eigen::MatrixXd X = features(g, v, snap);
    REQUIRE(X.rows() == 5);
    REQUIRE(X.cols() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(X(0, i) == squash(g(i)));
        CHECK(X(1, i) == squash(v(i)));
        CHECK(X(2, i) == squash(0.5));
        CHECK(X(3, i) == squash(2.0));
        CHECK(X(4, i) == squash(-1.0));
    }
}

TEST_CASE("zero network weights give a zero update at half the rate cap") {
    MetaOptimizer meta = make_meta(1, 0.08);
    unflatten(Eigen::VectorXd::Zero(meta.phi.param_count()), meta.phi);

    InnerLoopState state(2, 10, meta.diag);
    Eigen::VectorXd g(2);
    g << 3.0, -1.5;
    const InnerStepInfo info = inner_step(state, g, 1.0, meta);

    // tanh(0) = 0 kills both branches; sigmoid(0) = 1/2 exactly.
    CHECK(info.update_norm == 0.0);
    CHECK(info.bound == 0.0);
    CHECK(info.alpha_mean == 0.08 / 2.0);
    CHECK(info.alpha_min == 0.08 / 2.0);
    CHECK(info.alpha_max == 0.08 / 2.0);
    CHECK(state.theta.norm() == 0.0);
    CHECK(state.t == 1);
    // moment trackers still advance
    CHECK(state.m(0) == (1.0 - meta.gamma) * 3.0);
    CHECK(state.v(1) == (1.0 - meta.eta) * 2.25);
}

TEST_CASE("update norm never exceeds the reported bound") {
    MetaOptimizer meta = make_meta(3, 0.07);
    // push the weights toward saturation so the outputs are not tiny
    Eigen::VectorXd phi = flatten(meta.phi);
    unflatten(Eigen::VectorXd(6.0 * phi), meta.phi);

    MetaTaskConfig tc;
    const MetaTask task(tc, 10, 12);
    std::vector<InnerStepInfo> rows;
    adapt(task, meta, 10, &rows);
    REQUIRE(rows.size() == 10);
    for (const auto& row : rows) {
        CHECK(row.update_norm <= row.bound);
        CHECK(row.alpha_min >= 0.0);
        CHECK(row.alpha_max <= meta.alpha_max);
        CHECK(row.alpha_min <= row.alpha_mean);
        CHECK(row.alpha_mean <= row.alpha_max);
    }
}

TEST_CASE("the learned step treats coordinates symmetrically") {
    MetaOptimizer meta = make_meta(7);
    Rng rng(99);
    const int d = 5;
    Eigen::VectorXd g(d), v(d), m(d), th(d);
    for (int i = 0; i < d; ++i) {
        g(i) = rng.normal();
        v(i) = std::abs(rng.normal());
        m(i) = rng.normal();
        th(i) = rng.normal();
    }
    const int perm[d] = {3, 0, 4, 1, 2};

    InnerLoopState a(d, 10, meta.diag);
    a.theta = th;
    a.m = m;
    a.v = v;
    InnerLoopState b(d, 10, meta.diag);
    for (int i = 0; i < d; ++i) {
        b.theta(i) = th(perm[i]);
        b.m(i) = m(perm[i]);
        b.v(i) = v(perm[i]);
    }
    Eigen::VectorXd gp(d);
    for (int i = 0; i < d; ++i) gp(i) = g(perm[i]);

    const InnerStepInfo ia = inner_step(a, g, 1.25, meta);
    const InnerStepInfo ib = inner_step(b, gp, 1.25, meta);

    // scalar features only differ by summation order in the dot products
    for (int i = 0; i < d; ++i) {
        CHECK(b.theta(i) == doctest::Approx(a.theta(perm[i])).epsilon(1e-12));
    }
    CHECK(ib.update_norm == doctest::Approx(ia.update_norm).epsilon(1e-12));
    CHECK(ib.alpha_mean == doctest::Approx(ia.alpha_mean).epsilon(1e-12));
    CHECK(ib.bound == doctest::Approx(ia.bound).epsilon(1e-12));
}

TEST_CASE("task draws are frozen at construction") {
    MetaTaskConfig tc;
    const MetaTask t1(tc, 6, 42);
    const MetaTask t2(tc, 6, 42);
    const MetaTask t3(tc, 6, 43);
    Eigen::VectorXd theta = Eigen::VectorXd::Constant(tc.dimension, 0.3);
    const auto [l1, g1] = t1.loss_and_grad(theta, 2);
    const auto [l2, g2] = t2.loss_and_grad(theta, 2);
    const auto [l3, g3] = t3.loss_and_grad(theta, 2);
    CHECK(l1 == l2);
    CHECK((g1.array() == g2.array()).all());
    CHECK(l1 != l3);
    CHECK(t1.true_loss(theta) == t2.true_loss(theta));
    CHECK_THROWS_AS(t1.loss_and_grad(theta, 6), std::invalid_argument);
    CHECK_THROWS_AS(t1.loss_and_grad(theta, -1), std::invalid_argument);
}

TEST_CASE("task gradients match finite differences of the loss") {
    Rng rng(5);
    const double h = 1e-6;
    auto fd_ok = [&](const MetaTask& task, int d, int k) {
        Eigen::VectorXd theta(d);
        for (int i = 0; i < d; ++i) theta(i) = rng.normal();
        const Eigen::VectorXd g = task.loss_and_grad(theta, k).second;
        for (int i = 0; i < d; ++i) {
            Eigen::VectorXd tp = theta, tm = theta;
            tp(i) += h;
            tm(i) -= h;
            const double fd = (task.loss_and_grad(tp, k).first -
                               task.loss_and_grad(tm, k).first) /
                              (2.0 * h);
            // the frozen additive loss noise cancels in the difference
            if (std::abs(fd - g(i)) > 1e-6 * std::max(1.0, std::abs(g(i)))) {
                return false;
            }
        }
        return true;
    };

    SUBCASE("regression batches") {
        MetaTaskConfig tc;
        tc.kind = "regression";
        tc.dimension = 3;
        tc.batch_size = 4;
        const MetaTask task(tc, 4, 21);
        CHECK(fd_ok(task, 3, 1));
    }
    SUBCASE("quadratic with the gradient noise turned off") {
        MetaTaskConfig tc;
        tc.grad_noise = 0.0;
        tc.dimension = 4;
        const MetaTask task(tc, 4, 22);
        CHECK(fd_ok(task, 4, 3));
    }
}

TEST_CASE("non-finite network output raises the inner-loop failure") {
    MetaOptimizer meta = make_meta(4);
    Eigen::VectorXd phi = flatten(meta.phi);
    phi(0) = std::numeric_limits<double>::quiet_NaN();
    unflatten(phi, meta.phi);

    InnerLoopState state(3, 5, meta.diag);
    const Eigen::VectorXd g = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(inner_step(state, g, 1.0, meta), InnerLoopFailure);

    MetaTaskConfig tc;
    tc.dimension = 3;
    const MetaTask task(tc, 5, 7);
    CHECK_THROWS_AS(adapt(task, meta, 5), InnerLoopFailure);
    CHECK_THROWS_AS(adapt(task, make_meta(4), 0), std::invalid_argument);
}

TEST_CASE("meta-training bookkeeping") {
    MetaTaskConfig tc;
    tc.dimension = 4;
    EsConfig es;
    es.pairs = 1;
    es.batch = 1;
    es.val_tasks = 2;
    es.val_every = 1;
    const MetaOptimizer init = make_meta(11);
    const Eigen::VectorXd phi0 = flatten(init.phi);

    SUBCASE("zero iterations return the initial parameters") {
        es.iters = 0;
        const MetaTrainResult r = meta_train(init, tc, 3, es, 0);
        REQUIRE(r.val_curve.size() == 1);
        CHECK(r.val_curve[0].first == 0);
        CHECK(r.val_curve[0].second == r.initial_val);
        CHECK(r.best_val == r.initial_val);
        CHECK((flatten(r.meta.phi).array() == phi0.array()).all());
    }
    SUBCASE("a zero meta learning rate leaves the parameters untouched") {
        es.iters = 2;
        const MetaTrainResult r = meta_train(init, tc, 3, es, 0);
        REQUIRE(r.val_curve.size() == 3);
        CHECK(r.val_curve[2].first == 2);
        CHECK(r.best_val <= r.initial_val);
        // lr_meta = 0 scales every perturbation step to zero
        EsConfig es0 = es;
        es0.lr_meta = 0.0;
        const MetaTrainResult r0 = meta_train(init, tc, 3, es0, 0);
        CHECK(r0.best_val == r0.initial_val);
        CHECK((flatten(r0.meta.phi).array() == phi0.array()).all());
    }
    SUBCASE("a broken initialization propagates the failure") {
        MetaOptimizer bad = init;
        Eigen::VectorXd phi = phi0;
        phi(1) = std::numeric_limits<double>::quiet_NaN();
        unflatten(phi, bad.phi);
        es.iters = 1;
        CHECK_THROWS_AS(meta_train(bad, tc, 3, es, 0), InnerLoopFailure);
    }
}

TEST_CASE("saved optimizers reload bit for bit") {
    MetaOptimizer meta = make_meta(9, 0.05, {6, 4});
    meta.tau = 0.3;
    meta.gamma = 0.88;
    meta.diag.alpha = 0.04;
    const auto path = tmp_file("errdyn_meta_roundtrip.txt");
    save_meta(meta, path.string());
    const MetaOptimizer back = load_meta(path.string());

    CHECK(back.alpha_max == meta.alpha_max);
    CHECK(back.epsilon == meta.epsilon);
    CHECK(back.gamma == meta.gamma);
    CHECK(back.eta == meta.eta);
    CHECK(back.tau == meta.tau);
    CHECK(back.diag.alpha == meta.diag.alpha);
    CHECK(back.diag.lambda == meta.diag.lambda);
    REQUIRE(back.phi.param_count() == meta.phi.param_count());
    CHECK((flatten(back.phi).array() == flatten(meta.phi).array()).all());

    Rng rng(1);
    Eigen::MatrixXd X(5, 3);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    const Eigen::MatrixXd ya = forward(meta.phi, X);
    const Eigen::MatrixXd yb = forward(back.phi, X);
    CHECK((ya.array() == yb.array()).all());
    std::filesystem::remove(path);
}

TEST_CASE("loading rejects missing or foreign files") {
    CHECK_THROWS_AS(load_meta("/nonexistent/errdyn_meta.txt"),
                    std::runtime_error);
    const auto path = tmp_file("errdyn_meta_bad.txt");
    {
        std::ofstream out(path);
        out << "errdyn-meta 2\n";
    }
    CHECK_THROWS_AS(load_meta(path.string()), std::runtime_error);
    std::filesystem::remove(path);
}

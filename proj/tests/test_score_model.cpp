#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "sgl/errors.hpp"
#include "sgl/score_model.hpp"

using namespace sgl;

TEST_CASE("random feature construction invariants") {
    const RandomFeatureNet net = RandomFeatureNet::init(1, 8, 4, 3.0, 42);
    for (int i = 0; i < 8; ++i) {
        const double l1 =
            net.frozen_w().row(i).cwiseAbs().sum() + net.frozen_u().row(i).cwiseAbs().sum();
        CHECK(std::abs(l1 - 1.0) < 1e-12);
    }
    Eigen::VectorXd x(1);
    x[0] = 1.3;
    CHECK(net.value(x, 0.5)[0] == 0.0);  // A = 0
    CHECK(net.rkhs_norm() == 0.0);

    const RandomFeatureNet again = RandomFeatureNet::init(1, 8, 4, 3.0, 42);
    CHECK(net.frozen_w() == again.frozen_w());
    CHECK(net.frozen_u() == again.frozen_u());
    const RandomFeatureNet other = RandomFeatureNet::init(1, 8, 4, 3.0, 43);
    CHECK(net.frozen_w() != other.frozen_w());
}

TEST_CASE("random feature forward by hand") {
    // m = 1, d = 1, d_e = 1: e(T) = (t/T) = 1, w = u = 1/2, a = 2.
    Eigen::MatrixXd A(1, 1), W(1, 1), U(1, 1);
    A << 2.0;
    W << 0.5;
    U << 0.5;
    const RandomFeatureNet net = RandomFeatureNet::from_matrices(A, W, U, 3.0);
    Eigen::VectorXd x(1);
    x[0] = 3.0;
    CHECK(net.value(x, 3.0)[0] == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(net.jacobian(x, 3.0)(0, 0) == doctest::Approx(1.0).epsilon(1e-14));

    // All pre-activations negative -> dead region.
    x[0] = -3.0;
    CHECK(net.value(x, 3.0)[0] == 0.0);
    CHECK(net.jacobian(x, 3.0)(0, 0) == 0.0);
}

TEST_CASE("rkhs norm") {
    Eigen::MatrixXd A(1, 4), W(4, 1), U(4, 1);
    A << 2.0, 2.0, 2.0, 2.0;
    W.setConstant(0.5);
    U.setConstant(0.5);
    RandomFeatureNet net = RandomFeatureNet::from_matrices(A, W, U, 3.0);
    CHECK(net.rkhs_norm() == doctest::Approx(2.0).epsilon(1e-14));
    net.set_coefficients(-2.5 * A);
    CHECK(net.rkhs_norm() == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("batched 1D evaluation agrees with pointwise") {
    const RandomFeatureNet rf = [] {
        RandomFeatureNet net = RandomFeatureNet::init(1, 16, 4, 3.0, 5);
        Eigen::MatrixXd A(1, 16);
        Rng rng(6);
        for (int i = 0; i < 16; ++i) A(0, i) = rng.normal();
        net.set_coefficients(A);
        return net;
    }();
    const SwishMlp sw = SwishMlp::init(1, 16, 4, 3.0, 7);
    Eigen::VectorXd xs(5);
    xs << -2.0, -0.5, 0.0, 1.1, 3.7;
    for (const ScoreModel* m : {static_cast<const ScoreModel*>(&rf),
                                static_cast<const ScoreModel*>(&sw)}) {
        const Eigen::VectorXd batched = m->values_1d(xs, 0.8);
        for (int j = 0; j < xs.size(); ++j) {
            Eigen::VectorXd x(1);
            x[0] = xs[j];
            CHECK(batched[j] == doctest::Approx(m->value(x, 0.8)[0]).epsilon(1e-14));
        }
    }
}

TEST_CASE("swish parameter count") {
    const SwishMlp sw = SwishMlp::init(1, 32, 4, 3.0, 1);
    // h (d + d_e + 1) + d (h + 1)
    CHECK(sw.param_count() == 32 * (1 + 4 + 1) + 1 * (32 + 1));
}

TEST_CASE("dsm gradient oracles with frozen noise") {
    const LinearSde ou = LinearSde::ou(3.0);
    const int B = 40;
    Eigen::MatrixXd x0(1, B);
    Eigen::VectorXd ts(B);
    Rng rng(21);
    for (int i = 0; i < B; ++i) {
        x0(0, i) = rng.uniform(-4.0, 4.0);
        ts[i] = rng.uniform(ou.t_min(), ou.horizon());
    }
    const std::uint64_t noise_seed = 77;
    const DsmBatch batch = make_dsm_batch(ou, x0, ts, noise_seed);

    auto max_rel_fd_error = [&](ScoreModel& model) {
        const Eigen::VectorXd grad = grad_dsm(model, ou, x0, ts, noise_seed);
        const double scale = std::max(grad.cwiseAbs().maxCoeff(), 1e-10);
        Eigen::VectorXd p = model.params();
        double worst = 0.0;
        Rng prng(31);
        for (int probe = 0; probe < 30; ++probe) {
            const int j = static_cast<int>(prng.below(p.size()));
            const double h = 1e-6 * std::max(1.0, std::abs(p[j]));
            Eigen::VectorXd pp = p;
            pp[j] = p[j] + h;
            model.set_params(pp);
            const double fp = model.batch_loss(batch.xt, batch.ts, batch.targets, batch.lambdas);
            pp[j] = p[j] - h;
            model.set_params(pp);
            const double fm = model.batch_loss(batch.xt, batch.ts, batch.targets, batch.lambdas);
            worst = std::max(worst, std::abs((fp - fm) / (2.0 * h) - grad[j]) / scale);
        }
        model.set_params(p);
        return worst;
    };

    RandomFeatureNet rf = RandomFeatureNet::init(1, 24, 4, 3.0, 3);
    Eigen::MatrixXd A(1, 24);
    for (int i = 0; i < 24; ++i) A(0, i) = rng.normal();
    rf.set_coefficients(A);
    CHECK(max_rel_fd_error(rf) < 1e-5);

    SwishMlp sw = SwishMlp::init(1, 24, 4, 3.0, 9);
    CHECK(max_rel_fd_error(sw) < 1e-4);

    // Zero coefficients with zero targets: the quadratic's minimum.
    RandomFeatureNet zero = RandomFeatureNet::init(1, 24, 4, 3.0, 3);
    const Eigen::VectorXd g = zero.batch_gradient(
        batch.xt, batch.ts, Eigen::MatrixXd::Zero(1, B), batch.lambdas);
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);

    // Same noise seed gives a bit-identical frozen objective.
    const DsmBatch batch2 = make_dsm_batch(ou, x0, ts, noise_seed);
    CHECK(batch.xt == batch2.xt);
    CHECK(batch.targets == batch2.targets);
}

TEST_CASE("checkpoint round trip is bit exact") {
    namespace fs = std::filesystem;
    const std::string dir = fs::temp_directory_path().string() + "/sgl_ckpt_test";
    fs::create_directories(dir);

    RandomFeatureNet rf = RandomFeatureNet::init(1, 12, 4, 3.0, 17);
    Eigen::MatrixXd A(1, 12);
    Rng rng(18);
    for (int i = 0; i < 12; ++i) A(0, i) = rng.normal();
    rf.set_coefficients(A);
    const std::string rf_path = dir + "/rf.ckpt";
    save_checkpoint(rf, rf_path);
    const auto rf_loaded = load_checkpoint(rf_path);
    CHECK(rf_loaded->kind() == "rf");
    CHECK(rf_loaded->params() == rf.params());
    Eigen::VectorXd x(1);
    x[0] = 0.37;
    CHECK(rf_loaded->value(x, 1.1)[0] == rf.value(x, 1.1)[0]);

    SwishMlp sw = SwishMlp::init(1, 20, 4, 3.0, 19);
    const std::string sw_path = dir + "/swish.ckpt";
    save_checkpoint(sw, sw_path);
    const auto sw_loaded = load_checkpoint(sw_path);
    CHECK(sw_loaded->kind() == "swish");
    CHECK(sw_loaded->params() == sw.params());
    CHECK(fs::exists(rf_path + ".json"));

    CHECK_THROWS_AS(load_checkpoint(dir + "/missing.ckpt"), ConfigError);
}

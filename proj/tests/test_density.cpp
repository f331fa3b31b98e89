#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sgl/density.hpp"
#include "sgl/errors.hpp"

using namespace sgl;

namespace {

double l1_distance(const DensityGrid& a, const DensityGrid& b) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < a.x.size(); ++j) {
        double w = a.spacing;
        if (j == 0 || j + 1 == a.x.size()) w *= 0.5;
        acc += w * std::abs(a.p[j] - b.p[j]);
    }
    return acc;
}

}  // namespace

TEST_CASE("density from Gaussian scores") {
    const Grid grid{-10.0, 10.0, 32768};
    const DensityGrid std_n = density_from_score([](double x) { return -x; }, grid);
    double worst = 0.0;
    for (int j = 0; j < grid.n; ++j) {
        const double expd = std::exp(-0.5 * std_n.x[j] * std_n.x[j]) / std::sqrt(2.0 * M_PI);
        worst = std::max(worst, std::abs(std_n.p[j] - expd));
    }
    CHECK(worst < 1e-6);

    const Grid grid2{-8.0, 12.0, 32768};
    const DensityGrid shifted = density_from_score([](double x) { return -(x - 2.0); }, grid2);
    const DensityGrid ref = density_on_grid(GaussianMixture::single(2.0, 1.0), grid2);
    CHECK(l1_distance(shifted, ref) < 1e-6);
    CHECK(std::abs(shifted.trapezoid_mass() - 1.0) < 1e-12);
}

TEST_CASE("density from the mixture score matches the analytic mixture") {
    const GaussianMixture mix = GaussianMixture::two_mode(3.0);
    const Grid grid = mix.support_grid(10.0, 32768);
    const DensityGrid d = density_from_score([&](double x) { return mix.score(x); }, grid);
    CHECK(l1_distance(d, density_on_grid(mix, grid)) < 1e-6);
}

TEST_CASE("degenerate densities are flagged") {
    const Grid grid{-1.0, 1.0, 64};
    CHECK_THROWS_AS(
        density_from_score([](double) { return std::numeric_limits<double>::infinity(); }, grid),
        NumericalError);
}

TEST_CASE("closed-form Gaussian KL values") {
    const Grid g{-10.0, 11.0, 8192};
    const DensityGrid p = density_on_grid(GaussianMixture::single(0.0, 1.0), g);
    const DensityGrid q = density_on_grid(GaussianMixture::single(1.0, 1.0), g);
    const DensityGrid w = density_on_grid(GaussianMixture::single(0.0, 4.0), g);
    CHECK(std::abs(kl_quadrature(p, p)) < 1e-10);
    CHECK(kl_quadrature(p, q) == doctest::Approx(0.5).epsilon(2e-6));
    CHECK(kl_quadrature(p, w) ==
          doctest::Approx(0.5 * std::log(4.0) + 0.125 - 0.5).epsilon(2e-6));
    CHECK(kl_quadrature(q, w) >= -1e-8);

    const Grid other{-9.0, 11.0, 8192};
    const DensityGrid r = density_on_grid(GaussianMixture::single(0.0, 1.0), other);
    CHECK_THROWS_AS(kl_quadrature(p, r), ConfigError);
}

TEST_CASE("model KL oracles") {
    const LinearSde ou = LinearSde::ou(3.0);
    const GaussianMixture mix = GaussianMixture::two_mode(3.0);
    const Grid grid = mix.standard_grid();

    // A model equal to the target score recovers the target exactly.
    auto target_score = [&](double x, double) { return mix.score(x); };
    CHECK(model_kl(target_score, ou, mix, grid) < 1e-8);

    // The analytic perturbed score reconstructs p_{t_min}, which differs from
    // p_0 by the documented O(t_min) evaluation bias.
    auto exact = [&](double x, double t) { return perturbed_mixture(mix, ou, t).score(x); };
    const double bias = model_kl(exact, ou, mix, grid);
    CHECK(bias < 1e-3);
    CHECK(bias > 0.0);

    // N(0,1)-score model against the N(1,1) target -> 1/2.
    const GaussianMixture shifted = GaussianMixture::single(1.0, 1.0);
    auto std_score = [](double x, double) { return -x; };
    CHECK(model_kl(std_score, ou, shifted, shifted.standard_grid(8192)) ==
          doctest::Approx(0.5).epsilon(2e-5));

    // Zero score gives the uniform density: KL = -H(p) + log(grid length),
    // checked against a quadrature entropy oracle.
    auto zero = [](double, double) { return 0.0; };
    const double kl_uniform = model_kl(zero, ou, mix, grid);
    double entropy = 0.0;
    const Eigen::VectorXd wq = grid.weights();
    const DensityGrid p0 = density_on_grid(mix, grid);
    for (int j = 0; j < grid.n; ++j) {
        if (p0.p[j] > 1e-15) entropy -= wq[j] * p0.p[j] * std::log(p0.p[j]);
    }
    CHECK(kl_uniform == doctest::Approx(-entropy + std::log(grid.hi - grid.lo)).epsilon(1e-4));
}

TEST_CASE("ODE log-likelihood oracles") {
    // Stationary flow: the score of N(0,1) under OU leaves points in place.
    const LinearSde ou = LinearSde::ou(3.0);
    ScoreField1d stationary{[](double x, double) { return -x; },
                            [](double, double) { return -1.0; }};
    const double ll = ode_loglik(stationary, ou, 0.7, 500);
    CHECK(std::abs(ll - (-0.5 * 0.49 - 0.5 * std::log(2.0 * M_PI))) < 1e-6);

    // Mixture score against the analytic density; long horizon so the
    // terminal marginal coincides with the prior.
    const LinearSde long_ou = LinearSde::ou(8.0);
    const GaussianMixture mix = GaussianMixture::two_mode(3.0);
    const ScoreField1d exact = analytic_score_field(mix, long_ou);
    const GaussianMixture at_tmin = perturbed_mixture(mix, long_ou, long_ou.t_min());
    for (double x : {-3.3, -1.0, 0.2, 1.4, 2.9, 4.1, -4.9, 0.9, 2.2, -2.1}) {
        CHECK(std::abs(ode_loglik(exact, long_ou, x, 500) - at_tmin.log_density(x)) < 1e-3);
    }
    CHECK_THROWS_AS(ode_loglik(exact, long_ou, 0.0, 50), ConfigError);
}

TEST_CASE("ODE integrator is fourth order") {
    // Self-convergence: error against a fine reference shrinks ~16x when the
    // step count doubles.
    const LinearSde ou = LinearSde::ou(3.0);
    const GaussianMixture mix = GaussianMixture::two_mode(3.0);
    const ScoreField1d exact = analytic_score_field(mix, ou);
    const double reference = ode_loglik(exact, ou, 0.7, 16000);
    const double err500 = std::abs(ode_loglik(exact, ou, 0.7, 500) - reference);
    const double err1000 = std::abs(ode_loglik(exact, ou, 0.7, 1000) - reference);
    CHECK(err500 > 1e-13);  // above rounding noise
    const double ratio = err500 / err1000;
    CHECK(ratio > 8.0);
    CHECK(ratio < 32.0);
}

TEST_CASE("ODE sampling") {
    const LinearSde ou = LinearSde::ou(3.0);
    Rng rng(3);
    ScoreField1d stationary{[](double x, double) { return -x; },
                            [](double, double) { return -1.0; }};
    const Eigen::VectorXd s1 = ode_sample(stationary, ou, 100000, 100, rng);
    const double mean = s1.mean();
    const double var = (s1.array() - mean).square().sum() / (s1.size() - 1);
    CHECK(std::abs(var - 1.0) < 0.02);

    // Exact mixture score: the two-component fit recovers the modes.
    const GaussianMixture mix = GaussianMixture::two_mode(3.0);
    const ScoreField1d exact = analytic_score_field(mix, ou);
    Rng rng2(5);
    const Eigen::VectorXd s2 = ode_sample(exact, ou, 12000, 300, rng2);
    const TwoModeFit fit = fit_two_modes_samples(s2);
    CHECK(std::abs(fit.mean_pos - 3.0) < 0.05);
    CHECK(std::abs(fit.mean_neg + 3.0) < 0.05);

    // Zero score and zero drift: the flow is the identity, so samples equal
    // prior draws from the same stream.
    const LinearSde ve = LinearSde::ve_const(2.0, 1.0);
    ScoreField1d zero{[](double, double) { return 0.0; }, [](double, double) { return 0.0; }};
    Rng rng3(9);
    Rng rng3_copy(9);
    const Eigen::VectorXd s3 = ode_sample(zero, ve, 100, 128, rng3);
    const double prior_sd = std::sqrt(ve.prior().variance);
    for (int i = 0; i < 100; ++i) {
        CHECK(s3[i] == doctest::Approx(prior_sd * rng3_copy.normal()).epsilon(1e-12));
    }
}

TEST_CASE("prior gap values") {
    const GaussianMixture std_normal = GaussianMixture::single(0.0, 1.0);
    const LinearSde ou = LinearSde::ou(3.0);
    CHECK(std::abs(kl_prior_gap(std_normal, ou, std_normal.support_grid(10.0, 8192))) < 1e-10);

    // Single mode at 3 under OU keeps unit variance: KL = (3 e^{-3})^2 / 2.
    const GaussianMixture shifted = GaussianMixture::single(3.0, 1.0);
    const double expected = 0.5 * std::pow(3.0 * std::exp(-3.0), 2);
    CHECK(kl_prior_gap(shifted, ou, shifted.support_grid(8.0, 8192)) ==
          doctest::Approx(expected).epsilon(1e-4));
}

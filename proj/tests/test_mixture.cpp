#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sgl/errors.hpp"
#include "sgl/mixture.hpp"

using namespace sgl;

TEST_CASE("density values") {
    const GaussianMixture std_normal = GaussianMixture::single(0.0, 1.0);
    CHECK(std_normal.density(0.0) == doctest::Approx(0.3989422804).epsilon(1e-9));

    const GaussianMixture mix = GaussianMixture::two_mode(3.0);
    // Both components contribute phi(3)/2 at the origin.
    const double phi3 = std::exp(-4.5) / std::sqrt(2.0 * M_PI);
    CHECK(mix.density(0.0) == doctest::Approx(phi3).epsilon(1e-9));

    // Normalization on the standard grid by trapezoid quadrature.
    const Grid grid = mix.standard_grid();
    double mass = 0.0;
    const Eigen::VectorXd w = grid.weights();
    for (int j = 0; j < grid.n; ++j) mass += w[j] * mix.density(grid.point(j));
    CHECK(std::abs(mass - 1.0) < 1e-8);
}

TEST_CASE("score values") {
    const GaussianMixture mix = GaussianMixture::two_mode(3.0);
    CHECK(mix.score(0.0) == doctest::Approx(0.0).epsilon(1e-14));

    const GaussianMixture shifted = GaussianMixture::single(3.0, 1.0);
    CHECK(shifted.score(0.0) == doctest::Approx(3.0).epsilon(1e-12));

    // s(x) = -x + mu tanh(mu x) for the equal unit-variance pair.
    const double expected = -3.0 + 3.0 * std::tanh(9.0);
    CHECK(mix.score(3.0) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(std::abs(mix.score(3.0)) < 1e-6);
}

TEST_CASE("score is the derivative of the log density") {
    const GaussianMixture mix({0.3, 0.5, 0.2}, {-2.0, 0.5, 4.0}, {1.0, 0.25, 2.0});
    Rng rng(5);
    for (int rep = 0; rep < 100; ++rep) {
        const double x = rng.uniform(-7.0, 9.0);
        const double h = 1e-6 * std::max(1.0, std::abs(x));
        const double fd = (mix.log_density(x + h) - mix.log_density(x - h)) / (2.0 * h);
        CHECK(std::abs(fd - mix.score(x)) / std::max(1.0, std::abs(mix.score(x))) < 1e-6);
    }
    // score_dx against finite differences of the score.
    for (int rep = 0; rep < 50; ++rep) {
        const double x = rng.uniform(-7.0, 9.0);
        const double h = 1e-6 * std::max(1.0, std::abs(x));
        const double fd = (mix.score(x + h) - mix.score(x - h)) / (2.0 * h);
        CHECK(std::abs(fd - mix.score_dx(x)) / std::max(1.0, std::abs(mix.score_dx(x))) < 1e-5);
    }
}

TEST_CASE("perturbed mixture closed form") {
    const LinearSde ou = LinearSde::ou(3.0);
    const GaussianMixture mix = GaussianMixture::two_mode(3.0);

    const GaussianMixture same = perturbed_mixture(mix, ou, 0.0);
    CHECK(same.means()[0] == doctest::Approx(-3.0).epsilon(1e-14));
    CHECK(same.variances()[0] == doctest::Approx(1.0).epsilon(1e-14));

    const GaussianMixture half = perturbed_mixture(mix, ou, std::log(2.0));
    CHECK(half.means()[1] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(half.variances()[1] == doctest::Approx(1.0).epsilon(1e-12));

    const GaussianMixture stationary =
        perturbed_mixture(GaussianMixture::single(0.0, 1.0), ou, 1.7);
    CHECK(stationary.means()[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(stationary.variances()[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("perturbation semigroup") {
    const LinearSde ou = LinearSde::ou(3.0);
    const GaussianMixture mix({0.4, 0.6}, {-2.0, 3.5}, {0.8, 1.3});
    const double s = 0.6, t = 2.1;
    const GaussianMixture via =
        perturbed_mixture(mix, ou, s)
            .scale_and_convolve(ou.r(t) / ou.r(s),
                                ou.r(t) * ou.r(t) * (ou.v(t) * ou.v(t) - ou.v(s) * ou.v(s)));
    const GaussianMixture direct = perturbed_mixture(mix, ou, t);
    for (int k = 0; k < 2; ++k) {
        CHECK(std::abs(via.means()[k] - direct.means()[k]) < 1e-10);
        CHECK(std::abs(via.variances()[k] - direct.variances()[k]) < 1e-10);
    }
}

TEST_CASE("dataset generation") {
    const GaussianMixture mix = GaussianMixture::two_mode(3.0);
    const Dataset big = sample_mixture(mix, 1000000, 99);
    int positive = 0;
    for (Eigen::Index i = 0; i < big.samples.size(); ++i) positive += big.samples[i] > 0.0;
    CHECK(std::abs(positive / 1e6 - 0.5) < 0.002);

    const Dataset gauss = sample_mixture(GaussianMixture::single(0.0, 1.0), 1000000, 7);
    CHECK(std::abs(gauss.samples.mean()) < 0.004);

    const Dataset a = sample_mixture(mix, 1000, 42);
    const Dataset b = sample_mixture(mix, 1000, 42);
    CHECK(a.samples == b.samples);  // bit-identical regeneration
    const Dataset c = sample_mixture(mix, 1000, 43);
    CHECK(a.samples != c.samples);
}

TEST_CASE("grids") {
    const GaussianMixture mix = GaussianMixture::two_mode(3.0);
    const Grid g = mix.standard_grid();
    CHECK(g.n == 4096);
    CHECK(g.lo == doctest::Approx(-13.0));
    CHECK(g.hi == doctest::Approx(13.0));
    const Grid s = mix.support_grid(5.0, 1024);
    CHECK(s.lo == doctest::Approx(-8.0));
    CHECK(1.0 - mix.mass_on(s.lo, s.hi) < 1e-6);
}

TEST_CASE("two-mode fit") {
    const GaussianMixture mix({0.2, 0.8}, {-4.0, 4.0}, {1.0, 1.0});
    const Grid g = mix.standard_grid(2048);
    Eigen::VectorXd dens(g.n);
    for (int j = 0; j < g.n; ++j) dens[j] = mix.density(g.point(j));
    const TwoModeFit fit = fit_two_modes(g.points(), dens);
    CHECK(fit.weight_pos == doctest::Approx(0.8).epsilon(1e-3));
    CHECK(fit.mean_pos == doctest::Approx(4.0).epsilon(1e-3));
    CHECK(fit.mean_neg == doctest::Approx(-4.0).epsilon(1e-3));
    CHECK(fit.dominant_weight() == doctest::Approx(0.8).epsilon(1e-3));
}

TEST_CASE("invalid mixtures are rejected") {
    CHECK_THROWS_AS(GaussianMixture({0.5, 0.6}, {0.0, 1.0}, {1.0, 1.0}), ConfigError);
    CHECK_THROWS_AS(GaussianMixture({1.0}, {0.0}, {-1.0}), ConfigError);
    CHECK_THROWS_AS(GaussianMixture({0.5, 0.5}, {0.0}, {1.0, 1.0}), ConfigError);
}

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sgl/rng.hpp"
#include "sgl/sde.hpp"

namespace sgl {

// Uniform 1D evaluation grid.
struct Grid {
    double lo = 0.0;
    double hi = 0.0;
    int n = 0;

    double spacing() const { return (hi - lo) / (n - 1); }
    double point(int j) const { return lo + spacing() * j; }
    Eigen::VectorXd points() const;
    // Trapezoid weights.
    Eigen::VectorXd weights() const;
};

// 1D Gaussian mixture: sum_k q_k N(mu_k, sigma_k^2). Closed under the linear
// forward perturbation, which keeps every density/score analytic.
class GaussianMixture {
  public:
    GaussianMixture(std::vector<double> weights, std::vector<double> means,
                    std::vector<double> variances);

    static GaussianMixture single(double mean, double variance);
    // Equal-weight two-mode target at +-mu with unit variances.
    static GaussianMixture two_mode(double mu);

    int modes() const { return static_cast<int>(weights_.size()); }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& means() const { return means_; }
    const std::vector<double>& variances() const { return variances_; }

    double density(double x) const;
    double log_density(double x) const;
    double score(double x) const;
    // d score / dx, needed by the probability-flow ODE divergence.
    double score_dx(double x) const;

    // Affine-map + Gaussian-convolution closure: scale all locations by
    // `scale`, then convolve with N(0, add_var).
    GaussianMixture scale_and_convolve(double scale, double add_var) const;

    // Exact mass on [lo, hi] via the Gaussian CDF.
    double mass_on(double lo, double hi) const;

    // Uniform 4096-point grid on [min mu - 10 max sigma, max mu + 10 max sigma].
    Grid standard_grid(int n = 4096) const;
    // Same span rule with a configurable sigma multiple, for support-truncated
    // evaluations.
    Grid support_grid(double k_sigma, int n = 4096) const;

  private:
    std::vector<double> weights_;
    std::vector<double> means_;
    std::vector<double> variances_;
};

struct Dataset {
    Eigen::VectorXd samples;
    std::uint64_t seed = 0;
    GaussianMixture source = GaussianMixture::single(0.0, 1.0);
};

// The analytic marginal p_t: means r mu_k, variances r^2 sigma_k^2 + r^2 v^2.
GaussianMixture perturbed_mixture(const GaussianMixture& gm, const LinearSde& sde, double t);

// n i.i.d. draws, deterministic per seed.
Dataset sample_mixture(const GaussianMixture& gm, int n, std::uint64_t seed);

struct TwoModeFit {
    double weight_neg = 0.0;
    double mean_neg = 0.0;
    double weight_pos = 0.0;
    double mean_pos = 0.0;

    double dominant_weight() const { return weight_neg > weight_pos ? weight_neg : weight_pos; }
};

// Split-at-zero two-component summary of a density on a grid (mass and
// conditional mean per half line). Matches the +-mu targets used throughout.
TwoModeFit fit_two_modes(const Eigen::VectorXd& grid_x, const Eigen::VectorXd& density);
TwoModeFit fit_two_modes_samples(const Eigen::VectorXd& samples);

}  // namespace sgl

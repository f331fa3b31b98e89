#pragma once

#include <Eigen/Dense>
#include <functional>

#include "sgl/mixture.hpp"
#include "sgl/rng.hpp"
#include "sgl/sde.hpp"

namespace sgl {

// Normalized density on a uniform 1D grid.
struct DensityGrid {
    Eigen::VectorXd x;
    Eigen::VectorXd p;
    double spacing = 0.0;

    double trapezoid_mass() const;
};

// Scalar score s(x, t) with its spatial derivative, the 1D interface shared
// by learned models and analytic oracles.
struct ScoreField1d {
    std::function<double(double, double)> value;
    std::function<double(double, double)> dx;
};

ScoreField1d analytic_score_field(const GaussianMixture& gm, const LinearSde& sde);

// Log-density by cumulative trapezoid integration of the score from the left
// grid edge, exponentiated with max-subtraction, trapezoid-normalized.
DensityGrid density_from_score(const std::function<double(double)>& score, const Grid& grid);

// Same construction from precomputed score values at the grid points.
DensityGrid density_from_values(const Eigen::VectorXd& score_values, const Grid& grid);

DensityGrid density_on_grid(const GaussianMixture& gm, const Grid& grid);

// Trapezoid integral of p log(p/q) on a shared grid. q is floored at 1e-300
// before the log; points with p below 1e-15 are dropped.
double kl_quadrature(const DensityGrid& p, const DensityGrid& q);

// KL(p0 || density reconstructed from the model score at t_min).
double model_kl(const std::function<double(double, double)>& score, const LinearSde& sde,
                const GaussianMixture& gm, const Grid& grid);

// Probability-flow ODE log-likelihood: RK4 from t_min to the horizon,
// co-integrating the instantaneous change-of-variables correction.
double ode_loglik(const ScoreField1d& field, const LinearSde& sde, double x, int n_steps);

// Probability-flow ODE sampling: integrate backward from prior draws.
Eigen::VectorXd ode_sample(const ScoreField1d& field, const LinearSde& sde, int n_samples,
                           int n_steps, Rng& rng);

// D_KL(p_T || pi) on the grid.
double kl_prior_gap(const GaussianMixture& gm, const LinearSde& sde, const Grid& grid);

}  // namespace sgl

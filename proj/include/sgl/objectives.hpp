#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "sgl/mixture.hpp"
#include "sgl/score_model.hpp"
#include "sgl/sde.hpp"

namespace sgl {

struct LossReport {
    double value = 0.0;
    double stderr_ = 0.0;
    int n_time_samples = 0;
    int n_space_samples = 0;
    std::uint64_t seed = 0;
};

using Score1d = std::function<double(double, double)>;

Score1d model_score_fn(const ScoreModel& model);

// Empirical DSM loss over paired (x_i, t_i) with one transition draw per pair,
// deterministic per noise seed. lambda defaults to the Eq.-(6) weighting.
LossReport dsm_empirical(const ScoreModel& model, const LinearSde& sde, const Dataset& data,
                         const Eigen::VectorXd& times, std::uint64_t noise_seed);

// Time-dependent SM loss against the analytic perturbed-mixture score:
// x by trapezoid quadrature of the analytic p_t on the grid, t by n_time
// uniform midpoints on [t_min, T]. Reports the absolute loss (the usually
// unknown additive constant is computed since the true score is available).
LossReport sm_population(const Score1d& score, const LinearSde& sde, const GaussianMixture& gm,
                         int n_time, const Grid& grid,
                         const std::function<double(double)>& lambda = {});

// Monte-Carlo SM estimate with a standard error, for estimator cross-checks.
LossReport sm_monte_carlo(const Score1d& score, const LinearSde& sde, const GaussianMixture& gm,
                          int n_mc, std::uint64_t seed,
                          const std::function<double(double)>& lambda = {});

// Quadratic structure of the SM loss restricted to random features:
//   L(A) = (1/m) vec(A)^T (B1 (x) I) vec(A) - (2/sqrt(m)) vec(B2^T)^T vec(A) + c0
// with B1 = E[h1 h1^T], B2 = E[h1 h2^T], h1 = sqrt(lambda/m) sigma(...),
// h2 = sqrt(lambda) * true score.
struct QuadraticForm {
    Eigen::MatrixXd b1;  // m x m
    Eigen::MatrixXd b2;  // m x d
    double c0 = 0.0;
    int n_mc = 0;

    // Per-batch copies over disjoint draw subsets, for standard errors of the
    // reconstructed loss (empty for quadrature builds).
    struct Batch {
        Eigen::MatrixXd b1;
        Eigen::MatrixXd b2;
        double c0 = 0.0;
    };
    std::vector<Batch> batches;

    double loss(const Eigen::MatrixXd& A) const;
    double loss_stderr(const Eigen::MatrixXd& A) const;
    // Largest Hessian eigenvalue in the normalized-parameter metric (2 max
    // eig B1); the descent threshold for gradient steps.
    double hessian_eig_max() const;
    double min_eigenvalue() const;
};

QuadraticForm quadratic_coeffs(const RandomFeatureNet& model, const LinearSde& sde,
                               const GaussianMixture& gm, int n_mc, std::uint64_t seed,
                               int n_batches = 16);

// Deterministic counterpart built by the sm_population quadrature rule; this
// is the exact quadratic realized by sm_population on the same grid.
QuadraticForm quadratic_coeffs_quadrature(const RandomFeatureNet& model, const LinearSde& sde,
                                          const GaussianMixture& gm, int n_time, const Grid& grid);

// Ridge-regularized normal-equations optimum A* of the quadratic form.
Eigen::MatrixXd optimal_coefficients(const QuadraticForm& qf, int dim, double ridge = 1e-10);

}  // namespace sgl

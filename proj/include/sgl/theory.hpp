#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "sgl/mixture.hpp"
#include "sgl/rng.hpp"
#include "sgl/sde.hpp"

namespace sgl {

// Multipliers of the bound's terms: stat tau^4/(mn), disc tau^3/m^2, opt 1/tau,
// approx 1/m (mu^2/m in the modes-shift version), and the irreducible losses.
// The hidden <~ constants are unspecified by the theory; defaults are 1 and
// bounds are reported as scaling shapes, never as certified certificates.
struct BoundConstants {
    double c1 = 1.0;
    double c2 = 1.0;
    double c3 = 1.0;
    double c4 = 1.0;
    double c5 = 1.0;
    // Estimated irreducible loss (target-dependent; defaults to 0, reported
    // separately as ">= estimated SM loss at the optimum").
    double irreducible_loss = 0.0;
    int poly_mu_degree = 6;

    void validate() const;
};

struct BoundReport {
    double stat = 0.0;
    double disc = 0.0;
    double opt = 0.0;
    double approx = 0.0;
    double irreducible = 0.0;
    double prior_gap = 0.0;

    double total() const { return stat + disc + opt + approx + irreducible + prior_gap; }
};

BoundReport thm1_bound(double tau, double m, double n, const BoundConstants& consts,
                       double prior_gap);

BoundReport thm2_bound(double tau, double m, double n, double mu, const BoundConstants& consts,
                       double prior_gap);

struct OptimalTau {
    double tau = 1.0;
    bool at_boundary = false;
};

// Argmin over tau >= 1 of the Theorem-1 bound by golden-section search
// (convex in tau); flags hits of either search bound.
OptimalTau optimal_tau(double m, double n, const BoundConstants& consts, double prior_gap = 0.0,
                       double tau_hi = 1e8, double tol = 1e-6);

// The early-stopping time scale n^{2/5}.
double tau_es(double n);

struct McGapPoint {
    int m = 0;
    double gap = 0.0;
    double stderr_ = 0.0;
};

// Monte-Carlo gap between a width-m prefix subsample and the width-m_ref
// reference net sharing the same frozen features, with coefficients from the
// bounded rule a(w, u) = clamp(w_1, -1, 1).
std::vector<McGapPoint> mc_gap_estimate(std::uint64_t feature_seed, const LinearSde& sde,
                                        const GaussianMixture& gm, const std::vector<int>& m_list,
                                        int m_ref, int n_mc, Rng& rng);

// Fraction of draws with ||x(t)||_inf <= C_T (||x0||_inf + sqrt(log(1/delta^2))),
// C_T = max over [0, T] of {r, r v}.
double lemma1_coverage(const LinearSde& sde, const std::function<double(Rng&)>& x0_sampler,
                       double t, double delta, int n_trials, Rng& rng);

double lemma1_radius(const LinearSde& sde, double x0_abs, double delta);

}  // namespace sgl

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sgl/rng.hpp"

namespace sgl {

struct Prior {
    double mean = 0.0;
    double variance = 1.0;

    double log_density(double x) const;
};

// Piecewise-linear coefficient table t -> value, used by custom schedules.
struct CoeffTable {
    std::vector<double> t;
    std::vector<double> value;

    double eval(double at) const;
};

enum class SdePreset { Ou, VeConst, Custom };

// Linear forward SDE dx = f(t) x dt + g(t) dW on [0, T].
//
// The transition kernel is N(r(t) x0, r(t)^2 v(t)^2 I) with
// r(t) = exp(int_0^t f) and v(t) = sqrt(int_0^t g^2 / r^2).
class LinearSde {
  public:
    static LinearSde ou(double horizon);
    static LinearSde ve_const(double horizon, double g_const = 1.0);
    static LinearSde custom(double horizon, CoeffTable f, CoeffTable g);

    SdePreset preset() const { return preset_; }
    double horizon() const { return horizon_; }
    // All time sampling and integration stop here; the DSM target and the
    // Eq.-(6) weighting are singular at t = 0.
    double t_min() const { return 1e-3 * horizon_; }

    double f(double t) const;
    double g(double t) const;
    double r(double t) const;
    double v(double t) const;
    double rv(double t) const { return r(t) * v(t); }

    Prior prior() const;

    void check_time(double t) const;

  private:
    LinearSde() = default;

    double log_r_custom(double t) const;

    SdePreset preset_ = SdePreset::Ou;
    double horizon_ = 1.0;
    double g_const_ = 1.0;
    CoeffTable f_table_;
    CoeffTable g_table_;
    // Cumulative exact integrals of the piecewise-linear f at its breakpoints.
    std::vector<double> f_cum_;
    // v^2 at g-table breakpoints, integrated by adaptive Simpson per segment.
    std::vector<double> v2_nodes_;
    std::vector<double> v2_times_;
};

using ScoreFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

// One draw of x(t) | x(0) = x0 from the closed-form kernel.
Eigen::VectorXd sample_transition(const LinearSde& sde, const Eigen::VectorXd& x0, double t,
                                  Rng& rng);

// grad_{x(t)} log p_{t|0}(x(t) | x0) = -(x(t) - r x0) / (r^2 v^2),
// the DSM regression target. Throws NumericalError for t < t_min.
Eigen::VectorXd perturbation_score(const LinearSde& sde, const Eigen::VectorXd& x0,
                                   const Eigen::VectorXd& xt, double t);

// lambda(t) = r(t) v(t) / sqrt(d), the Eq.-(6) weighting with the
// proportionality constant fixed to 1: lambda^2 E||grad log p_{t|0}||^2 = 1.
double lambda_weight(const LinearSde& sde, double t, int dim);

// Euler-Maruyama integration of the reverse-time SDE from t = T down to
// t_min, initialized at the prior. Returns one sample per column.
Eigen::MatrixXd reverse_sde_sample(const LinearSde& sde, const ScoreFn& score, int dim,
                                   int n_steps, int n_samples, Rng& rng);

}  // namespace sgl

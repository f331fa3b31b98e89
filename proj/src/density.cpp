#include "sgl/density.hpp"

#include <cmath>
#include <sstream>

#include "sgl/errors.hpp"

namespace sgl {

namespace {
constexpr double kDensityFloor = 1e-300;
constexpr double kMassFloor = 1e-15;
}  // namespace

double DensityGrid::trapezoid_mass() const {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        double w = spacing;
        if (j == 0 || j + 1 == x.size()) w *= 0.5;
        acc += w * p[j];
    }
    return acc;
}

ScoreField1d analytic_score_field(const GaussianMixture& gm, const LinearSde& sde) {
    ScoreField1d field;
    field.value = [gm, sde](double x, double t) { return perturbed_mixture(gm, sde, t).score(x); };
    field.dx = [gm, sde](double x, double t) { return perturbed_mixture(gm, sde, t).score_dx(x); };
    return field;
}

DensityGrid density_from_values(const Eigen::VectorXd& score_values, const Grid& grid) {
    if (grid.n < 2) throw ConfigError("density grid needs at least 2 points");
    if (score_values.size() != grid.n) throw ConfigError("score values / grid size mismatch");
    const double h = grid.spacing();
    Eigen::VectorXd logq(grid.n);
    logq[0] = 0.0;
    for (int j = 1; j < grid.n; ++j) {
        if (!std::isfinite(score_values[j]) || !std::isfinite(score_values[j - 1])) {
            std::ostringstream msg;
            msg << "non-finite score at x = " << grid.point(j);
            throw NumericalError(msg.str());
        }
        logq[j] = logq[j - 1] + 0.5 * (score_values[j - 1] + score_values[j]) * h;
    }
    const double shift = logq.maxCoeff();
    DensityGrid out{grid.points(), Eigen::VectorXd(grid.n), h};
    for (int j = 0; j < grid.n; ++j) out.p[j] = std::exp(logq[j] - shift);
    const double mass = out.trapezoid_mass();
    if (!(mass > 0.0) || !std::isfinite(mass)) {
        throw NumericalError("degenerate density: zero or non-finite total mass");
    }
    out.p /= mass;
    return out;
}

DensityGrid density_from_score(const std::function<double(double)>& score, const Grid& grid) {
    if (grid.n < 2) throw ConfigError("density grid needs at least 2 points");
    Eigen::VectorXd vals(grid.n);
    for (int j = 0; j < grid.n; ++j) vals[j] = score(grid.point(j));
    return density_from_values(vals, grid);
}

DensityGrid density_on_grid(const GaussianMixture& gm, const Grid& grid) {
    DensityGrid out{grid.points(), Eigen::VectorXd(grid.n), grid.spacing()};
    for (int j = 0; j < grid.n; ++j) out.p[j] = gm.density(out.x[j]);
    out.p /= out.trapezoid_mass();
    return out;
}

double kl_quadrature(const DensityGrid& p, const DensityGrid& q) {
    if (p.x.size() != q.x.size() || std::abs(p.spacing - q.spacing) > 1e-12 ||
        std::abs(p.x[0] - q.x[0]) > 1e-12) {
        throw ConfigError("kl_quadrature requires a shared grid");
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < p.x.size(); ++j) {
        if (p.p[j] < kMassFloor) continue;
        if (q.p[j] == 0.0 && p.p[j] > kMassFloor) {
            std::ostringstream msg;
            msg << "support mismatch at x = " << p.x[j] << " (p = " << p.p[j] << ", q = 0)";
            throw NumericalError(msg.str());
        }
        double w = p.spacing;
        if (j == 0 || j + 1 == p.x.size()) w *= 0.5;
        const double qj = std::max(q.p[j], kDensityFloor);
        acc += w * p.p[j] * std::log(p.p[j] / qj);
    }
    return acc;
}

double model_kl(const std::function<double(double, double)>& score, const LinearSde& sde,
                const GaussianMixture& gm, const Grid& grid) {
    const double t_eval = sde.t_min();
    const DensityGrid q =
        density_from_score([&](double x) { return score(x, t_eval); }, grid);
    return kl_quadrature(density_on_grid(gm, grid), q);
}

double ode_loglik(const ScoreField1d& field, const LinearSde& sde, double x, int n_steps) {
    if (n_steps < 100) throw ConfigError("ode_loglik needs n_steps >= 100");
    const double t_lo = sde.t_min();
    const double T = sde.horizon();
    const double h = (T - t_lo) / n_steps;

    // Joint RK4 on (x, loglik correction): dx/dt = f x - g^2 s / 2,
    // dl/dt = f - g^2 (ds/dx) / 2.
    auto rhs = [&](double t, double xv, double& dx, double& dl) {
        const double ft = sde.f(t);
        const double g2 = sde.g(t) * sde.g(t);
        dx = ft * xv - 0.5 * g2 * field.value(xv, t);
        dl = ft - 0.5 * g2 * field.dx(xv, t);
    };

    double xv = x;
    double corr = 0.0;
    double t = t_lo;
    for (int k = 0; k < n_steps; ++k) {
        double k1x, k1l, k2x, k2l, k3x, k3l, k4x, k4l;
        rhs(t, xv, k1x, k1l);
        rhs(t + 0.5 * h, xv + 0.5 * h * k1x, k2x, k2l);
        rhs(t + 0.5 * h, xv + 0.5 * h * k2x, k3x, k3l);
        rhs(t + h, xv + h * k3x, k4x, k4l);
        xv += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        corr += h / 6.0 * (k1l + 2.0 * k2l + 2.0 * k3l + k4l);
        t += h;
        if (!std::isfinite(xv) || !std::isfinite(corr)) {
            std::ostringstream msg;
            msg << "probability-flow ODE blew up at t = " << t;
            throw NumericalError(msg.str());
        }
    }
    return sde.prior().log_density(xv) + corr;
}

Eigen::VectorXd ode_sample(const ScoreField1d& field, const LinearSde& sde, int n_samples,
                           int n_steps, Rng& rng) {
    if (n_steps < 100) throw ConfigError("ode_sample needs n_steps >= 100");
    const double t_lo = sde.t_min();
    const double T = sde.horizon();
    const double h = (T - t_lo) / n_steps;
    const Prior pi = sde.prior();

    auto rhs = [&](double t, double xv) {
        return sde.f(t) * xv - 0.5 * sde.g(t) * sde.g(t) * field.value(xv, t);
    };

    Eigen::VectorXd out(n_samples);
    for (int s = 0; s < n_samples; ++s) {
        double xv = pi.mean + std::sqrt(pi.variance) * rng.normal();
        double t = T;
        for (int k = 0; k < n_steps; ++k) {
            const double k1 = rhs(t, xv);
            const double k2 = rhs(t - 0.5 * h, xv - 0.5 * h * k1);
            const double k3 = rhs(t - 0.5 * h, xv - 0.5 * h * k2);
            const double k4 = rhs(t - h, xv - h * k3);
            xv -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t -= h;
            if (!std::isfinite(xv)) {
                std::ostringstream msg;
                msg << "probability-flow ODE blew up at t = " << t << " (sample " << s << ")";
                throw NumericalError(msg.str());
            }
        }
        out[s] = xv;
    }
    return out;
}

double kl_prior_gap(const GaussianMixture& gm, const LinearSde& sde, const Grid& grid) {
    const DensityGrid pT = density_on_grid(perturbed_mixture(gm, sde, sde.horizon()), grid);
    const Prior pi = sde.prior();
    const DensityGrid qpi = density_on_grid(GaussianMixture::single(pi.mean, pi.variance), grid);
    return kl_quadrature(pT, qpi);
}

}  // namespace sgl

#include "sgl/sde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sgl/errors.hpp"

namespace sgl {

namespace {

constexpr double kTwoPi = 6.283185307179586477;

// Adaptive Simpson with absolute/relative tolerance; integrand assumed smooth
// on the given segment (callers split at table breakpoints).
double simpson_rec(const std::function<double(double)>& fn, double a, double b, double fa,
                   double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = fn(lm);
    const double frm = fn(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return simpson_rec(fn, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(fn, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& fn, double a, double b, double tol) {
    if (b <= a) return 0.0;
    const double fa = fn(a);
    const double m = 0.5 * (a + b);
    const double fm = fn(m);
    const double fb = fn(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(fn, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace

double Prior::log_density(double x) const {
    const double d = x - mean;
    return -0.5 * d * d / variance - 0.5 * std::log(kTwoPi * variance);
}

double CoeffTable::eval(double at) const {
    if (t.empty()) throw ConfigError("empty coefficient table");
    if (at <= t.front()) return value.front();
    if (at >= t.back()) return value.back();
    const auto it = std::upper_bound(t.begin(), t.end(), at);
    const std::size_t hi = static_cast<std::size_t>(it - t.begin());
    const std::size_t lo = hi - 1;
    const double w = (at - t[lo]) / (t[hi] - t[lo]);
    return value[lo] + w * (value[hi] - value[lo]);
}

LinearSde LinearSde::ou(double horizon) {
    if (horizon <= 0.0) throw ConfigError("horizon_T must be positive");
    LinearSde s;
    s.preset_ = SdePreset::Ou;
    s.horizon_ = horizon;
    return s;
}

LinearSde LinearSde::ve_const(double horizon, double g_const) {
    if (horizon <= 0.0) throw ConfigError("horizon_T must be positive");
    if (g_const <= 0.0) throw ConfigError("VE diffusion constant must be positive");
    LinearSde s;
    s.preset_ = SdePreset::VeConst;
    s.horizon_ = horizon;
    s.g_const_ = g_const;
    return s;
}

LinearSde LinearSde::custom(double horizon, CoeffTable f, CoeffTable g) {
    if (horizon <= 0.0) throw ConfigError("horizon_T must be positive");
    if (f.t.size() != f.value.size() || g.t.size() != g.value.size() || f.t.size() < 2 ||
        g.t.size() < 2) {
        throw ConfigError("custom schedule tables need matching t/value arrays of length >= 2");
    }
    LinearSde s;
    s.preset_ = SdePreset::Custom;
    s.horizon_ = horizon;
    s.f_table_ = std::move(f);
    s.g_table_ = std::move(g);

    // int f dt is exact for a piecewise-linear table (trapezoid per segment).
    auto& ft = s.f_table_;
    if (ft.t.front() > 0.0) {
        ft.t.insert(ft.t.begin(), 0.0);
        ft.value.insert(ft.value.begin(), ft.value.front());
    }
    if (ft.t.back() < horizon) {
        ft.t.push_back(horizon);
        ft.value.push_back(ft.value.back());
    }
    s.f_cum_.assign(ft.t.size(), 0.0);
    for (std::size_t i = 1; i < ft.t.size(); ++i) {
        const double dt = ft.t[i] - ft.t[i - 1];
        s.f_cum_[i] = s.f_cum_[i - 1] + 0.5 * (ft.value[i] + ft.value[i - 1]) * dt;
    }

    // v^2 nodes at the union of f/g breakpoints; integrand g^2/r^2 is smooth
    // between breakpoints since r is exact there.
    std::vector<double> nodes = ft.t;
    nodes.insert(nodes.end(), s.g_table_.t.begin(), s.g_table_.t.end());
    nodes.push_back(0.0);
    nodes.push_back(horizon);
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-15; }),
                nodes.end());
    nodes.erase(std::remove_if(nodes.begin(), nodes.end(),
                               [&](double x) { return x < 0.0 || x > horizon; }),
                nodes.end());
    s.v2_times_ = nodes;
    s.v2_nodes_.assign(nodes.size(), 0.0);
    auto integrand = [&s](double z) {
        const double gz = s.g_table_.eval(z);
        const double rz = std::exp(s.log_r_custom(z));
        return gz * gz / (rz * rz);
    };
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        s.v2_nodes_[i] = s.v2_nodes_[i - 1] +
                         adaptive_simpson(integrand, nodes[i - 1], nodes[i], 1e-12);
    }
    return s;
}

void LinearSde::check_time(double t) const {
    if (!(t >= 0.0) || t > horizon_ * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "time " << t << " outside [0, " << horizon_ << "]";
        throw DomainError(msg.str());
    }
}

double LinearSde::f(double t) const {
    check_time(t);
    switch (preset_) {
        case SdePreset::Ou: return -1.0;
        case SdePreset::VeConst: return 0.0;
        case SdePreset::Custom: return f_table_.eval(t);
    }
    return 0.0;
}

double LinearSde::g(double t) const {
    check_time(t);
    switch (preset_) {
        case SdePreset::Ou: return std::sqrt(2.0);
        case SdePreset::VeConst: return g_const_;
        case SdePreset::Custom: return g_table_.eval(t);
    }
    return 0.0;
}

double LinearSde::log_r_custom(double t) const {
    const auto& ts = f_table_.t;
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - ts.begin());
    if (hi == 0) return 0.0;
    if (hi >= ts.size()) hi = ts.size() - 1;
    const std::size_t lo = hi - 1;
    const double dt = t - ts[lo];
    const double seg = ts[hi] - ts[lo];
    const double f_at = seg > 0.0 ? f_table_.value[lo] +
                                        (f_table_.value[hi] - f_table_.value[lo]) * dt / seg
                                  : f_table_.value[lo];
    return f_cum_[lo] + 0.5 * (f_table_.value[lo] + f_at) * dt;
}

double LinearSde::r(double t) const {
    check_time(t);
    switch (preset_) {
        case SdePreset::Ou: return std::exp(-t);
        case SdePreset::VeConst: return 1.0;
        case SdePreset::Custom: return std::exp(log_r_custom(t));
    }
    return 1.0;
}

double LinearSde::v(double t) const {
    check_time(t);
    switch (preset_) {
        case SdePreset::Ou: return std::sqrt(std::expm1(2.0 * t));
        case SdePreset::VeConst: return g_const_ * std::sqrt(t);
        case SdePreset::Custom: {
            const auto& ts = v2_times_;
            const auto it = std::upper_bound(ts.begin(), ts.end(), t);
            std::size_t hi = static_cast<std::size_t>(it - ts.begin());
            if (hi == 0) return 0.0;
            if (hi >= ts.size()) return std::sqrt(v2_nodes_.back());
            const std::size_t lo = hi - 1;
            auto integrand = [this](double z) {
                const double gz = g_table_.eval(z);
                const double rz = std::exp(log_r_custom(z));
                return gz * gz / (rz * rz);
            };
            const double v2 = v2_nodes_[lo] + adaptive_simpson(integrand, ts[lo], t, 1e-12);
            return std::sqrt(std::max(v2, 0.0));
        }
    }
    return 0.0;
}

Prior LinearSde::prior() const {
    switch (preset_) {
        case SdePreset::Ou: return Prior{0.0, 1.0};
        default: {
            // Marginal of a point mass at the origin at the horizon.
            const double rv_T = rv(horizon_);
            return Prior{0.0, rv_T * rv_T};
        }
    }
}

Eigen::VectorXd sample_transition(const LinearSde& sde, const Eigen::VectorXd& x0, double t,
                                  Rng& rng) {
    sde.check_time(t);
    const double rt = sde.r(t);
    const double scale = sde.rv(t);
    Eigen::VectorXd out = rt * x0;
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += scale * rng.normal();
    return out;
}

Eigen::VectorXd perturbation_score(const LinearSde& sde, const Eigen::VectorXd& x0,
                                   const Eigen::VectorXd& xt, double t) {
    sde.check_time(t);
    if (t < sde.t_min()) {
        std::ostringstream msg;
        msg << "perturbation score singular: t = " << t << " < t_min = " << sde.t_min();
        throw NumericalError(msg.str());
    }
    const double var = sde.rv(t) * sde.rv(t);
    return -(xt - sde.r(t) * x0) / var;
}

double lambda_weight(const LinearSde& sde, double t, int dim) {
    sde.check_time(t);
    return sde.rv(t) / std::sqrt(static_cast<double>(dim));
}

Eigen::MatrixXd reverse_sde_sample(const LinearSde& sde, const ScoreFn& score, int dim,
                                   int n_steps, int n_samples, Rng& rng) {
    if (n_steps < 1) throw ConfigError("reverse_sde_sample needs n_steps >= 1");
    const double t_lo = sde.t_min();
    const double T = sde.horizon();
    const double dt = (T - t_lo) / n_steps;
    const Prior pi = sde.prior();
    const double prior_sd = std::sqrt(pi.variance);

    Eigen::MatrixXd samples(dim, n_samples);
    Eigen::VectorXd x(dim);
    for (int s = 0; s < n_samples; ++s) {
        for (int i = 0; i < dim; ++i) x[i] = pi.mean + prior_sd * rng.normal();
        double t = T;
        for (int k = 0; k < n_steps; ++k) {
            const Eigen::VectorXd sc = score(x, t);
            if (!sc.allFinite()) {
                std::ostringstream msg;
                msg << "non-finite score during reverse SDE at t = " << t << ", x = ["
                    << x.transpose() << "]";
                throw NumericalError(msg.str());
            }
            const double ft = sde.f(t);
            const double gt = sde.g(t);
            // dt is negative along the reverse flow; drift f x - g^2 s.
            x += (ft * x - gt * gt * sc) * (-dt);
            const double noise_sd = gt * std::sqrt(dt);
            for (int i = 0; i < dim; ++i) x[i] += noise_sd * rng.normal();
            t -= dt;
        }
        if (!x.allFinite()) {
            std::ostringstream msg;
            msg << "reverse SDE sample diverged (sample " << s << ")";
            throw NumericalError(msg.str());
        }
        samples.col(s) = x;
    }
    return samples;
}

}  // namespace sgl

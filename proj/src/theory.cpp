#include "sgl/theory.hpp"

#include <algorithm>
#include <cmath>

#include "sgl/errors.hpp"
#include "sgl/score_model.hpp"

namespace sgl {

void BoundConstants::validate() const {
    if (c1 < 0.0 || c2 < 0.0 || c3 < 0.0 || c4 < 0.0 || c5 < 0.0) {
        throw ConfigError("bound constants must be non-negative");
    }
    if (poly_mu_degree < 0) throw ConfigError("poly_mu_degree must be non-negative");
}

BoundReport thm1_bound(double tau, double m, double n, const BoundConstants& consts,
                       double prior_gap) {
    consts.validate();
    if (tau < 1.0) throw DomainError("thm1_bound requires tau >= 1");
    if (m < 1.0 || n < 1.0) throw ConfigError("thm1_bound requires m, n >= 1");
    BoundReport rep;
    rep.stat = consts.c1 * tau * tau * tau * tau / (m * n);
    rep.disc = consts.c2 * tau * tau * tau / (m * m);
    rep.opt = consts.c3 / tau;
    rep.approx = consts.c4 / m;
    rep.irreducible = consts.c5 * consts.irreducible_loss;
    rep.prior_gap = prior_gap;
    return rep;
}

BoundReport thm2_bound(double tau, double m, double n, double mu, const BoundConstants& consts,
                       double prior_gap) {
    if (mu <= 0.0) throw ConfigError("thm2_bound requires mu > 0");
    BoundReport rep = thm1_bound(tau, m, n, consts, prior_gap);
    const double poly = std::pow(mu, consts.poly_mu_degree);
    rep.stat *= poly;
    rep.disc *= poly;
    rep.approx = consts.c4 * mu * mu / m;
    return rep;
}

OptimalTau optimal_tau(double m, double n, const BoundConstants& consts, double prior_gap,
                       double tau_hi, double tol) {
    consts.validate();
    if (m < 1.0 || n < 1.0) throw ConfigError("optimal_tau requires m, n >= 1");
    auto total = [&](double tau) { return thm1_bound(tau, m, n, consts, prior_gap).total(); };

    // Golden-section search; the bound is a sum of convex terms in tau > 0.
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = 1.0, b = tau_hi;
    double x1 = b - phi * (b - a);
    double x2 = a + phi * (b - a);
    double f1 = total(x1), f2 = total(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = total(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = total(x2);
        }
    }
    OptimalTau res;
    res.tau = 0.5 * (a + b);
    res.at_boundary = (res.tau - 1.0) < 1e-3 || (tau_hi - res.tau) < 1e-3 * tau_hi;
    return res;
}

double tau_es(double n) {
    if (n < 1.0) throw ConfigError("tau_es requires n >= 1");
    return std::pow(n, 0.4);
}

std::vector<McGapPoint> mc_gap_estimate(std::uint64_t feature_seed, const LinearSde& sde,
                                        const GaussianMixture& gm, const std::vector<int>& m_list,
                                        int m_ref, int n_mc, Rng& rng) {
    if (m_list.empty()) throw ConfigError("mc_gap_estimate needs a non-empty m list");
    // The degenerate m == m_ref entry is allowed (identical nets, gap 0);
    // the 16x headroom rule applies to proper subsamples.
    int m_max_proper = 0;
    for (int m : m_list) {
        if (m > m_ref) throw ConfigError("mc_gap_estimate: m exceeds m_ref");
        if (m < m_ref) m_max_proper = std::max(m_max_proper, m);
    }
    if (m_max_proper > 0 && m_ref < 16 * m_max_proper) {
        throw ConfigError("mc_gap_estimate requires m_ref >= 16 max(m_list)");
    }
    if (n_mc < 2) throw ConfigError("mc_gap_estimate needs n_mc >= 2");

    RandomFeatureNet ref = RandomFeatureNet::init(1, m_ref, 4, sde.horizon(), feature_seed);
    // Bounded coefficient rule a(w, u) = clamp(w_1, -1, 1).
    Eigen::MatrixXd A(1, m_ref);
    for (int i = 0; i < m_ref; ++i) A(0, i) = std::clamp(ref.frozen_w()(i, 0), -1.0, 1.0);
    ref.set_coefficients(A);

    std::vector<int> sorted_m(m_list);
    std::sort(sorted_m.begin(), sorted_m.end());
    const std::size_t n_m = sorted_m.size();
    std::vector<double> mean(n_m, 0.0), m2(n_m, 0.0);

    Eigen::VectorXd x(1);
    for (int draw = 0; draw < n_mc; ++draw) {
        const double t = rng.uniform(sde.t_min(), sde.horizon());
        const GaussianMixture pt = perturbed_mixture(gm, sde, t);
        // Sample x ~ p_t.
        const double u = rng.uniform();
        double cum = 0.0;
        std::size_t k = 0;
        for (; k + 1 < pt.weights().size(); ++k) {
            cum += pt.weights()[k];
            if (u <= cum) break;
        }
        x[0] = pt.means()[k] + std::sqrt(pt.variances()[k]) * rng.normal();

        const Eigen::VectorXd sigma =
            (ref.frozen_w() * x + ref.frozen_u() * ref.embedding()(t)).cwiseMax(0.0);
        const Eigen::VectorXd contrib = A.row(0).transpose().cwiseProduct(sigma);
        // Prefix sums give every subsample width in one pass.
        const double lam = lambda_weight(sde, t, 1);
        double run = 0.0;
        int at = 0;
        std::vector<double> s_m(n_m, 0.0);
        for (int i = 0; i < m_ref; ++i) {
            run += contrib[i];
            while (at < static_cast<int>(n_m) && i + 1 == sorted_m[at]) {
                s_m[at] = run / sorted_m[at];
                ++at;
            }
        }
        const double s_ref = run / m_ref;
        for (std::size_t j = 0; j < n_m; ++j) {
            const double diff = s_m[j] - s_ref;
            const double val = lam * diff * diff;
            const double delta = val - mean[j];
            mean[j] += delta / (draw + 1);
            m2[j] += delta * (val - mean[j]);
        }
    }

    std::vector<McGapPoint> out(n_m);
    for (std::size_t j = 0; j < n_m; ++j) {
        out[j].m = sorted_m[j];
        out[j].gap = mean[j];
        out[j].stderr_ = std::sqrt(m2[j] / (n_mc - 1) / n_mc);
    }
    return out;
}

namespace {

// C_T = max over [0, T] of {r, r v} on a fine scan; both are smooth.
double schedule_envelope(const LinearSde& sde) {
    const int K = 4096;
    double c_t = 0.0;
    for (int j = 0; j <= K; ++j) {
        const double t = sde.horizon() * j / K;
        c_t = std::max({c_t, sde.r(t), sde.rv(t)});
    }
    return c_t;
}

}  // namespace

double lemma1_radius(const LinearSde& sde, double x0_abs, double delta) {
    if (delta <= 0.0 || delta >= 1.0) throw ConfigError("lemma1 requires delta in (0, 1)");
    return schedule_envelope(sde) * (x0_abs + std::sqrt(std::log(1.0 / (delta * delta))));
}

double lemma1_coverage(const LinearSde& sde, const std::function<double(Rng&)>& x0_sampler,
                       double t, double delta, int n_trials, Rng& rng) {
    if (n_trials < 1) throw ConfigError("lemma1_coverage needs n_trials >= 1");
    if (delta <= 0.0 || delta >= 1.0) throw ConfigError("lemma1 requires delta in (0, 1)");
    sde.check_time(t);
    const double rt = sde.r(t);
    const double scale = sde.rv(t);
    const double c_t = schedule_envelope(sde);
    const double log_term = std::sqrt(std::log(1.0 / (delta * delta)));
    int covered = 0;
    for (int i = 0; i < n_trials; ++i) {
        const double x0 = x0_sampler(rng);
        const double xt = rt * x0 + scale * rng.normal();
        if (std::abs(xt) <= c_t * (std::abs(x0) + log_term)) ++covered;
    }
    return static_cast<double>(covered) / n_trials;
}

}  // namespace sgl

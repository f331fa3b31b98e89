#include "sgl/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sgl/errors.hpp"

namespace sgl {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
}  // namespace

Eigen::VectorXd Grid::points() const {
    Eigen::VectorXd x(n);
    const double h = spacing();
    for (int j = 0; j < n; ++j) x[j] = lo + h * j;
    return x;
}

Eigen::VectorXd Grid::weights() const {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, spacing());
    w[0] *= 0.5;
    w[n - 1] *= 0.5;
    return w;
}

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<double> means,
                                 std::vector<double> variances)
    : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances)) {
    if (weights_.empty() || weights_.size() != means_.size() ||
        weights_.size() != variances_.size()) {
        throw ConfigError("mixture needs matching non-empty weight/mean/variance lists");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        if (weights_[k] <= 0.0) throw ConfigError("mixture weights must be positive");
        if (variances_[k] <= 0.0) throw ConfigError("mixture variances must be positive");
        total += weights_[k];
    }
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture weights must sum to 1");
}

GaussianMixture GaussianMixture::single(double mean, double variance) {
    return GaussianMixture({1.0}, {mean}, {variance});
}

GaussianMixture GaussianMixture::two_mode(double mu) {
    if (mu == 0.0) return single(0.0, 1.0);
    return GaussianMixture({0.5, 0.5}, {-mu, mu}, {1.0, 1.0});
}

double GaussianMixture::log_density(double x) const {
    double max_le = -std::numeric_limits<double>::infinity();
    std::vector<double> le(weights_.size());
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        const double d = x - means_[k];
        le[k] = std::log(weights_[k]) - 0.5 * d * d / variances_[k] -
                0.5 * (kLogTwoPi + std::log(variances_[k]));
        max_le = std::max(max_le, le[k]);
    }
    double acc = 0.0;
    for (double v : le) acc += std::exp(v - max_le);
    return max_le + std::log(acc);
}

double GaussianMixture::density(double x) const { return std::exp(log_density(x)); }

double GaussianMixture::score(double x) const {
    // Posterior-weighted component scores, computed with a shifted softmax so
    // far tails stay finite.
    double max_le = -std::numeric_limits<double>::infinity();
    std::vector<double> le(weights_.size());
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        const double d = x - means_[k];
        le[k] = std::log(weights_[k]) - 0.5 * d * d / variances_[k] -
                0.5 * std::log(variances_[k]);
        max_le = std::max(max_le, le[k]);
    }
    double z = 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        const double w = std::exp(le[k] - max_le);
        z += w;
        acc += w * (means_[k] - x) / variances_[k];
    }
    return acc / z;
}

double GaussianMixture::score_dx(double x) const {
    const std::size_t K = weights_.size();
    double max_le = -std::numeric_limits<double>::infinity();
    std::vector<double> le(K), s_k(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double d = x - means_[k];
        le[k] = std::log(weights_[k]) - 0.5 * d * d / variances_[k] -
                0.5 * std::log(variances_[k]);
        s_k[k] = (means_[k] - x) / variances_[k];
        max_le = std::max(max_le, le[k]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(le[k] - max_le);
    double sbar = 0.0;
    for (std::size_t k = 0; k < K; ++k) sbar += std::exp(le[k] - max_le) / z * s_k[k];
    // d/dx sum w_k s_k with w_k' = w_k (s_k - sbar).
    double acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const double w = std::exp(le[k] - max_le) / z;
        acc += w * (s_k[k] - sbar) * s_k[k] - w / variances_[k];
    }
    return acc;
}

GaussianMixture GaussianMixture::scale_and_convolve(double scale, double add_var) const {
    std::vector<double> means(means_.size());
    std::vector<double> vars(variances_.size());
    for (std::size_t k = 0; k < means_.size(); ++k) {
        means[k] = scale * means_[k];
        vars[k] = scale * scale * variances_[k] + add_var;
    }
    return GaussianMixture(weights_, means, vars);
}

double GaussianMixture::mass_on(double lo, double hi) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        const double sd = std::sqrt(variances_[k]);
        acc += weights_[k] * (normal_cdf((hi - means_[k]) / sd) - normal_cdf((lo - means_[k]) / sd));
    }
    return acc;
}

Grid GaussianMixture::standard_grid(int n) const { return support_grid(10.0, n); }

Grid GaussianMixture::support_grid(double k_sigma, int n) const {
    const double mu_lo = *std::min_element(means_.begin(), means_.end());
    const double mu_hi = *std::max_element(means_.begin(), means_.end());
    double sd_max = 0.0;
    for (double v : variances_) sd_max = std::max(sd_max, std::sqrt(v));
    return Grid{mu_lo - k_sigma * sd_max, mu_hi + k_sigma * sd_max, n};
}

GaussianMixture perturbed_mixture(const GaussianMixture& gm, const LinearSde& sde, double t) {
    sde.check_time(t);
    const double rt = sde.r(t);
    const double vt = sde.v(t);
    return gm.scale_and_convolve(rt, rt * rt * vt * vt);
}

Dataset sample_mixture(const GaussianMixture& gm, int n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("sample_mixture needs n >= 1");
    Rng rng(seed);
    // Cumulative weights for the categorical draw.
    std::vector<double> cum(gm.weights().size());
    std::partial_sum(gm.weights().begin(), gm.weights().end(), cum.begin());
    Dataset out{Eigen::VectorXd(n), seed, gm};
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        std::size_t k = 0;
        while (k + 1 < cum.size() && u > cum[k]) ++k;
        out.samples[i] = gm.means()[k] + std::sqrt(gm.variances()[k]) * rng.normal();
    }
    return out;
}

TwoModeFit fit_two_modes(const Eigen::VectorXd& grid_x, const Eigen::VectorXd& density) {
    TwoModeFit fit;
    const double h = grid_x[1] - grid_x[0];
    double m0n = 0.0, m1n = 0.0, m0p = 0.0, m1p = 0.0;
    for (Eigen::Index j = 0; j < grid_x.size(); ++j) {
        double w = h;
        if (j == 0 || j + 1 == grid_x.size()) w *= 0.5;
        const double mass = w * density[j];
        if (grid_x[j] < 0.0) {
            m0n += mass;
            m1n += mass * grid_x[j];
        } else {
            m0p += mass;
            m1p += mass * grid_x[j];
        }
    }
    const double total = m0n + m0p;
    fit.weight_neg = m0n / total;
    fit.weight_pos = m0p / total;
    fit.mean_neg = m0n > 0.0 ? m1n / m0n : 0.0;
    fit.mean_pos = m0p > 0.0 ? m1p / m0p : 0.0;
    return fit;
}

TwoModeFit fit_two_modes_samples(const Eigen::VectorXd& samples) {
    TwoModeFit fit;
    double m1n = 0.0, m1p = 0.0;
    int cn = 0, cp = 0;
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
        if (samples[i] < 0.0) {
            ++cn;
            m1n += samples[i];
        } else {
            ++cp;
            m1p += samples[i];
        }
    }
    const double total = static_cast<double>(cn + cp);
    fit.weight_neg = cn / total;
    fit.weight_pos = cp / total;
    fit.mean_neg = cn > 0 ? m1n / cn : 0.0;
    fit.mean_pos = cp > 0 ? m1p / cp : 0.0;
    return fit;
}

}  // namespace sgl

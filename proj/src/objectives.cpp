#include "sgl/objectives.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "sgl/errors.hpp"

namespace sgl {

namespace {

std::function<double(double)> default_lambda(const LinearSde& sde) {
    return [&sde](double t) { return lambda_weight(sde, t, 1); };
}

void check_grid_coverage(const GaussianMixture& gm, const LinearSde& sde, double t,
                         const Grid& grid) {
    const double deficit = 1.0 - perturbed_mixture(gm, sde, t).mass_on(grid.lo, grid.hi);
    if (deficit > 1e-6) {
        std::ostringstream msg;
        msg << "quadrature grid misses " << deficit << " of p_t mass at t = " << t;
        throw NumericalError(msg.str());
    }
}

double draw_perturbed(const GaussianMixture& pt, Rng& rng) {
    const auto& w = pt.weights();
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t k = 0;
    for (; k + 1 < w.size(); ++k) {
        cum += w[k];
        if (u <= cum) break;
    }
    return pt.means()[k] + std::sqrt(pt.variances()[k]) * rng.normal();
}

}  // namespace

Score1d model_score_fn(const ScoreModel& model) {
    if (model.dim() != 1) throw ConfigError("model_score_fn requires a 1D model");
    const ScoreModel* m = &model;
    return [m](double x, double t) {
        Eigen::VectorXd xv(1);
        xv[0] = x;
        return m->value(xv, t)[0];
    };
}

LossReport dsm_empirical(const ScoreModel& model, const LinearSde& sde, const Dataset& data,
                         const Eigen::VectorXd& times, std::uint64_t noise_seed) {
    const Eigen::Index n = data.samples.size();
    if (n == 0 || times.size() != n) {
        throw ConfigError("dsm_empirical needs matching non-empty dataset and time set");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (times[i] < sde.t_min() || times[i] > sde.horizon()) {
            throw ConfigError("dsm_empirical time outside [t_min, T]");
        }
    }
    Eigen::MatrixXd x0(1, n);
    x0.row(0) = data.samples.transpose();
    const DsmBatch batch = make_dsm_batch(sde, x0, times, noise_seed);

    double mean = 0.0, m2 = 0.0;
    Eigen::VectorXd x(1);
    for (Eigen::Index i = 0; i < n; ++i) {
        x[0] = batch.xt(0, i);
        const double resid = model.value(x, times[i])[0] - batch.targets(0, i);
        const double li = batch.lambdas[i] * resid * resid;
        const double delta = li - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (li - mean);
    }
    LossReport rep;
    rep.value = mean;
    rep.stderr_ = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    rep.n_time_samples = static_cast<int>(n);
    rep.n_space_samples = static_cast<int>(n);
    rep.seed = noise_seed;
    return rep;
}

LossReport sm_population(const Score1d& score, const LinearSde& sde, const GaussianMixture& gm,
                         int n_time, const Grid& grid,
                         const std::function<double(double)>& lambda) {
    if (n_time < 1) throw ConfigError("sm_population needs n_time >= 1");
    const auto lam = lambda ? lambda : default_lambda(sde);
    const double t_lo = sde.t_min();
    const double span = sde.horizon() - t_lo;
    const Eigen::VectorXd xs = grid.points();
    const Eigen::VectorXd wq = grid.weights();

    double acc = 0.0;
    for (int j = 0; j < n_time; ++j) {
        const double t = t_lo + (j + 0.5) * span / n_time;
        check_grid_coverage(gm, sde, t, grid);
        const GaussianMixture pt = perturbed_mixture(gm, sde, t);
        const double lt = lam(t);
        double inner = 0.0;
        for (int k = 0; k < grid.n; ++k) {
            const double diff = score(xs[k], t) - pt.score(xs[k]);
            inner += wq[k] * pt.density(xs[k]) * diff * diff;
        }
        acc += lt * inner;
    }
    LossReport rep;
    rep.value = acc / n_time;
    rep.n_time_samples = n_time;
    rep.n_space_samples = grid.n;
    return rep;
}

LossReport sm_monte_carlo(const Score1d& score, const LinearSde& sde, const GaussianMixture& gm,
                          int n_mc, std::uint64_t seed,
                          const std::function<double(double)>& lambda) {
    if (n_mc < 2) throw ConfigError("sm_monte_carlo needs n_mc >= 2");
    const auto lam = lambda ? lambda : default_lambda(sde);
    Rng rng(seed);
    double mean = 0.0, m2 = 0.0;
    for (int i = 0; i < n_mc; ++i) {
        const double t = rng.uniform(sde.t_min(), sde.horizon());
        const GaussianMixture pt = perturbed_mixture(gm, sde, t);
        const double x = draw_perturbed(pt, rng);
        const double diff = score(x, t) - pt.score(x);
        const double li = lam(t) * diff * diff;
        const double delta = li - mean;
        mean += delta / (i + 1);
        m2 += delta * (li - mean);
    }
    LossReport rep;
    rep.value = mean;
    rep.stderr_ = std::sqrt(m2 / (n_mc - 1) / n_mc);
    rep.n_time_samples = n_mc;
    rep.n_space_samples = n_mc;
    rep.seed = seed;
    return rep;
}

double QuadraticForm::loss(const Eigen::MatrixXd& A) const {
    const double m = static_cast<double>(b1.rows());
    const double quad = (A * b1).cwiseProduct(A).sum() / m;
    const double lin = A.cwiseProduct(b2.transpose()).sum();
    return quad - 2.0 / std::sqrt(m) * lin + c0;
}

double QuadraticForm::loss_stderr(const Eigen::MatrixXd& A) const {
    if (batches.size() < 2) return 0.0;
    const double m = static_cast<double>(b1.rows());
    std::vector<double> vals;
    vals.reserve(batches.size());
    for (const auto& b : batches) {
        const double quad = (A * b.b1).cwiseProduct(A).sum() / m;
        const double lin = A.cwiseProduct(b.b2.transpose()).sum();
        vals.push_back(quad - 2.0 / std::sqrt(m) * lin + b.c0);
    }
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= (vals.size() - 1);
    return std::sqrt(var / vals.size());
}

double QuadraticForm::hessian_eig_max() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b1, Eigen::EigenvaluesOnly);
    return 2.0 * es.eigenvalues().maxCoeff();
}

double QuadraticForm::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b1, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

QuadraticForm quadratic_coeffs(const RandomFeatureNet& model, const LinearSde& sde,
                               const GaussianMixture& gm, int n_mc, std::uint64_t seed,
                               int n_batches) {
    if (model.dim() != 1) throw ConfigError("quadratic_coeffs implemented for 1D targets");
    if (n_mc < n_batches * 2) throw ConfigError("quadratic_coeffs needs n_mc >= 2 per batch");
    const int m = model.width();
    Rng rng(seed);

    QuadraticForm qf;
    qf.b1 = Eigen::MatrixXd::Zero(m, m);
    qf.b2 = Eigen::MatrixXd::Zero(m, 1);
    qf.n_mc = n_mc;
    qf.batches.assign(n_batches, {Eigen::MatrixXd::Zero(m, m), Eigen::MatrixXd::Zero(m, 1), 0.0});

    const int per_batch = n_mc / n_batches;
    for (int bi = 0; bi < n_batches; ++bi) {
        const int count = (bi == n_batches - 1) ? n_mc - per_batch * (n_batches - 1) : per_batch;
        Eigen::MatrixXd x(1, count);
        Eigen::VectorXd ts(count), lam(count), strue(count);
        for (int i = 0; i < count; ++i) {
            const double t = rng.uniform(sde.t_min(), sde.horizon());
            const GaussianMixture pt = perturbed_mixture(gm, sde, t);
            const double xv = draw_perturbed(pt, rng);
            ts[i] = t;
            x(0, i) = xv;
            lam[i] = lambda_weight(sde, t, 1);
            strue[i] = pt.score(xv);
        }
        const Eigen::MatrixXd sigma = model.features(x, ts);  // m x count
        // h1 = sqrt(lambda/m) sigma ; accumulate batch means of h1 h1^T etc.
        const Eigen::MatrixXd weighted = sigma * (lam / static_cast<double>(m)).asDiagonal();
        auto& batch = qf.batches[bi];
        batch.b1 = weighted * sigma.transpose() / count;
        batch.b2 = sigma * (lam.cwiseProduct(strue) / std::sqrt(static_cast<double>(m))).matrix() /
                   count;
        batch.c0 = lam.dot(strue.cwiseProduct(strue)) / count;
        const double w = static_cast<double>(count) / n_mc;
        qf.b1 += w * batch.b1;
        qf.b2 += w * batch.b2;
        qf.c0 += w * batch.c0;
    }
    return qf;
}

QuadraticForm quadratic_coeffs_quadrature(const RandomFeatureNet& model, const LinearSde& sde,
                                          const GaussianMixture& gm, int n_time,
                                          const Grid& grid) {
    if (model.dim() != 1) throw ConfigError("quadratic_coeffs implemented for 1D targets");
    const int m = model.width();
    const double t_lo = sde.t_min();
    const double span = sde.horizon() - t_lo;
    const Eigen::VectorXd xs = grid.points();
    const Eigen::VectorXd wq = grid.weights();

    QuadraticForm qf;
    qf.b1 = Eigen::MatrixXd::Zero(m, m);
    qf.b2 = Eigen::MatrixXd::Zero(m, 1);

    Eigen::MatrixXd x(1, grid.n);
    x.row(0) = xs.transpose();
    for (int j = 0; j < n_time; ++j) {
        const double t = t_lo + (j + 0.5) * span / n_time;
        check_grid_coverage(gm, sde, t, grid);
        const GaussianMixture pt = perturbed_mixture(gm, sde, t);
        const double lt = lambda_weight(sde, t, 1);
        Eigen::VectorXd wl(grid.n), strue(grid.n);
        for (int k = 0; k < grid.n; ++k) {
            wl[k] = wq[k] * pt.density(xs[k]) * lt / n_time;
            strue[k] = pt.score(xs[k]);
        }
        const Eigen::MatrixXd sigma =
            model.features(x, Eigen::VectorXd::Constant(grid.n, t));  // m x n
        qf.b1 += sigma * (wl / static_cast<double>(m)).asDiagonal() * sigma.transpose();
        qf.b2 += sigma * (wl.cwiseProduct(strue) / std::sqrt(static_cast<double>(m))).matrix();
        qf.c0 += wl.dot(strue.cwiseProduct(strue));
    }
    return qf;
}

Eigen::MatrixXd optimal_coefficients(const QuadraticForm& qf, int dim, double ridge) {
    const int m = static_cast<int>(qf.b1.rows());
    Eigen::MatrixXd reg = qf.b1;
    reg.diagonal().array() += ridge;
    // Stationarity (2/m) A B1 = (2/sqrt(m)) B2^T  =>  A = sqrt(m) B2^T B1^{-1}.
    const Eigen::MatrixXd solved = reg.ldlt().solve(qf.b2);  // m x d
    (void)dim;
    return std::sqrt(static_cast<double>(m)) * solved.transpose();
}

}  // namespace sgl

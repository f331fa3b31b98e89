#include "sgl/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sgl/density.hpp"

namespace sgl {

namespace {

// Internal stream labels hashed into the noise seed.
constexpr std::uint64_t kTrainStream = 0x7261696E;
constexpr std::uint64_t kEvalStream = 0x6576616C;
constexpr std::uint64_t kShuffleStream = 0x73687566;

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;

    void init(Eigen::Index n) {
        m = Eigen::VectorXd::Zero(n);
        v = Eigen::VectorXd::Zero(n);
        step = 0;
    }

    void apply(Eigen::VectorXd& params, const Eigen::VectorXd& grad, const TrainConfig& cfg) {
        ++step;
        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
        v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * grad.cwiseProduct(grad);
        const double bc1 = 1.0 - std::pow(cfg.adam_beta1, step);
        const double bc2 = 1.0 - std::pow(cfg.adam_beta2, step);
        params -= cfg.learning_rate *
                  (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + cfg.adam_eps).matrix());
    }
};

double density_grid_kl(const Eigen::VectorXd& svals, const Grid& grid, const DensityGrid& target) {
    return kl_quadrature(target, density_from_values(svals, grid));
}

}  // namespace

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (n < 1) throw ConfigError("n must be >= 1");
    if (batch_size < 0) throw ConfigError("batch_size must be >= 0");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
}

std::vector<double> TrainTrajectory::kl_series() const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.kl);
    return out;
}

double model_kl(const ScoreModel& model, const LinearSde& sde, const GaussianMixture& gm,
                const Grid& grid) {
    const Eigen::VectorXd svals = model.values_1d(grid.points(), sde.t_min());
    if (!svals.allFinite()) throw NumericalError("non-finite model score on grid");
    return density_grid_kl(svals, grid, density_on_grid(gm, grid));
}

TrainTrajectory train(ScoreModel& model, const LinearSde& sde, const Dataset& data,
                      const TrainConfig& config, const GaussianMixture& gm_eval,
                      const EvalHook& on_eval) {
    config.validate();
    if (data.samples.size() != config.n) {
        throw ConfigError("dataset size does not match config.n");
    }
    const int n = config.n;
    const double t_lo = sde.t_min();
    const double T = sde.horizon();

    // Fixed pairs: the frozen empirical objective, and the deterministic
    // evaluation set used for the dsm_loss column in fresh mode.
    Rng train_rng(derive_stream(config.seeds.noise, kTrainStream));
    Eigen::VectorXd t_fix(n);
    Eigen::VectorXd z_fix(n);
    for (int i = 0; i < n; ++i) {
        t_fix[i] = train_rng.uniform(t_lo, T);
        z_fix[i] = train_rng.normal();
    }

    auto assemble = [&](const std::vector<int>& idx, const Eigen::VectorXd& ts,
                        const Eigen::VectorXd& zs) {
        DsmBatch b;
        const int B = static_cast<int>(idx.size());
        b.xt.resize(1, B);
        b.targets.resize(1, B);
        b.ts.resize(B);
        b.lambdas.resize(B);
        for (int k = 0; k < B; ++k) {
            const double t = ts[k];
            const double rt = sde.r(t);
            const double scale = sde.rv(t);
            b.ts[k] = t;
            b.xt(0, k) = rt * data.samples[idx[k]] + scale * zs[k];
            b.targets(0, k) = -zs[k] / scale;
            b.lambdas[k] = lambda_weight(sde, t, 1);
        }
        return b;
    };

    std::vector<int> all_idx(n);
    std::iota(all_idx.begin(), all_idx.end(), 0);
    Eigen::VectorXd tf_all(n), zf_all(n);
    for (int i = 0; i < n; ++i) {
        tf_all[i] = t_fix[i];
        zf_all[i] = z_fix[i];
    }
    const DsmBatch eval_batch = assemble(all_idx, tf_all, zf_all);

    const Grid grid = gm_eval.standard_grid(config.grid_points);
    const DensityGrid target = density_on_grid(gm_eval, grid);
    const Eigen::VectorXd grid_x = grid.points();

    // Strided sub-grid for the in-training SM evaluation.
    const int stride = std::max(1, config.sm_eval_grid_stride);
    const int nsub = (grid.n + stride - 1) / stride;
    Grid sub_grid{grid.lo, grid.lo + grid.spacing() * stride * (nsub - 1), nsub};
    const Eigen::VectorXd sub_x = sub_grid.points();
    const Eigen::VectorXd sub_w = sub_grid.weights();

    auto eval_sm = [&](const ScoreModel& mdl) {
        if (config.sm_eval_tpoints < 1) return 0.0;
        double acc = 0.0;
        for (int j = 0; j < config.sm_eval_tpoints; ++j) {
            const double t = t_lo + (j + 0.5) * (T - t_lo) / config.sm_eval_tpoints;
            const GaussianMixture pt = perturbed_mixture(gm_eval, sde, t);
            const Eigen::VectorXd sv = mdl.values_1d(sub_x, t);
            double inner = 0.0;
            for (int k = 0; k < sub_grid.n; ++k) {
                const double diff = sv[k] - pt.score(sub_x[k]);
                inner += sub_w[k] * pt.density(sub_x[k]) * diff * diff;
            }
            acc += lambda_weight(sde, t, 1) * inner;
        }
        return acc / config.sm_eval_tpoints;
    };

    TrainTrajectory traj;
    traj.config = config;
    bool stop_requested = false;

    auto record = [&](int epoch) {
        TrainRecord rec;
        rec.epoch = epoch;
        rec.tau = epoch * config.learning_rate;
        rec.dsm_loss =
            model.batch_loss(eval_batch.xt, eval_batch.ts, eval_batch.targets, eval_batch.lambdas);
        rec.sm_loss = eval_sm(model);
        if (config.kl_eval) {
            const Eigen::VectorXd svals = model.values_1d(grid_x, t_lo);
            if (!svals.allFinite()) {
                throw DivergenceError("non-finite score during KL evaluation", traj.records);
            }
            rec.kl = density_grid_kl(svals, grid, target);
        }
        rec.rkhs_norm = model.norm_summary();
        if (!std::isfinite(rec.dsm_loss) || !std::isfinite(rec.sm_loss) ||
            !std::isfinite(rec.kl) || !std::isfinite(rec.rkhs_norm)) {
            std::ostringstream msg;
            msg << "training diverged at epoch " << epoch;
            throw DivergenceError(msg.str(), traj.records);
        }
        traj.records.push_back(rec);
        if (on_eval) on_eval(epoch, model);
        if (config.stop_kl_threshold > 0.0 && config.kl_eval && epoch >= config.stop_min_epoch &&
            rec.kl <= config.stop_kl_threshold) {
            stop_requested = true;
        }
    };

    const int B = config.batch_size == 0 ? n : std::min(config.batch_size, n);
    AdamState adam;
    if (config.optimizer == Optimizer::Adam) adam.init(model.param_count());
    Rng shuffle_rng(derive_stream(config.seeds.noise, kShuffleStream));
    Rng fresh_rng(derive_stream(config.seeds.noise, kEvalStream ^ kTrainStream));
    std::vector<int> order(all_idx);

    for (int epoch = 0; epoch <= config.epochs; ++epoch) {
        if (epoch % config.eval_every == 0 || epoch == config.epochs) record(epoch);
        if (epoch == config.epochs || stop_requested) break;

        if (config.optimizer == Optimizer::GradientFlowEuler) {
            // Full-batch Euler step of the gradient flow on the frozen
            // objective, in the normalized-parameter metric.
            const Eigen::VectorXd g = model.batch_gradient(eval_batch.xt, eval_batch.ts,
                                                           eval_batch.targets, eval_batch.lambdas);
            Eigen::VectorXd p = model.params();
            p -= config.learning_rate * model.step_scale() * g;
            model.set_params(p);
            continue;
        }

        // Minibatch pass. Gradients are partial sums of the 1/n-normalized
        // empirical loss, so one epoch advances tau by the learning rate.
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
            std::swap(order[i], order[shuffle_rng.below(i + 1)]);
        }
        for (int start = 0; start < n; start += B) {
            const int count = std::min(B, n - start);
            std::vector<int> idx(order.begin() + start, order.begin() + start + count);
            Eigen::VectorXd ts(count), zs(count);
            if (config.noise_mode == NoiseMode::Frozen) {
                for (int k = 0; k < count; ++k) {
                    ts[k] = t_fix[idx[k]];
                    zs[k] = z_fix[idx[k]];
                }
            } else {
                for (int k = 0; k < count; ++k) {
                    ts[k] = fresh_rng.uniform(t_lo, T);
                    zs[k] = fresh_rng.normal();
                }
            }
            const DsmBatch batch = assemble(idx, ts, zs);
            Eigen::VectorXd g =
                model.batch_gradient(batch.xt, batch.ts, batch.targets, batch.lambdas);
            g *= static_cast<double>(count) / n;
            if (config.optimizer == Optimizer::Sgd) {
                Eigen::VectorXd p = model.params();
                p -= config.learning_rate * model.step_scale() * g;
                model.set_params(p);
            } else {
                Eigen::VectorXd p = model.params();
                adam.apply(p, g, config);
                model.set_params(p);
            }
        }
    }

    traj.final_model = model.clone();
    return traj;
}

std::vector<double> smooth_series(const std::vector<double>& series, int window) {
    const int half = std::max(0, window / 2);
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::size_t lo = i >= static_cast<std::size_t>(half) ? i - half : 0;
        const std::size_t hi = std::min(series.size(), i + half + 1);
        double acc = 0.0;
        for (std::size_t j = lo; j < hi; ++j) acc += series[j];
        out[i] = acc / static_cast<double>(hi - lo);
    }
    return out;
}

EarlyStopResult early_stop_detect(const std::vector<double>& kl_series, int smoothing_window,
                                  int patience) {
    if (static_cast<int>(kl_series.size()) <= smoothing_window + patience) {
        throw ConfigError("early_stop_detect needs series length > window + patience");
    }
    const std::vector<double> sm = smooth_series(kl_series, smoothing_window);
    EarlyStopResult res;
    double best = sm[0];
    for (std::size_t i = 1; i < sm.size(); ++i) {
        if (sm[i] < best) {
            best = sm[i];
            res.min_index = static_cast<int>(i);
        }
    }
    const double threshold = best * 1.10;
    int run = 0;
    for (std::size_t i = res.min_index + 1; i < sm.size(); ++i) {
        if (sm[i] > threshold) {
            ++run;
            if (run >= patience) {
                res.rise_index = static_cast<int>(i) - patience + 1;
                res.turning_point = true;
                break;
            }
        } else {
            run = 0;
        }
    }
    return res;
}

std::vector<QuadraticFlowPoint> quadratic_flow_trace(const QuadraticForm& qf, int dim,
                                                     const std::vector<double>& taus,
                                                     double lr_fraction) {
    if (dim != 1) throw ConfigError("quadratic_flow_trace implemented for 1D outputs");
    const int m = static_cast<int>(qf.b1.rows());
    const double L = qf.hessian_eig_max();
    const double lr = lr_fraction / L;
    const Eigen::MatrixXd a_star = optimal_coefficients(qf, dim);
    const double loss_star = qf.loss(a_star);

    // theta = vec(A)/sqrt(m); grad_theta = 2 (B1 theta - b2/...): in these
    // coordinates L(theta) = theta^T B1 theta - 2 b2^T theta + c0.
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(m);
    const Eigen::VectorXd b = qf.b2.col(0);
    std::vector<QuadraticFlowPoint> out;
    double tau = 0.0;
    std::size_t next = 0;
    const double tau_max = taus.empty() ? 0.0 : taus.back();
    while (next < taus.size()) {
        if (tau >= taus[next] - 1e-9) {
            Eigen::MatrixXd A(1, m);
            A.row(0) = std::sqrt(static_cast<double>(m)) * theta.transpose();
            QuadraticFlowPoint pt;
            pt.tau = taus[next];
            pt.gap = std::max(qf.loss(A) - loss_star, 0.0);
            pt.rkhs_norm = theta.norm();
            out.push_back(pt);
            ++next;
            continue;
        }
        theta -= lr * 2.0 * (qf.b1 * theta - b);
        tau += lr;
        if (tau > tau_max + 10.0 * lr && next < taus.size()) break;
    }
    return out;
}

double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw ConfigError("slope fit needs >= 2 points");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double lx = std::log(std::max(xs[i], 1e-300));
        const double ly = std::log(std::max(ys[i], 1e-300));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace sgl

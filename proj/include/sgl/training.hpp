#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "sgl/errors.hpp"
#include "sgl/mixture.hpp"
#include "sgl/objectives.hpp"
#include "sgl/score_model.hpp"
#include "sgl/sde.hpp"

namespace sgl {

enum class Optimizer { GradientFlowEuler, Sgd, Adam };

// Frozen: the literal empirical objective of the gradient-flow dynamics — one
// fixed (t_i, z_i) per data point, drawn once from the noise seed.
// Fresh: transition times and draws resampled every step (the practical DSM
// estimator of the same population loss).
enum class NoiseMode { Frozen, Fresh };

struct TrainSeeds {
    std::uint64_t data = 1;
    std::uint64_t noise = 2;
    std::uint64_t init = 3;
};

struct TrainConfig {
    Optimizer optimizer = Optimizer::Sgd;
    double learning_rate = 0.5;
    int epochs = 1000;
    int batch_size = 128;  // 0 = full batch
    int n = 1000;
    int eval_every = 10;
    TrainSeeds seeds;
    bool kl_eval = true;
    NoiseMode noise_mode = NoiseMode::Fresh;
    // SM-loss evaluation cost knobs (0 time points disables it).
    int sm_eval_tpoints = 8;
    int sm_eval_grid_stride = 4;
    int grid_points = 4096;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    // Optional graceful stop: once kl <= threshold has been observed and the
    // epoch is past stop_min_epoch, training ends at the next evaluation
    // (0 disables). Used by the capacity sweep's time-to-criterion runs.
    double stop_kl_threshold = 0.0;
    int stop_min_epoch = 0;

    void validate() const;
};

struct TrainRecord {
    int epoch = 0;
    double tau = 0.0;
    double dsm_loss = 0.0;
    double sm_loss = 0.0;
    double kl = 0.0;
    double rkhs_norm = 0.0;
};

struct TrainTrajectory {
    std::vector<TrainRecord> records;
    std::unique_ptr<ScoreModel> final_model;
    TrainConfig config;

    std::vector<double> kl_series() const;
};

struct DivergenceError : NumericalError {
    DivergenceError(const std::string& what, std::vector<TrainRecord> recs)
        : NumericalError(what), partial(std::move(recs)) {}
    std::vector<TrainRecord> partial;
};

// Runs the chosen optimizer; deterministic per seeds. The model is trained in
// place and also returned inside the trajectory. on_eval, when set, fires at
// every recorded evaluation with the current model.
using EvalHook = std::function<void(int, const ScoreModel&)>;

TrainTrajectory train(ScoreModel& model, const LinearSde& sde, const Dataset& data,
                      const TrainConfig& config, const GaussianMixture& gm_eval,
                      const EvalHook& on_eval = {});

// Fast model KL against the target: density from the batched model score at
// t_min, then trapezoid KL.
double model_kl(const ScoreModel& model, const LinearSde& sde, const GaussianMixture& gm,
                const Grid& grid);

// Centered moving average with total window width `window` (clamped at the
// edges; window 1 is the identity).
std::vector<double> smooth_series(const std::vector<double>& series, int window);

struct EarlyStopResult {
    int min_index = 0;
    bool turning_point = false;
    // First index where the smoothed series has exceeded min * 1.1 for
    // `patience` consecutive evaluations (-1 when absent).
    int rise_index = -1;
};

EarlyStopResult early_stop_detect(const std::vector<double>& kl_series, int smoothing_window,
                                  int patience);

// Gradient-descent trace of the quadratic SM objective in the normalized
// parameter metric, recording the optimality gap and the RKHS norm at the
// requested tau checkpoints. Used by the rate/growth verifications.
struct QuadraticFlowPoint {
    double tau = 0.0;
    double gap = 0.0;
    double rkhs_norm = 0.0;
};

std::vector<QuadraticFlowPoint> quadratic_flow_trace(const QuadraticForm& qf, int dim,
                                                     const std::vector<double>& taus,
                                                     double lr_fraction = 0.8);

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace sgl

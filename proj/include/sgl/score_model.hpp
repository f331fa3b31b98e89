#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>

#include "sgl/density.hpp"
#include "sgl/rng.hpp"
#include "sgl/sde.hpp"

namespace sgl {

// Bounded smooth embedding (t/T, sin 2pi t/T, cos 2pi t/T, sin 4pi t/T, ...)
// truncated to d_e entries; every component stays in [-1, 1].
struct TimeEmbedding {
    int d_e = 4;
    double horizon = 1.0;

    Eigen::VectorXd operator()(double t) const;
};

// Trainable time-dependent score network interface. Parameters are exposed as
// one flat vector so optimizers and finite-difference oracles stay generic.
class ScoreModel {
  public:
    virtual ~ScoreModel() = default;

    virtual std::string kind() const = 0;
    virtual int dim() const = 0;
    virtual std::unique_ptr<ScoreModel> clone() const = 0;

    virtual Eigen::VectorXd value(const Eigen::VectorXd& x, double t) const = 0;
    // d x d spatial Jacobian ds/dx.
    virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, double t) const = 0;

    virtual Eigen::VectorXd params() const = 0;
    virtual void set_params(const Eigen::VectorXd& p) = 0;
    virtual int param_count() const = 0;

    // (1/B) sum_i lam_i || s(x_i, t_i) - y_i ||^2 and its exact gradient with
    // respect to the flat parameters. Columns of xt/targets index the batch.
    virtual double batch_loss(const Eigen::MatrixXd& xt, const Eigen::VectorXd& ts,
                              const Eigen::MatrixXd& targets,
                              const Eigen::VectorXd& lambdas) const = 0;
    virtual Eigen::VectorXd batch_gradient(const Eigen::MatrixXd& xt, const Eigen::VectorXd& ts,
                                           const Eigen::MatrixXd& targets,
                                           const Eigen::VectorXd& lambdas) const = 0;

    // Multiplier applied to gradient steps so training follows the paper's
    // normalized-parameter flow (m for random features, 1 otherwise).
    virtual double step_scale() const { return 1.0; }

    // rkhs_norm for random features; the output-layer analogue for the MLP.
    virtual double norm_summary() const = 0;

    // Batched 1D evaluation at a fixed time (grid scans).
    virtual Eigen::VectorXd values_1d(const Eigen::VectorXd& xs, double t) const;
};

ScoreField1d to_field1d(const ScoreModel& model);

// Eq.-(12) random feature model s(x, t) = (1/m) A ReLU(W x + U e(t)) with
// frozen rows normalized to ||w_i||_1 + ||u_i||_1 = 1 and trainable A.
class RandomFeatureNet final : public ScoreModel {
  public:
    static RandomFeatureNet init(int d, int m, int d_e, double horizon, std::uint64_t seed);
    static RandomFeatureNet from_matrices(Eigen::MatrixXd A, Eigen::MatrixXd W, Eigen::MatrixXd U,
                                          double horizon);

    std::string kind() const override { return "rf"; }
    int dim() const override { return static_cast<int>(A_.rows()); }
    std::unique_ptr<ScoreModel> clone() const override {
        return std::make_unique<RandomFeatureNet>(*this);
    }

    int width() const { return static_cast<int>(W_.rows()); }
    const Eigen::MatrixXd& coefficients() const { return A_; }
    void set_coefficients(const Eigen::MatrixXd& A);
    const Eigen::MatrixXd& frozen_w() const { return W_; }
    const Eigen::MatrixXd& frozen_u() const { return U_; }
    const TimeEmbedding& embedding() const { return emb_; }
    std::uint64_t init_seed() const { return init_seed_; }

    // ReLU(W x + U e(t)) for a batch of columns with per-column times.
    Eigen::MatrixXd features(const Eigen::MatrixXd& x, const Eigen::VectorXd& ts) const;

    Eigen::VectorXd value(const Eigen::VectorXd& x, double t) const override;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, double t) const override;
    Eigen::VectorXd values_1d(const Eigen::VectorXd& xs, double t) const override;

    Eigen::VectorXd params() const override;
    void set_params(const Eigen::VectorXd& p) override;
    int param_count() const override { return static_cast<int>(A_.size()); }

    double batch_loss(const Eigen::MatrixXd& xt, const Eigen::VectorXd& ts,
                      const Eigen::MatrixXd& targets,
                      const Eigen::VectorXd& lambdas) const override;
    Eigen::VectorXd batch_gradient(const Eigen::MatrixXd& xt, const Eigen::VectorXd& ts,
                                   const Eigen::MatrixXd& targets,
                                   const Eigen::VectorXd& lambdas) const override;

    double step_scale() const override { return static_cast<double>(width()); }
    double norm_summary() const override { return rkhs_norm(); }
    // sqrt(||A||_F^2 / m), the discrete RKHS norm.
    double rkhs_norm() const;

  private:
    Eigen::MatrixXd A_;  // d x m, trainable
    Eigen::MatrixXd W_;  // m x d, frozen
    Eigen::MatrixXd U_;  // m x d_e, frozen
    TimeEmbedding emb_;
    std::uint64_t init_seed_ = 0;
};

// One-hidden-layer Swish network over (x, e(t)); all parameters trainable.
class SwishMlp final : public ScoreModel {
  public:
    static SwishMlp init(int d, int hidden, int d_e, double horizon, std::uint64_t seed);

    std::string kind() const override { return "swish"; }
    int dim() const override { return static_cast<int>(w2_.rows()); }
    std::unique_ptr<ScoreModel> clone() const override {
        return std::make_unique<SwishMlp>(*this);
    }

    int hidden() const { return static_cast<int>(w1_.rows()); }
    const TimeEmbedding& embedding() const { return emb_; }
    std::uint64_t init_seed() const { return init_seed_; }

    Eigen::VectorXd value(const Eigen::VectorXd& x, double t) const override;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, double t) const override;
    Eigen::VectorXd values_1d(const Eigen::VectorXd& xs, double t) const override;

    Eigen::VectorXd params() const override;
    void set_params(const Eigen::VectorXd& p) override;
    int param_count() const override;

    double batch_loss(const Eigen::MatrixXd& xt, const Eigen::VectorXd& ts,
                      const Eigen::MatrixXd& targets,
                      const Eigen::VectorXd& lambdas) const override;
    Eigen::VectorXd batch_gradient(const Eigen::MatrixXd& xt, const Eigen::VectorXd& ts,
                                   const Eigen::MatrixXd& targets,
                                   const Eigen::VectorXd& lambdas) const override;

    double norm_summary() const override {
        return w2_.norm() / std::sqrt(static_cast<double>(hidden()));
    }

  private:
    Eigen::MatrixXd assemble_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& ts) const;

    Eigen::MatrixXd w1_;  // h x (d + d_e)
    Eigen::VectorXd b1_;  // h
    Eigen::MatrixXd w2_;  // d x h
    Eigen::VectorXd b2_;  // d
    TimeEmbedding emb_;
    std::uint64_t init_seed_ = 0;
};

// DSM batch assembly: one fresh transition draw per (x0, t) pair, drawn from
// the explicit noise seed so finite-difference oracles can freeze the
// objective.
struct DsmBatch {
    Eigen::MatrixXd xt;       // d x B
    Eigen::VectorXd ts;       // B
    Eigen::MatrixXd targets;  // d x B
    Eigen::VectorXd lambdas;  // B
};

DsmBatch make_dsm_batch(const LinearSde& sde, const Eigen::MatrixXd& x0, const Eigen::VectorXd& ts,
                        std::uint64_t noise_seed);

// Exact gradient of the empirical DSM objective over the batch.
Eigen::VectorXd grad_dsm(const ScoreModel& model, const LinearSde& sde, const Eigen::MatrixXd& x0,
                         const Eigen::VectorXd& ts, std::uint64_t noise_seed);

// Flat-binary checkpoint with a JSON sidecar describing shapes; round trips
// are bit-exact.
void save_checkpoint(const ScoreModel& model, const std::string& path);
std::unique_ptr<ScoreModel> load_checkpoint(const std::string& path);

}  // namespace sgl

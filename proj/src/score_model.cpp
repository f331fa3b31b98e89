#include "sgl/score_model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "sgl/errors.hpp"

namespace sgl {

namespace {

constexpr double kTwoPi = 6.283185307179586477;

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double swish(double z) { return z * sigmoid(z); }

inline double swish_grad(double z) {
    const double s = sigmoid(z);
    return s * (1.0 + z * (1.0 - s));
}

}  // namespace

Eigen::VectorXd TimeEmbedding::operator()(double t) const {
    Eigen::VectorXd e(d_e);
    const double u = t / horizon;
    for (int i = 0; i < d_e; ++i) {
        if (i == 0) {
            e[i] = u;
        } else {
            const int harmonic = (i + 1) / 2;
            const double phase = kTwoPi * harmonic * u;
            e[i] = (i % 2 == 1) ? std::sin(phase) : std::cos(phase);
        }
    }
    return e;
}

Eigen::VectorXd ScoreModel::values_1d(const Eigen::VectorXd& xs, double t) const {
    Eigen::VectorXd out(xs.size());
    Eigen::VectorXd x(1);
    for (Eigen::Index j = 0; j < xs.size(); ++j) {
        x[0] = xs[j];
        out[j] = value(x, t)[0];
    }
    return out;
}

ScoreField1d to_field1d(const ScoreModel& model) {
    if (model.dim() != 1) throw ConfigError("1D score field requires a 1D model");
    ScoreField1d field;
    const ScoreModel* m = &model;
    field.value = [m](double x, double t) {
        Eigen::VectorXd xv(1);
        xv[0] = x;
        return m->value(xv, t)[0];
    };
    field.dx = [m](double x, double t) {
        Eigen::VectorXd xv(1);
        xv[0] = x;
        return m->jacobian(xv, t)(0, 0);
    };
    return field;
}

// ---------------------------------------------------------------------------
// RandomFeatureNet

RandomFeatureNet RandomFeatureNet::init(int d, int m, int d_e, double horizon,
                                        std::uint64_t seed) {
    if (m < 1 || d < 1 || d_e < 1) throw ConfigError("random feature dims must be positive");
    Rng rng(seed);
    Eigen::MatrixXd W(m, d), U(m, d_e);
    for (int i = 0; i < m; ++i) {
        double l1 = 0.0;
        for (int j = 0; j < d; ++j) {
            W(i, j) = rng.normal();
            l1 += std::abs(W(i, j));
        }
        for (int j = 0; j < d_e; ++j) {
            U(i, j) = rng.normal();
            l1 += std::abs(U(i, j));
        }
        // ReLU positive homogeneity: rescale each frozen row onto the l1
        // sphere ||w||_1 + ||u||_1 = 1.
        W.row(i) /= l1;
        U.row(i) /= l1;
    }
    RandomFeatureNet net;
    net.A_ = Eigen::MatrixXd::Zero(d, m);
    net.W_ = std::move(W);
    net.U_ = std::move(U);
    net.emb_ = TimeEmbedding{d_e, horizon};
    net.init_seed_ = seed;
    return net;
}

RandomFeatureNet RandomFeatureNet::from_matrices(Eigen::MatrixXd A, Eigen::MatrixXd W,
                                                 Eigen::MatrixXd U, double horizon) {
    if (A.cols() != W.rows() || W.rows() != U.rows() || A.rows() != W.cols()) {
        throw ConfigError("inconsistent random-feature matrix shapes");
    }
    RandomFeatureNet net;
    net.A_ = std::move(A);
    net.W_ = std::move(W);
    net.U_ = std::move(U);
    net.emb_ = TimeEmbedding{static_cast<int>(net.U_.cols()), horizon};
    return net;
}

void RandomFeatureNet::set_coefficients(const Eigen::MatrixXd& A) {
    if (A.rows() != A_.rows() || A.cols() != A_.cols()) {
        throw ConfigError("coefficient shape mismatch");
    }
    A_ = A;
}

Eigen::MatrixXd RandomFeatureNet::features(const Eigen::MatrixXd& x,
                                           const Eigen::VectorXd& ts) const {
    Eigen::MatrixXd pre = W_ * x;  // m x B
    for (Eigen::Index b = 0; b < ts.size(); ++b) pre.col(b) += U_ * emb_(ts[b]);
    return pre.cwiseMax(0.0);
}

Eigen::VectorXd RandomFeatureNet::value(const Eigen::VectorXd& x, double t) const {
    const Eigen::VectorXd sigma = (W_ * x + U_ * emb_(t)).cwiseMax(0.0);
    return A_ * sigma / static_cast<double>(width());
}

Eigen::MatrixXd RandomFeatureNet::jacobian(const Eigen::VectorXd& x, double t) const {
    const Eigen::VectorXd pre = W_ * x + U_ * emb_(t);
    // Subgradient at 0 taken as 0.
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim(), dim());
    for (int i = 0; i < width(); ++i) {
        if (pre[i] > 0.0) jac += A_.col(i) * W_.row(i);
    }
    return jac / static_cast<double>(width());
}

Eigen::VectorXd RandomFeatureNet::values_1d(const Eigen::VectorXd& xs, double t) const {
    if (dim() != 1) return ScoreModel::values_1d(xs, t);
    const Eigen::VectorXd bias = U_ * emb_(t);
    Eigen::MatrixXd pre = W_.col(0) * xs.transpose();  // m x N
    pre.colwise() += bias;
    return (A_.row(0) * pre.cwiseMax(0.0)).transpose() / static_cast<double>(width());
}

Eigen::VectorXd RandomFeatureNet::params() const {
    return Eigen::Map<const Eigen::VectorXd>(A_.data(), A_.size());
}

void RandomFeatureNet::set_params(const Eigen::VectorXd& p) {
    if (p.size() != A_.size()) throw ConfigError("parameter size mismatch");
    A_ = Eigen::Map<const Eigen::MatrixXd>(p.data(), A_.rows(), A_.cols());
}

double RandomFeatureNet::batch_loss(const Eigen::MatrixXd& xt, const Eigen::VectorXd& ts,
                                    const Eigen::MatrixXd& targets,
                                    const Eigen::VectorXd& lambdas) const {
    const Eigen::MatrixXd sigma = features(xt, ts);
    const Eigen::MatrixXd resid = A_ * sigma / static_cast<double>(width()) - targets;
    double acc = 0.0;
    for (Eigen::Index b = 0; b < ts.size(); ++b) acc += lambdas[b] * resid.col(b).squaredNorm();
    return acc / static_cast<double>(ts.size());
}

Eigen::VectorXd RandomFeatureNet::batch_gradient(const Eigen::MatrixXd& xt,
                                                 const Eigen::VectorXd& ts,
                                                 const Eigen::MatrixXd& targets,
                                                 const Eigen::VectorXd& lambdas) const {
    const double m = static_cast<double>(width());
    const double B = static_cast<double>(ts.size());
    const Eigen::MatrixXd sigma = features(xt, ts);
    Eigen::MatrixXd resid = A_ * sigma / m - targets;  // d x B
    resid = resid * lambdas.asDiagonal();
    const Eigen::MatrixXd grad = (2.0 / (B * m)) * resid * sigma.transpose();  // d x m
    return Eigen::Map<const Eigen::VectorXd>(grad.data(), grad.size());
}

double RandomFeatureNet::rkhs_norm() const {
    return A_.norm() / std::sqrt(static_cast<double>(width()));
}

// ---------------------------------------------------------------------------
// SwishMlp

SwishMlp SwishMlp::init(int d, int hidden, int d_e, double horizon, std::uint64_t seed) {
    if (hidden < 1 || d < 1 || d_e < 1) throw ConfigError("swish dims must be positive");
    Rng rng(seed);
    SwishMlp net;
    const int in = d + d_e;
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    net.w1_ = Eigen::MatrixXd(hidden, in);
    net.b1_ = Eigen::VectorXd(hidden);
    net.w2_ = Eigen::MatrixXd(d, hidden);
    net.b2_ = Eigen::VectorXd(d);
    for (int i = 0; i < hidden; ++i)
        for (int j = 0; j < in; ++j) net.w1_(i, j) = rng.uniform(-s1, s1);
    for (int i = 0; i < hidden; ++i) net.b1_[i] = rng.uniform(-s1, s1);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < hidden; ++j) net.w2_(i, j) = rng.uniform(-s2, s2);
    for (int i = 0; i < d; ++i) net.b2_[i] = rng.uniform(-s2, s2);
    net.emb_ = TimeEmbedding{d_e, horizon};
    net.init_seed_ = seed;
    return net;
}

Eigen::MatrixXd SwishMlp::assemble_inputs(const Eigen::MatrixXd& x,
                                          const Eigen::VectorXd& ts) const {
    Eigen::MatrixXd in(x.rows() + emb_.d_e, x.cols());
    in.topRows(x.rows()) = x;
    for (Eigen::Index b = 0; b < ts.size(); ++b) in.col(b).tail(emb_.d_e) = emb_(ts[b]);
    return in;
}

Eigen::VectorXd SwishMlp::value(const Eigen::VectorXd& x, double t) const {
    Eigen::VectorXd in(x.size() + emb_.d_e);
    in.head(x.size()) = x;
    in.tail(emb_.d_e) = emb_(t);
    Eigen::VectorXd z = w1_ * in + b1_;
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = swish(z[i]);
    return w2_ * z + b2_;
}

Eigen::MatrixXd SwishMlp::jacobian(const Eigen::VectorXd& x, double t) const {
    Eigen::VectorXd in(x.size() + emb_.d_e);
    in.head(x.size()) = x;
    in.tail(emb_.d_e) = emb_(t);
    const Eigen::VectorXd z = w1_ * in + b1_;
    Eigen::VectorXd dz(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) dz[i] = swish_grad(z[i]);
    return w2_ * dz.asDiagonal() * w1_.leftCols(x.size());
}

Eigen::VectorXd SwishMlp::values_1d(const Eigen::VectorXd& xs, double t) const {
    if (dim() != 1) return ScoreModel::values_1d(xs, t);
    Eigen::MatrixXd in(1 + emb_.d_e, xs.size());
    in.row(0) = xs.transpose();
    const Eigen::VectorXd e = emb_(t);
    for (Eigen::Index b = 0; b < xs.size(); ++b) in.col(b).tail(emb_.d_e) = e;
    Eigen::MatrixXd z = (w1_ * in).colwise() + b1_;
    for (Eigen::Index j = 0; j < z.size(); ++j) z.data()[j] = swish(z.data()[j]);
    return ((w2_ * z).colwise() + b2_).row(0).transpose();
}

Eigen::VectorXd SwishMlp::params() const {
    Eigen::VectorXd p(param_count());
    Eigen::Index at = 0;
    p.segment(at, w1_.size()) = Eigen::Map<const Eigen::VectorXd>(w1_.data(), w1_.size());
    at += w1_.size();
    p.segment(at, b1_.size()) = b1_;
    at += b1_.size();
    p.segment(at, w2_.size()) = Eigen::Map<const Eigen::VectorXd>(w2_.data(), w2_.size());
    at += w2_.size();
    p.segment(at, b2_.size()) = b2_;
    return p;
}

void SwishMlp::set_params(const Eigen::VectorXd& p) {
    if (p.size() != param_count()) throw ConfigError("parameter size mismatch");
    Eigen::Index at = 0;
    w1_ = Eigen::Map<const Eigen::MatrixXd>(p.data() + at, w1_.rows(), w1_.cols());
    at += w1_.size();
    b1_ = p.segment(at, b1_.size());
    at += b1_.size();
    w2_ = Eigen::Map<const Eigen::MatrixXd>(p.data() + at, w2_.rows(), w2_.cols());
    at += w2_.size();
    b2_ = p.segment(at, b2_.size());
}

int SwishMlp::param_count() const {
    return static_cast<int>(w1_.size() + b1_.size() + w2_.size() + b2_.size());
}

double SwishMlp::batch_loss(const Eigen::MatrixXd& xt, const Eigen::VectorXd& ts,
                            const Eigen::MatrixXd& targets,
                            const Eigen::VectorXd& lambdas) const {
    const Eigen::MatrixXd in = assemble_inputs(xt, ts);
    Eigen::MatrixXd z = (w1_ * in).colwise() + b1_;
    for (Eigen::Index j = 0; j < z.size(); ++j) z.data()[j] = swish(z.data()[j]);
    const Eigen::MatrixXd resid = ((w2_ * z).colwise() + b2_) - targets;
    double acc = 0.0;
    for (Eigen::Index b = 0; b < ts.size(); ++b) acc += lambdas[b] * resid.col(b).squaredNorm();
    return acc / static_cast<double>(ts.size());
}

Eigen::VectorXd SwishMlp::batch_gradient(const Eigen::MatrixXd& xt, const Eigen::VectorXd& ts,
                                         const Eigen::MatrixXd& targets,
                                         const Eigen::VectorXd& lambdas) const {
    const double B = static_cast<double>(ts.size());
    const Eigen::MatrixXd in = assemble_inputs(xt, ts);
    const Eigen::MatrixXd z = (w1_ * in).colwise() + b1_;
    Eigen::MatrixXd h = z;
    Eigen::MatrixXd dh = z;
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        h.data()[j] = swish(z.data()[j]);
        dh.data()[j] = swish_grad(z.data()[j]);
    }
    Eigen::MatrixXd resid = ((w2_ * h).colwise() + b2_) - targets;  // d x B
    resid = (2.0 / B) * resid * lambdas.asDiagonal();

    const Eigen::MatrixXd g_w2 = resid * h.transpose();
    const Eigen::VectorXd g_b2 = resid.rowwise().sum();
    const Eigen::MatrixXd dz = (w2_.transpose() * resid).cwiseProduct(dh);  // h x B
    const Eigen::MatrixXd g_w1 = dz * in.transpose();
    const Eigen::VectorXd g_b1 = dz.rowwise().sum();

    Eigen::VectorXd g(param_count());
    Eigen::Index at = 0;
    g.segment(at, g_w1.size()) = Eigen::Map<const Eigen::VectorXd>(g_w1.data(), g_w1.size());
    at += g_w1.size();
    g.segment(at, g_b1.size()) = g_b1;
    at += g_b1.size();
    g.segment(at, g_w2.size()) = Eigen::Map<const Eigen::VectorXd>(g_w2.data(), g_w2.size());
    at += g_w2.size();
    g.segment(at, g_b2.size()) = g_b2;
    return g;
}

// ---------------------------------------------------------------------------
// DSM batches and checkpoints

DsmBatch make_dsm_batch(const LinearSde& sde, const Eigen::MatrixXd& x0, const Eigen::VectorXd& ts,
                        std::uint64_t noise_seed) {
    if (x0.cols() != ts.size() || ts.size() == 0) {
        throw ConfigError("DSM batch needs matching non-empty x0/t arrays");
    }
    Rng rng(noise_seed);
    DsmBatch batch;
    batch.ts = ts;
    batch.xt.resize(x0.rows(), x0.cols());
    batch.targets.resize(x0.rows(), x0.cols());
    batch.lambdas.resize(ts.size());
    const int d = static_cast<int>(x0.rows());
    for (Eigen::Index b = 0; b < ts.size(); ++b) {
        const double t = ts[b];
        const double rt = sde.r(t);
        const double scale = sde.rv(t);
        for (int i = 0; i < d; ++i) {
            const double z = rng.normal();
            batch.xt(i, b) = rt * x0(i, b) + scale * z;
            batch.targets(i, b) = -z / scale;
        }
        batch.lambdas[b] = lambda_weight(sde, t, d);
    }
    return batch;
}

Eigen::VectorXd grad_dsm(const ScoreModel& model, const LinearSde& sde, const Eigen::MatrixXd& x0,
                         const Eigen::VectorXd& ts, std::uint64_t noise_seed) {
    const DsmBatch batch = make_dsm_batch(sde, x0, ts, noise_seed);
    return model.batch_gradient(batch.xt, batch.ts, batch.targets, batch.lambdas);
}

namespace {

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Eigen::MatrixXd read_matrix(std::ifstream& in, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    return m;
}

struct CheckpointHeader {
    char magic[8];
    std::uint32_t kind;
    std::uint32_t d;
    std::uint32_t width;
    std::uint32_t d_e;
    std::uint64_t seed;
    double horizon;
};

}  // namespace

void save_checkpoint(const ScoreModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
    CheckpointHeader hdr{};
    std::memcpy(hdr.magic, "SGLCKPT1", 8);
    nlohmann::json meta;
    if (const auto* rf = dynamic_cast<const RandomFeatureNet*>(&model)) {
        hdr.kind = 0;
        hdr.d = static_cast<std::uint32_t>(rf->dim());
        hdr.width = static_cast<std::uint32_t>(rf->width());
        hdr.d_e = static_cast<std::uint32_t>(rf->embedding().d_e);
        hdr.seed = rf->init_seed();
        hdr.horizon = rf->embedding().horizon;
        out.write(reinterpret_cast<const char*>(&hdr), sizeof(hdr));
        write_matrix(out, rf->coefficients());
        write_matrix(out, rf->frozen_w());
        write_matrix(out, rf->frozen_u());
        meta["arrays"] = {{"A", {rf->dim(), rf->width()}},
                          {"W", {rf->width(), rf->dim()}},
                          {"U", {rf->width(), rf->embedding().d_e}}};
        meta["kind"] = "rf";
    } else if (const auto* sw = dynamic_cast<const SwishMlp*>(&model)) {
        hdr.kind = 1;
        hdr.d = static_cast<std::uint32_t>(sw->dim());
        hdr.width = static_cast<std::uint32_t>(sw->hidden());
        hdr.d_e = static_cast<std::uint32_t>(sw->embedding().d_e);
        hdr.seed = sw->init_seed();
        hdr.horizon = sw->embedding().horizon;
        out.write(reinterpret_cast<const char*>(&hdr), sizeof(hdr));
        const Eigen::VectorXd p = sw->params();
        out.write(reinterpret_cast<const char*>(p.data()),
                  static_cast<std::streamsize>(p.size() * sizeof(double)));
        meta["arrays"] = {{"params_flat", {sw->param_count()}}};
        meta["kind"] = "swish";
    } else {
        throw ConfigError("unknown model kind for checkpoint");
    }
    meta["d"] = hdr.d;
    meta["width"] = hdr.width;
    meta["d_e"] = hdr.d_e;
    meta["seed"] = hdr.seed;
    meta["horizon"] = hdr.horizon;
    std::ofstream side(path + ".json");
    side << meta.dump(2) << "\n";
}

std::unique_ptr<ScoreModel> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    CheckpointHeader hdr{};
    in.read(reinterpret_cast<char*>(&hdr), sizeof(hdr));
    if (std::memcmp(hdr.magic, "SGLCKPT1", 8) != 0) {
        throw ConfigError("bad checkpoint magic in " + path);
    }
    if (hdr.kind == 0) {
        Eigen::MatrixXd A = read_matrix(in, hdr.d, hdr.width);
        Eigen::MatrixXd W = read_matrix(in, hdr.width, hdr.d);
        Eigen::MatrixXd U = read_matrix(in, hdr.width, hdr.d_e);
        auto net = std::make_unique<RandomFeatureNet>(
            RandomFeatureNet::from_matrices(std::move(A), std::move(W), std::move(U), hdr.horizon));
        return net;
    }
    if (hdr.kind == 1) {
        auto net = std::make_unique<SwishMlp>(
            SwishMlp::init(hdr.d, hdr.width, hdr.d_e, hdr.horizon, hdr.seed));
        Eigen::VectorXd p(net->param_count());
        in.read(reinterpret_cast<char*>(p.data()),
                static_cast<std::streamsize>(p.size() * sizeof(double)));
        net->set_params(p);
        return net;
    }
    throw ConfigError("unknown checkpoint kind");
}

}  // namespace sgl

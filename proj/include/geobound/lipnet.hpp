#pragma once

// One-hidden-layer ReLU network with spectrally normalized weights, trained
// by plain mini-batch gradient descent, and the generalization-gap record
// that pairs a trained net with the bounds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bounds.hpp"
#include "error.hpp"
#include "spaceform.hpp"
#include "types.hpp"

namespace geobound {

struct SpectralResult {
    Eigen::MatrixXd W;      // normalized matrix
    double sigma = 0.0;     // estimated top singular value of the input
    Eigen::VectorXd right;  // estimated top right singular vector (warm start for the next call)
};

/// Top singular triplet estimate by Golub-Kahan-Lanczos bidiagonalization
/// with full reorthogonalization, `iters` steps from `start` (a random
/// vector drawn from `seed` when empty). Ritz values never exceed the true
/// top singular value.
inline std::pair<double, Eigen::VectorXd> top_singular(const Eigen::MatrixXd& A, int iters, Seed seed,
                                                       const Eigen::VectorXd& start = {}) {
    const Eigen::Index m = A.rows(), n = A.cols();
    const int k = static_cast<int>(std::min<Eigen::Index>({static_cast<Eigen::Index>(std::max(1, iters)), m, n}));
    Eigen::VectorXd v = start;
    if (v.size() != n || !(v.norm() > 0.0)) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        v.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    }
    v.normalize();

    // After k steps A V_{k+1} = U_k Bhat with Bhat k x (k+1) upper bidiagonal;
    // the top singular value of Bhat is the Ritz estimate (exact for rank one).
    Eigen::MatrixXd U(m, k), V(n, k + 1);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(k), beta = Eigen::VectorXd::Zero(k);
    int steps = 0, vcols = 1;
    V.col(0) = v;
    for (int j = 0; j < k; ++j) {
        Eigen::VectorXd u = A * V.col(j);
        if (j > 0) u -= beta(j - 1) * U.col(j - 1);
        for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i < j; ++i) u -= U.col(i).dot(u) * U.col(i);
        alpha(j) = u.norm();
        steps = j + 1;
        if (!(alpha(j) > 1e-300)) break;
        U.col(j) = u / alpha(j);
        Eigen::VectorXd w = A.transpose() * U.col(j) - alpha(j) * V.col(j);
        for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i <= j; ++i) w -= V.col(i).dot(w) * V.col(i);
        beta(j) = w.norm();
        if (!(beta(j) > 1e-14 * alpha(j))) {
            beta(j) = 0.0;
            break;
        }
        V.col(j + 1) = w / beta(j);
        vcols = j + 2;
    }
    Eigen::MatrixXd Bk = Eigen::MatrixXd::Zero(steps, vcols);
    for (int j = 0; j < steps; ++j) {
        Bk(j, j) = alpha(j);
        if (j + 1 < vcols) Bk(j, j + 1) = beta(j);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Bk, Eigen::ComputeFullV);
    Eigen::VectorXd right = V.leftCols(vcols) * svd.matrixV().col(0);
    right.normalize();
    return {svd.singularValues()(0), right};
}

/// W * (target_norm / sigma) with sigma the top singular value of W.
inline SpectralResult spectral_normalize(const Eigen::MatrixXd& W, int n_iters = 30, Seed seed = 0,
                                         double target_norm = 1.0, const Eigen::VectorXd& warm_start = {}) {
    if (W.size() == 0 || !(W.cwiseAbs().maxCoeff() > 0.0))
        throw DomainError("spectral_normalize: zero matrix has no spectral direction");
    if (!(target_norm > 0.0)) throw DomainError("spectral_normalize: target_norm must be positive");
    auto [sigma, right] = top_singular(W, n_iters, seed, warm_start);
    SpectralResult out;
    out.sigma = sigma;
    out.W = W * (target_norm / sigma);
    out.right = std::move(right);
    return out;
}

enum class Loss { squared, hinge };

inline const char* loss_name(Loss l) { return l == Loss::squared ? "squared" : "hinge"; }

inline Loss parse_loss(const std::string& s) {
    if (s == "squared") return Loss::squared;
    if (s == "hinge") return Loss::hinge;
    throw DomainError("unknown loss '" + s + "' (expected squared or hinge)");
}

inline double loss_value(Loss l, double f, double y) {
    if (l == Loss::squared) return (f - y) * (f - y);
    return std::max(0.0, 1.0 - y * f);
}

// d loss / d f
inline double loss_derivative(Loss l, double f, double y) {
    if (l == Loss::squared) return 2.0 * (f - y);
    return 1.0 - y * f > 0.0 ? -y : 0.0;
}

/// Lipschitz constant of the loss in its first argument over [-B, B] with
/// labels in [-B, B]: hinge 1, squared 4B.
inline double loss_lipschitz(Loss l, double B) { return l == Loss::hinge ? 1.0 : 4.0 * B; }

/// f(x) = W2 relu(W1 x + b1) + b2, reported clamped to [-B, B].
struct LipschitzNet {
    Eigen::MatrixXd W1;  // hidden x input
    Eigen::VectorXd b1;
    Eigen::MatrixXd W2;  // 1 x hidden
    double b2 = 0.0;
    double sigma1 = 1.0;
    double sigma2 = 1.0;
    double target_norm = 1.0;
    double B = 1.0;
    Seed seed = 0;
    Eigen::VectorXd warm1, warm2;

    int input_dim() const { return static_cast<int>(W1.cols()); }
    int hidden() const { return static_cast<int>(W1.rows()); }

    /// Certified Lipschitz constant of the unclamped output.
    double lipschitz() const { return target_norm * target_norm; }

    static LipschitzNet zeros(int input, int width, double B = 1.0) {
        LipschitzNet net;
        net.W1 = Eigen::MatrixXd::Zero(width, input);
        net.b1 = Eigen::VectorXd::Zero(width);
        net.W2 = Eigen::MatrixXd::Zero(1, width);
        net.B = B;
        return net;
    }

    /// Rescales both layers to spectral norm target_norm. `iters` Lanczos
    /// steps, warm-started from the previous top right singular vectors.
    void normalize(int iters) {
        auto r1 = spectral_normalize(W1, iters, seed + 1, target_norm, warm1);
        W1 = std::move(r1.W);
        sigma1 = r1.sigma;
        warm1 = std::move(r1.right);
        auto r2 = spectral_normalize(W2, iters, seed + 2, target_norm, warm2);
        W2 = std::move(r2.W);
        sigma2 = r2.sigma;
        warm2 = std::move(r2.right);
    }
};

inline double forward_raw(const LipschitzNet& net, std::span<const double> x) {
    if (static_cast<Eigen::Index>(x.size()) != net.W1.cols())
        throw DimensionError("forward: input has " + std::to_string(x.size()) + " coordinates, net expects " +
                             std::to_string(net.W1.cols()));
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::VectorXd h = (net.W1 * xv + net.b1).cwiseMax(0.0);
    return (net.W2 * h)(0) + net.b2;
}

inline double forward(const LipschitzNet& net, std::span<const double> x) {
    return std::clamp(forward_raw(net, x), -net.B, net.B);
}

/// Raw (unclamped) outputs for every row of X.
inline Eigen::VectorXd forward_batch_raw(const LipschitzNet& net, const Points& X) {
    if (X.cols() != net.W1.cols()) throw DimensionError("forward: input dimension mismatch");
    const Eigen::MatrixXd H = ((X * net.W1.transpose()).rowwise() + net.b1.transpose()).cwiseMax(0.0);
    return (H * net.W2.transpose()).col(0).array() + net.b2;
}

inline Eigen::VectorXd forward_batch(const LipschitzNet& net, const Points& X) {
    return forward_batch_raw(net, X).cwiseMax(-net.B).cwiseMin(net.B);
}

struct Gradient {
    Eigen::MatrixXd W1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd W2;
    double b2 = 0.0;
};

/// Mean loss of the raw outputs over the rows `idx` of (X, y) and its
/// gradient with respect to every parameter.
inline double loss_and_gradient(const LipschitzNet& net, const Points& X, const Eigen::VectorXd& y, Loss loss,
                                const std::vector<Eigen::Index>& idx, Gradient& g) {
    const auto m = static_cast<Eigen::Index>(idx.size());
    Points Xb(m, X.cols());
    Eigen::VectorXd yb(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        Xb.row(r) = X.row(idx[static_cast<std::size_t>(r)]);
        yb(r) = y(idx[static_cast<std::size_t>(r)]);
    }
    const Eigen::MatrixXd Z = (Xb * net.W1.transpose()).rowwise() + net.b1.transpose();  // m x h
    const Eigen::MatrixXd H = Z.cwiseMax(0.0);
    const Eigen::VectorXd f = (H * net.W2.transpose()).col(0).array() + net.b2;

    double total = 0.0;
    Eigen::VectorXd df(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        total += loss_value(loss, f(r), yb(r));
        df(r) = loss_derivative(loss, f(r), yb(r)) / static_cast<double>(m);
    }
    g.b2 = df.sum();
    g.W2 = df.transpose() * H;  // 1 x h
    Eigen::MatrixXd dZ = df * net.W2;  // m x h
    dZ.array() *= (Z.array() > 0.0).cast<double>();
    g.W1 = dZ.transpose() * Xb;
    g.b1 = dZ.colwise().sum().transpose();
    return total / static_cast<double>(m);
}

inline double loss_and_gradient(const LipschitzNet& net, const Points& X, const Eigen::VectorXd& y, Loss loss,
                                Gradient& g) {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(X.rows()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    return loss_and_gradient(net, X, y, loss, all, g);
}

/// Mean loss of the clamped outputs.
inline double empirical_risk(const LipschitzNet& net, const Points& X, const Eigen::VectorXd& y, Loss loss) {
    const Eigen::VectorXd f = forward_batch(net, X);
    double total = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) total += loss_value(loss, f(i), y(i));
    return total / static_cast<double>(f.size());
}

struct TrainConfig {
    int hidden_width = 64;
    int epochs = 100;
    int batch = 32;
    double step_size = 0.05;
    double target_norm = 1.0;
    double B = 1.0;
    Loss loss = Loss::squared;
    Seed seed = 0;
    int power_iters = 30;  // Lanczos steps at initialization
    int warm_iters = 3;    // Lanczos steps after each gradient step
};

struct TrainResult {
    LipschitzNet net;
    std::vector<double> loss_history;  // mean raw-output training loss per epoch
};

/// Plain mini-batch gradient descent on the raw output; both layers are
/// spectrally normalized after every step. Deterministic given config.seed.
inline TrainResult train(const Points& X, const Eigen::VectorXd& y, const TrainConfig& cfg) {
    const Eigen::Index n = X.rows();
    if (y.size() != n) throw DimensionError("train: label count does not match point count");
    if (cfg.batch < 1 || n < cfg.batch) throw DomainError("train: need n >= batch >= 1");
    if (cfg.hidden_width < 1 || cfg.epochs < 0 || !(cfg.step_size > 0.0) || !(cfg.target_norm > 0.0))
        throw DomainError("train: invalid network or optimizer settings");

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    TrainResult out;
    LipschitzNet& net = out.net;
    net.seed = cfg.seed;
    net.target_norm = cfg.target_norm;
    net.B = cfg.B;
    const auto D = static_cast<Eigen::Index>(X.cols());
    const Eigen::Index h = cfg.hidden_width;
    net.W1.resize(h, D);
    for (Eigen::Index j = 0; j < D; ++j)
        for (Eigen::Index i = 0; i < h; ++i) net.W1(i, j) = normal(rng);
    net.W2.resize(1, h);
    for (Eigen::Index i = 0; i < h; ++i) net.W2(0, i) = normal(rng);
    net.b1.resize(h);
    for (Eigen::Index i = 0; i < h; ++i) net.b1(i) = 0.1 * normal(rng);
    net.b2 = 0.0;
    net.normalize(cfg.power_iters);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::vector<Eigen::Index> batch;
    Gradient g;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        Eigen::Index seen = 0;
        for (Eigen::Index start = 0; start < n; start += cfg.batch) {
            const Eigen::Index end = std::min(n, start + cfg.batch);
            batch.assign(order.begin() + start, order.begin() + end);
            const double l = loss_and_gradient(net, X, y, cfg.loss, batch, g);
            if (!std::isfinite(l)) throw NonFiniteLossError(epoch);
            epoch_loss += l * static_cast<double>(end - start);
            seen += end - start;
            net.W1 -= cfg.step_size * g.W1;
            net.b1 -= cfg.step_size * g.b1;
            net.W2 -= cfg.step_size * g.W2;
            net.b2 -= cfg.step_size * g.b2;
            net.normalize(cfg.warm_iters);
        }
        epoch_loss /= static_cast<double>(seen);
        if (!std::isfinite(epoch_loss)) throw NonFiniteLossError(epoch);
        out.loss_history.push_back(epoch_loss);
    }
    return out;
}

/// Function class certified by a training configuration.
inline FunctionClassSpec class_spec_for(const TrainConfig& cfg) {
    FunctionClassSpec spec;
    spec.L = cfg.target_norm * cfg.target_norm;
    spec.B = cfg.B;
    spec.L_loss = loss_lipschitz(cfg.loss, cfg.B);
    return spec;
}

struct GapRecord {
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double train_risk = 0.0;
    double test_risk = 0.0;
    double gap = 0.0;
    double bound_curvature = 0.0;
    double bound_euclidean = 0.0;
    Seed seed = 0;
    SpaceFormGeometry geometry;
};

/// Train/test risks of the clamped net, their gap, and the curvature-aware
/// and Euclidean generalization bounds at n_train.
inline GapRecord measure_gap(const LipschitzNet& net, const Points& X_train, const Eigen::VectorXd& y_train,
                             const Points& X_test, const Eigen::VectorXd& y_test, Loss loss,
                             const SpaceFormGeometry& geometry, const FunctionClassSpec& spec,
                             const BoundConstants& constants) {
    if (X_train.rows() == 0 || X_test.rows() == 0) throw DomainError("measure_gap: empty train or test set");
    GapRecord rec;
    rec.n_train = static_cast<std::size_t>(X_train.rows());
    rec.n_test = static_cast<std::size_t>(X_test.rows());
    rec.train_risk = empirical_risk(net, X_train, y_train, loss);
    rec.test_risk = empirical_risk(net, X_test, y_test, loss);
    if (!std::isfinite(rec.train_risk) || !std::isfinite(rec.test_risk))
        throw DomainError("measure_gap: non-finite risk");
    rec.gap = std::abs(rec.test_risk - rec.train_risk);
    rec.seed = net.seed;
    rec.geometry = geometry;
    const double n = static_cast<double>(rec.n_train);
    rec.bound_curvature = generalization_bound(geometry, spec, n, constants);
    rec.bound_euclidean = euclidean_baseline(static_cast<int>(X_train.cols()), spec, n, constants).generalization;
    return rec;
}

}  // namespace geobound

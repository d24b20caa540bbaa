#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <geobound/lipnet.hpp>

#include "oracles.hpp"

using namespace geobound;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, Seed seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd M(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) M(i, j) = n(rng);
    return M;
}

LipschitzNet random_net(int input, int width, Seed seed, double target = 1.0) {
    auto net = LipschitzNet::zeros(input, width, 10.0);
    net.W1 = gaussian(width, input, seed);
    net.b1 = gaussian(width, 1, seed + 1).col(0);
    net.W2 = gaussian(1, width, seed + 2);
    net.b2 = 0.3;
    net.target_norm = target;
    net.normalize(30);
    return net;
}

std::span<const double> sp(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST(SpectralNormalize, IdentityUnchanged) {
    const auto r = spectral_normalize(Eigen::MatrixXd::Identity(3, 3));
    EXPECT_NEAR(r.sigma, 1.0, 1e-12);
    EXPECT_TRUE(r.W.isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-12));
}

TEST(SpectralNormalize, DiagonalScaledByTopValue) {
    Eigen::MatrixXd W(2, 2);
    W << 2, 0, 0, 1;
    const auto r = spectral_normalize(W);
    EXPECT_NEAR(r.sigma, 2.0, 1e-12);
    Eigen::MatrixXd expect(2, 2);
    expect << 1, 0, 0, 0.5;
    EXPECT_TRUE(r.W.isApprox(expect, 1e-12));
}

TEST(SpectralNormalize, GaussianMatchesFullSvd) {
    const auto W = gaussian(64, 100, 3);
    EXPECT_LT(relative_error(spectral_normalize(W).sigma, oracle::top_singular_value(W)), 1e-6);
}

TEST(SpectralNormalize, RowAndColumnVectors) {
    const auto row = gaussian(1, 50, 4), col = gaussian(50, 1, 5);
    EXPECT_NEAR(spectral_normalize(row).sigma, row.norm(), 1e-12 * row.norm());
    EXPECT_NEAR(spectral_normalize(col).sigma, col.norm(), 1e-12 * col.norm());
    EXPECT_NEAR(oracle::top_singular_value(spectral_normalize(row, 30, 0, 2.5).W), 2.5, 1e-12);
}

TEST(SpectralNormalize, ZeroMatrixRejected) {
    EXPECT_THROW(spectral_normalize(Eigen::MatrixXd::Zero(3, 4)), DomainError);
}

TEST(Forward, ZeroNetIsZero) {
    const auto net = LipschitzNet::zeros(4, 8);
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -1, 2);
    EXPECT_EQ(forward(net, sp(x)), 0.0);
}

TEST(Forward, HandEvaluation) {
    auto net = LipschitzNet::zeros(3, 3, 5.0);
    net.W1 = Eigen::MatrixXd::Identity(3, 3);
    net.W2 = Eigen::MatrixXd::Zero(1, 3);
    net.W2(0, 0) = 1.0;
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(3);
    e1(0) = 0.7;
    EXPECT_DOUBLE_EQ(forward(net, sp(e1)), 0.7);
    e1(0) = -0.7;
    EXPECT_DOUBLE_EQ(forward(net, sp(e1)), 0.0);
}

TEST(Forward, ClampedToB) {
    auto net = LipschitzNet::zeros(2, 2, 1.0);
    net.b2 = 5.0;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    EXPECT_EQ(forward(net, sp(x)), 1.0);
    EXPECT_EQ(forward_raw(net, sp(x)), 5.0);
}

TEST(Forward, DimensionMismatch) {
    const auto net = LipschitzNet::zeros(3, 4);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    EXPECT_THROW(forward(net, sp(x)), DimensionError);
}

TEST(Forward, EmpiricalLipschitzRatio) {
    const auto net = random_net(10, 32, 7);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        Eigen::VectorXd x(10), y(10);
        for (int k = 0; k < 10; ++k) {
            x(k) = n(rng);
            y(k) = x(k) + 0.1 * n(rng);
        }
        worst = std::max(worst, std::abs(forward_raw(net, sp(x)) - forward_raw(net, sp(y))) / (x - y).norm());
    }
    EXPECT_LE(worst, 1.0 + 1e-3);
}

TEST(Gradient, MatchesCentralDifferences) {
    for (Loss loss : {Loss::squared, Loss::hinge}) {
        const auto net = random_net(5, 8, 11);
        const Points X = gaussian(16, 5, 12);
        Eigen::VectorXd y = gaussian(16, 1, 13).col(0);
        if (loss == Loss::hinge) y = y.unaryExpr([](double v) { return v >= 0 ? 1.0 : -1.0; });
        Gradient g;
        loss_and_gradient(net, X, y, loss, g);
        const double h = 1e-5;
        auto check = [&](double analytic, auto perturb) {
            const double fd = oracle::central_difference(
                [&](double delta) {
                    auto copy = net;
                    perturb(copy, delta);
                    Gradient unused;
                    return loss_and_gradient(copy, X, y, loss, unused);
                },
                h);
            EXPECT_LE(std::abs(analytic - fd), 1e-4 * std::max(1.0, std::abs(fd))) << loss_name(loss);
        };
        for (Eigen::Index i = 0; i < net.W1.rows(); ++i)
            for (Eigen::Index j = 0; j < net.W1.cols(); ++j)
                check(g.W1(i, j), [&](LipschitzNet& n, double d) { n.W1(i, j) += d; });
        for (Eigen::Index i = 0; i < net.b1.size(); ++i)
            check(g.b1(i), [&](LipschitzNet& n, double d) { n.b1(i) += d; });
        for (Eigen::Index i = 0; i < net.W2.cols(); ++i)
            check(g.W2(0, i), [&](LipschitzNet& n, double d) { n.W2(0, i) += d; });
        check(g.b2, [&](LipschitzNet& n, double d) { n.b2 += d; });
    }
}

TEST(Train, SeparableTwoPointsHinge) {
    Points X(2, 2);
    X << 1, 0, -1, 0;
    Eigen::VectorXd y(2);
    y << 1, -1;
    TrainConfig c;
    c.hidden_width = 8;
    c.epochs = 200;
    c.batch = 2;
    c.step_size = 0.1;
    c.loss = Loss::hinge;
    c.target_norm = 1.5;
    const auto r = train(X, y, c);
    EXPECT_EQ(empirical_risk(r.net, X, y, Loss::hinge), 0.0);
}

TEST(Train, ConstantLabelsSquared) {
    const Points X = gaussian(64, 3, 20);
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(64, 0.4);
    TrainConfig c;
    c.hidden_width = 8;
    c.epochs = 10000;
    c.batch = 16;
    c.step_size = 0.5;
    const auto r = train(X, y, c);
    EXPECT_LT(empirical_risk(r.net, X, y, Loss::squared), 1e-6);
    const Eigen::VectorXd f = forward_batch(r.net, X);
    EXPECT_LT((f.array() - 0.4).abs().maxCoeff(), 1e-3);
}

TEST(Train, SpectralNormsAtTarget) {
    const Points X = gaussian(200, 6, 21);
    const Eigen::VectorXd y = gaussian(200, 1, 22).col(0);
    for (int epochs : {1, 3, 7, 15, 30}) {
        TrainConfig c;
        c.hidden_width = 24;
        c.epochs = epochs;
        c.target_norm = 1.7;
        c.seed = static_cast<Seed>(epochs);
        const auto r = train(X, y, c);
        EXPECT_NEAR(oracle::top_singular_value(r.net.W1), 1.7, 1e-4);
        EXPECT_NEAR(oracle::top_singular_value(r.net.W2), 1.7, 1e-4);
    }
}

TEST(Train, DeterministicGivenSeed) {
    const Points X = gaussian(100, 4, 30);
    const Eigen::VectorXd y = gaussian(100, 1, 31).col(0);
    TrainConfig c;
    c.hidden_width = 16;
    c.epochs = 5;
    c.seed = 9;
    const auto a = train(X, y, c), b = train(X, y, c);
    EXPECT_TRUE(a.net.W1 == b.net.W1);
    EXPECT_TRUE(a.net.W2 == b.net.W2);
    EXPECT_EQ(a.net.b2, b.net.b2);
    EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(Train, NonFiniteLossNamesEpoch) {
    const Points X = gaussian(32, 3, 40);
    Eigen::VectorXd y = gaussian(32, 1, 41).col(0);
    y(5) = std::nan("");
    TrainConfig c;
    c.hidden_width = 4;
    c.epochs = 3;
    try {
        train(X, y, c);
        FAIL() << "expected NonFiniteLossError";
    } catch (const NonFiniteLossError& e) {
        EXPECT_EQ(e.epoch(), 0);
    }
}

TEST(Train, RejectsBatchLargerThanData) {
    TrainConfig c;
    c.batch = 64;
    EXPECT_THROW(train(gaussian(10, 2, 1), Eigen::VectorXd::Zero(10), c), DomainError);
}

TEST(Gap, IdenticalSetsGiveZero) {
    const auto net = random_net(3, 8, 50);
    const Points X = gaussian(40, 3, 51);
    const Eigen::VectorXd y = gaussian(40, 1, 52).col(0);
    const auto g = SpaceFormGeometry::ball(3, 0.0, 1.0);
    FunctionClassSpec spec;
    spec.B = 10.0;
    const auto rec = measure_gap(net, X, y, X, y, Loss::squared, g, spec, BoundConstants{});
    EXPECT_EQ(rec.gap, 0.0);
}

TEST(Gap, ZeroNetGapIsSecondMomentDifference) {
    const auto net = LipschitzNet::zeros(2, 4, 5.0);
    const Points Xa = gaussian(50, 2, 60), Xb = gaussian(80, 2, 61);
    const Eigen::VectorXd ya = gaussian(50, 1, 62).col(0), yb = gaussian(80, 1, 63).col(0);
    const auto g = SpaceFormGeometry::ball(2, 0.0, 1.0);
    const auto rec = measure_gap(net, Xa, ya, Xb, yb, Loss::squared, g, FunctionClassSpec{}, BoundConstants{});
    EXPECT_NEAR(rec.gap, std::abs(yb.squaredNorm() / 80 - ya.squaredNorm() / 50), 1e-14);
}

TEST(Gap, LossLipschitzConstants) {
    EXPECT_EQ(loss_lipschitz(Loss::hinge, 3.0), 1.0);
    EXPECT_EQ(loss_lipschitz(Loss::squared, 3.0), 12.0);
    TrainConfig c;
    c.target_norm = 2;
    c.B = 1.5;
    c.loss = Loss::squared;
    const auto s = class_spec_for(c);
    EXPECT_EQ(s.L, 4.0);
    EXPECT_EQ(s.B, 1.5);
    EXPECT_EQ(s.L_loss, 6.0);
}

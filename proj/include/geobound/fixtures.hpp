#pragma once

// Deterministic point-cloud generators used as bundled datasets and as
// ground-truth inputs for the estimators.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "spaceform.hpp"
#include "types.hpp"

namespace geobound {

/// Standard 3-D swiss roll: t = 1.5 pi (1 + 2u), (t cos t, 21 v, t sin t),
/// plus isotropic Gaussian noise.
inline Points swiss_roll(Eigen::Index n, double noise, Seed seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Points P(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = 1.5 * std::numbers::pi * (1.0 + 2.0 * unif(rng));
        const double h = 21.0 * unif(rng);
        P(i, 0) = t * std::cos(t);
        P(i, 1) = h;
        P(i, 2) = t * std::sin(t);
        for (int j = 0; j < 3; ++j) P(i, j) += noise * normal(rng);
    }
    return P;
}

/// Uniform unit disk, rotated into R^3 by a seeded orthogonal map.
inline Points flat_disk(Eigen::Index n, Seed seed) {
    const auto g = SpaceFormGeometry::ball(2, 0.0, 1.0);
    return embed_ambient(sample_uniform_ball(g, n, seed), 3, seed + 1).ambient;
}

/// Uniform points on the sphere of the given radius in R^3 with radial
/// Gaussian noise of standard deviation `noise`.
inline Points noisy_sphere(Eigen::Index n, double radius, double noise, Seed seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Points P(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Vector3d v(normal(rng), normal(rng), normal(rng));
        while (v.norm() == 0.0) v = Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
        P.row(i) = ((radius + noise * normal(rng)) * v.normalized()).transpose();
    }
    return P;
}

/// Stand-in for a learned 64-dimensional embedding: a `latent`-dimensional
/// uniform cube pushed through x = tanh(A z + b) with seeded Gaussian A, b,
/// plus small ambient noise.
inline Points synthetic_embedding(Eigen::Index n, int ambient, int latent, double noise, Seed seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd A(ambient, latent);
    Eigen::VectorXd b(ambient);
    for (int i = 0; i < ambient; ++i) {
        for (int j = 0; j < latent; ++j) A(i, j) = normal(rng) / std::sqrt(static_cast<double>(latent));
        b(i) = 0.5 * normal(rng);
    }
    Points P(n, ambient);
    Eigen::VectorXd z(latent);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (int j = 0; j < latent; ++j) z(j) = unif(rng);
        const Eigen::VectorXd x = (A * z + b).array().tanh();
        for (int i = 0; i < ambient; ++i) P(r, i) = x(i) + noise * normal(rng);
    }
    return P;
}

/// Area-uniform points on a patch of the pseudosphere (constant curvature
/// kappa < 0) embedded in R^3. The patch is {0 <= x < width, 1 <= y <= y_max}
/// in upper-half-plane coordinates, where the surface is
/// (a cos x / y, a sin x / y, a (acosh y - tanh(acosh y))), a = 1/sqrt(-kappa).
inline Points pseudosphere(Eigen::Index n, double kappa, Seed seed, double width = std::numbers::pi,
                           double y_max = 4.0) {
    if (!(kappa < 0.0)) throw DomainError("pseudosphere: kappa must be negative");
    const double a = 1.0 / std::sqrt(-kappa);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Points P(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = width * unif(rng);
        const double y = 1.0 / (1.0 - unif(rng) * (1.0 - 1.0 / y_max));  // density ~ 1/y^2
        const double t = std::acosh(y);
        P(i, 0) = a * std::cos(x) / y;
        P(i, 1) = a * std::sin(x) / y;
        P(i, 2) = a * (t - std::tanh(t));
    }
    return P;
}

struct FixtureSpec {
    std::string name;
    Points points;
};

/// The bundled datasets, regenerated bit-identically from fixed seeds.
inline std::vector<FixtureSpec> bundled_fixtures() {
    std::vector<FixtureSpec> out;
    out.push_back({"swiss_roll", swiss_roll(5000, 0.05, 11)});
    out.push_back({"flat_disk", flat_disk(4000, 12)});
    out.push_back({"noisy_sphere", noisy_sphere(4000, 1.0, 0.01, 13)});
    out.push_back({"embedding64", synthetic_embedding(5000, 64, 8, 0.005, 14)});
    return out;
}

}  // namespace geobound

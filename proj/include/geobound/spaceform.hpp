#pragma once

// Geometry of the three constant-curvature model spaces.
//
// Coordinates per model:
//   sphere (kappa > 0):     x in R^{d+1} with <x,x> = 1/kappa
//   flat (kappa == 0):      x in R^d
//   hyperbolic (kappa < 0): x in R^{d+1} with <x,x>_L = -1/|kappa|, x0 > 0
// The base point is the origin (flat) or e0/sqrt|kappa| (curved).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "error.hpp"
#include "quadrature.hpp"
#include "types.hpp"

namespace geobound {

enum class Model { sphere, flat, hyperbolic };

inline Model model_of(double kappa) {
    if (kappa > 0.0) return Model::sphere;
    if (kappa < 0.0) return Model::hyperbolic;
    return Model::flat;
}

inline const char* model_name(Model m) {
    switch (m) {
        case Model::sphere: return "sphere";
        case Model::hyperbolic: return "hyperbolic";
        default: return "flat";
    }
}

/// Volume of the unit ball in R^d, pi^{d/2} / Gamma(d/2 + 1).
inline double unit_ball_volume(int d) {
    if (d < 1) throw DomainError("unit_ball_volume: d must be >= 1");
    const double half = 0.5 * d;
    return std::exp(half * std::log(std::numbers::pi) - std::lgamma(half + 1.0));
}

/// Generalized sine: sin(sqrt(k) t)/sqrt(k), t, or sinh(sqrt(-k) t)/sqrt(-k).
inline double sn_kappa(double kappa, double t) {
    if (kappa > 0.0) {
        const double s = std::sqrt(kappa);
        return std::sin(s * t) / s;
    }
    if (kappa < 0.0) {
        const double s = std::sqrt(-kappa);
        return std::sinh(s * t) / s;
    }
    return t;
}

/// Largest radius a ball may have on the sphere of curvature kappa (pi/sqrt(kappa)),
/// infinity otherwise.
inline double max_ball_radius(double kappa) {
    return kappa > 0.0 ? std::numbers::pi / std::sqrt(kappa)
                       : std::numeric_limits<double>::infinity();
}

/// Riemannian volume of a geodesic ball of radius r in the d-dimensional space
/// form of curvature kappa:
///
///   V_kappa(r) = |S^{d-1}| * integral_0^r sn_kappa(t)^{d-1} dt,   |S^{d-1}| = d * omega_d
///
/// evaluated by adaptive Gauss-Kronrod quadrature (relative tolerance 1e-10); the flat case
/// uses omega_d r^d directly.
inline double space_form_ball_volume(int d, double kappa, double r) {
    if (d < 1) throw DomainError("space_form_ball_volume: d must be >= 1");
    if (!(r > 0.0) || !std::isfinite(r))
        throw DomainError("space_form_ball_volume: radius must be positive and finite");
    if (kappa > 0.0 && r > max_ball_radius(kappa) * (1.0 + 1e-12))
        throw DomainError("space_form_ball_volume: radius exceeds pi/sqrt(kappa); the ball wraps the sphere");

    const double omega = unit_ball_volume(d);
    if (kappa == 0.0) return omega * std::pow(r, d);
    if (d == 1) return 2.0 * r;

    const int power = d - 1;
    auto integrand = [kappa, power](double t) { return std::pow(sn_kappa(kappa, t), power); };
    // The integrand is entire, so one 31-point Kronrod panel usually meets the
    // tolerance; bisection covers strongly growing sinh powers.
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, r, 30, 1e-10);
    return d * omega * v;
}

/// Closed-form lower bounds on V_kappa(r) obtained from sinh(u) >= u e^{-u}
/// (kappa < 0) and sin(u) >= 2u/pi for u in [0, pi/2] (kappa > 0). Both
/// carry the 1/d factor of the integral of t^{d-1}.
inline double ball_volume_lower_bound(int d, double kappa, double r) {
    if (d < 1) throw DomainError("ball_volume_lower_bound: d must be >= 1");
    if (!(r > 0.0)) throw DomainError("ball_volume_lower_bound: radius must be positive");
    const double base = unit_ball_volume(d) * std::pow(r, d) / d;
    if (kappa < 0.0) return base * std::exp(-(d - 1) * std::sqrt(-kappa) * d * r);
    if (kappa > 0.0) {
        if (std::sqrt(kappa) * r > 0.5 * std::numbers::pi * (1.0 + 1e-12))
            throw DomainError("ball_volume_lower_bound: sqrt(kappa) r must be <= pi/2");
        return base * std::pow(2.0 / std::numbers::pi, d - 1);
    }
    return base;
}

/// Manifold description parameterizing every bound: intrinsic dimension,
/// curvature, injectivity radius, volume and the geodesic radius of the
/// working ball (cap).
struct SpaceFormGeometry {
    int d = 1;
    double kappa = 0.0;
    double inj = 2.0;
    double vol = 2.0;
    double domain_radius = 1.0;

    Model model() const { return model_of(kappa); }
    int model_dim() const { return model() == Model::flat ? d : d + 1; }

    void validate() const {
        if (d < 1) throw DomainError("geometry: d must be >= 1");
        if (!std::isfinite(kappa)) throw DomainError("geometry: kappa must be finite");
        if (!(inj > 0.0) || !std::isfinite(inj)) throw DomainError("geometry: inj must be positive and finite");
        if (!(vol > 0.0) || !std::isfinite(vol)) throw DomainError("geometry: vol must be positive and finite");
        if (!(domain_radius > 0.0) || !std::isfinite(domain_radius))
            throw DomainError("geometry: domain_radius must be positive and finite");
        if (kappa > 0.0) {
            const double hemi = 0.5 * max_ball_radius(kappa);
            if (domain_radius > hemi * (1.0 + 1e-12))
                throw DomainError("geometry: spherical cap radius must be <= pi/(2 sqrt(kappa))");
            if (inj > max_ball_radius(kappa) * (1.0 + 1e-12))
                throw DomainError("geometry: inj must be <= pi/sqrt(kappa) on the sphere");
        }
    }

    /// Geodesic-ball working domain. vol defaults to V_kappa(radius); inj
    /// defaults to pi/sqrt(kappa) on the sphere and to the ball diameter otherwise.
    static SpaceFormGeometry ball(int d, double kappa, double radius,
                                  std::optional<double> inj = std::nullopt,
                                  std::optional<double> vol = std::nullopt) {
        SpaceFormGeometry g;
        g.d = d;
        g.kappa = kappa;
        g.domain_radius = radius;
        if (d < 1) throw DomainError("geometry: d must be >= 1");
        if (!(radius > 0.0)) throw DomainError("geometry: domain_radius must be positive");
        g.inj = inj ? *inj : (kappa > 0.0 ? max_ball_radius(kappa) : 2.0 * radius);
        if (kappa > 0.0 && radius > 0.5 * max_ball_radius(kappa) * (1.0 + 1e-12))
            throw DomainError("geometry: spherical cap radius must be <= pi/(2 sqrt(kappa))");
        g.vol = vol ? *vol : space_form_ball_volume(d, kappa, radius);
        g.validate();
        return g;
    }
};

// ---------------------------------------------------------------------------
// Points and distances

inline double lorentz_inner(std::span<const double> x, std::span<const double> y) {
    double s = -x[0] * y[0];
    for (std::size_t k = 1; k < x.size(); ++k) s += x[k] * y[k];
    return s;
}

inline double euclidean_inner(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
    return s;
}

/// Throws InvalidPointError when x is off the model surface by more than `tol`
/// (relative to the surface's defining constant).
inline void check_on_model(std::span<const double> x, const SpaceFormGeometry& g, double tol = 1e-6) {
    if (static_cast<int>(x.size()) != g.model_dim())
        throw DimensionError("point has " + std::to_string(x.size()) + " coordinates, model needs " +
                             std::to_string(g.model_dim()));
    switch (g.model()) {
        case Model::sphere: {
            const double q = g.kappa * euclidean_inner(x, x);
            if (!(std::abs(q - 1.0) <= tol))
                throw InvalidPointError("point is not on the sphere <x,x> = 1/kappa");
            break;
        }
        case Model::hyperbolic: {
            const double q = -g.kappa * lorentz_inner(x, x);  // -kappa = |kappa|
            if (!(std::abs(q + 1.0) <= tol) || !(x[0] > 0.0))
                throw InvalidPointError("point is not on the upper hyperboloid <x,x>_L = -1/|kappa|");
            break;
        }
        case Model::flat:
            for (double v : x)
                if (!std::isfinite(v)) throw InvalidPointError("non-finite coordinate");
            break;
    }
}

/// Closed-form geodesic distance without validation.
///
/// Sphere and hyperboloid use the half-chord forms
///   2/sqrt(k) asin(sqrt(k)|x-y|/2)   and   2/sqrt|k| asinh(sqrt(|k| <x-y,x-y>_L)/2),
/// which equal (1/sqrt k) acos(k<x,y>) and (1/sqrt|k|) acosh(-|k|<x,y>_L)
/// but stay exact at x == y and accurate for nearby points.
inline double geodesic_distance_unchecked(std::span<const double> x, std::span<const double> y,
                                          double kappa) {
    if (kappa > 0.0) {
        const double s = std::sqrt(kappa);
        double dot = 0.0, diff = 0.0, sum = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            dot += x[k] * y[k];
            diff += (x[k] - y[k]) * (x[k] - y[k]);
            sum += (x[k] + y[k]) * (x[k] + y[k]);
        }
        if (dot >= 0.0) return 2.0 / s * std::asin(std::min(1.0, 0.5 * s * std::sqrt(diff)));
        return (std::numbers::pi - 2.0 * std::asin(std::min(1.0, 0.5 * s * std::sqrt(sum)))) / s;
    }
    if (kappa < 0.0) {
        const double s = std::sqrt(-kappa);
        double q = -(x[0] - y[0]) * (x[0] - y[0]);
        for (std::size_t k = 1; k < x.size(); ++k) q += (x[k] - y[k]) * (x[k] - y[k]);
        return 2.0 / s * std::asinh(0.5 * s * std::sqrt(std::max(0.0, q)));
    }
    return std::sqrt(squared_distance(x, y));
}

inline double geodesic_distance(std::span<const double> x, std::span<const double> y,
                                const SpaceFormGeometry& g) {
    check_on_model(x, g);
    check_on_model(y, g);
    return geodesic_distance_unchecked(x, y, g.kappa);
}

inline Eigen::VectorXd base_point(const SpaceFormGeometry& g) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(g.model_dim());
    if (g.model() != Model::flat) b[0] = 1.0 / std::sqrt(std::abs(g.kappa));
    return b;
}

/// Exponential map at the base point along unit tangent `direction` (length d)
/// for geodesic length r.
inline void exp_map_from_base(const SpaceFormGeometry& g, double r, std::span<const double> direction,
                              std::span<double> out) {
    const int d = g.d;
    switch (g.model()) {
        case Model::flat:
            for (int k = 0; k < d; ++k) out[k] = r * direction[k];
            break;
        case Model::sphere: {
            const double s = std::sqrt(g.kappa);
            out[0] = std::cos(s * r) / s;
            const double radial = std::sin(s * r) / s;
            for (int k = 0; k < d; ++k) out[k + 1] = radial * direction[k];
            break;
        }
        case Model::hyperbolic: {
            const double s = std::sqrt(-g.kappa);
            out[0] = std::cosh(s * r) / s;
            const double radial = std::sinh(s * r) / s;
            for (int k = 0; k < d; ++k) out[k + 1] = radial * direction[k];
            break;
        }
    }
}

// ---------------------------------------------------------------------------
// Sampling

/// Monotone table of the radial CDF, density proportional to sn_kappa(r)^{d-1}
/// on [0, R]. Sampling inverts it by binary search and linear interpolation.
class RadialTable {
public:
    RadialTable(const SpaceFormGeometry& g, int nodes = 10000) : r_(nodes), cdf_(nodes, 0.0) {
        const double R = g.domain_radius;
        const int power = g.d - 1;
        auto density = [&](double t) { return power == 0 ? 1.0 : std::pow(sn_kappa(g.kappa, t), power); };
        for (int i = 0; i < nodes; ++i) r_[i] = R * i / (nodes - 1);
        // per-segment Simpson keeps the table accurate for large d
        for (int i = 1; i < nodes; ++i) {
            const double a = r_[i - 1], b = r_[i];
            cdf_[i] = cdf_[i - 1] + (b - a) / 6.0 * (density(a) + 4.0 * density(0.5 * (a + b)) + density(b));
        }
        const double total = cdf_.back();
        for (double& c : cdf_) c /= total;
        cdf_.back() = 1.0;
    }

    double sample(double u) const {
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.begin()) return r_.front();
        if (it == cdf_.end()) return r_.back();
        const auto hi = static_cast<std::size_t>(it - cdf_.begin());
        const std::size_t lo = hi - 1;
        const double span = cdf_[hi] - cdf_[lo];
        const double w = span > 0.0 ? (u - cdf_[lo]) / span : 0.0;
        return r_[lo] + w * (r_[hi] - r_[lo]);
    }

private:
    std::vector<double> r_;
    std::vector<double> cdf_;
};

/// Paired intrinsic/ambient point sets with the geometry they were drawn from.
struct ManifoldSample {
    SpaceFormGeometry geometry;
    Points intrinsic;         // n x model_dim
    Points ambient;           // n x ambient_dim, empty until embedded
    Eigen::VectorXd labels;   // empty when unlabeled
    int ambient_dim = 0;
    Seed seed = 0;

    Eigen::Index size() const { return intrinsic.rows(); }
    bool has_ambient() const { return ambient.rows() == intrinsic.rows() && ambient.cols() > 0; }
    bool has_labels() const { return labels.size() == intrinsic.rows() && labels.size() > 0; }
};

/// Uniform sample (w.r.t. Riemannian volume) from the geodesic ball of radius
/// geometry.domain_radius about the base point.
inline ManifoldSample sample_uniform_ball(const SpaceFormGeometry& g, Eigen::Index n, Seed seed) {
    g.validate();
    if (n < 1) throw DomainError("sample_uniform_ball: n must be >= 1");
    ManifoldSample s;
    s.geometry = g;
    s.seed = seed;
    s.intrinsic.resize(n, g.model_dim());

    const RadialTable table(g);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> dir(g.d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = table.sample(unif(rng));
        double norm2 = 0.0;
        do {
            norm2 = 0.0;
            for (double& v : dir) {
                v = normal(rng);
                norm2 += v * v;
            }
        } while (norm2 == 0.0);
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& v : dir) v *= inv;
        exp_map_from_base(g, r, dir, {s.intrinsic.data() + i * s.intrinsic.cols(),
                                      static_cast<std::size_t>(s.intrinsic.cols())});
    }
    return s;
}

/// Random D x D orthogonal matrix from the QR factorization of a seeded
/// Gaussian matrix.
inline Eigen::MatrixXd random_orthogonal(int D, Seed seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd G(D, D);
    for (int j = 0; j < D; ++j)
        for (int i = 0; i < D; ++i) G(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    return qr.householderQ() * Eigen::MatrixXd::Identity(D, D);
}

/// Zero-pads model coordinates to R^D and applies an orthogonal map. With no
/// seed the map is the identity.
inline ManifoldSample embed_ambient(ManifoldSample sample, int D, std::optional<Seed> seed) {
    const int mdim = sample.geometry.model_dim();
    if (D < mdim)
        throw DimensionError("embed_ambient: D=" + std::to_string(D) + " is smaller than the model dimension " +
                             std::to_string(mdim));
    sample.ambient_dim = D;
    if (!seed) {
        sample.ambient = Points::Zero(sample.size(), D);
        sample.ambient.leftCols(mdim) = sample.intrinsic;
        return sample;
    }
    const Eigen::MatrixXd Q = random_orthogonal(D, *seed);
    sample.ambient = sample.intrinsic * Q.leftCols(mdim).transpose();
    return sample;
}

enum class Task { regression, classification };

struct TaskOptions {
    double noise_sigma = 0.1;
    double flip_probability = 0.05;
};

/// Labels points with a target that is Lipschitz in geodesic distance:
/// regression y = cos(3 d_g(x, base)) + N(0, sigma^2); classification
/// y = sign of the first tangent coordinate at the base, flipped with the
/// given probability.
inline ManifoldSample make_task(ManifoldSample sample, Task task, Seed seed, TaskOptions opts = {}) {
    const auto& g = sample.geometry;
    if (sample.intrinsic.rows() == 0) throw DomainError("make_task: sample has no points");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Eigen::VectorXd base = base_point(g);
    const std::span<const double> base_span(base.data(), static_cast<std::size_t>(base.size()));
    const int first_tangent = g.model() == Model::flat ? 0 : 1;

    sample.labels.resize(sample.size());
    for (Eigen::Index i = 0; i < sample.size(); ++i) {
        const auto x = row_span(sample.intrinsic, i);
        if (task == Task::regression) {
            const double r = geodesic_distance_unchecked(x, base_span, g.kappa);
            const double eps = noise(rng);
            sample.labels[i] = std::cos(3.0 * r) + opts.noise_sigma * eps;
        } else {
            double y = x[first_tangent] >= 0.0 ? 1.0 : -1.0;
            if (unif(rng) < opts.flip_probability) y = -y;
            sample.labels[i] = y;
        }
    }
    return sample;
}

/// Pairwise closed-form geodesic distances between the intrinsic points.
inline DistanceMatrix geodesic_matrix(const ManifoldSample& s) {
    const auto n = static_cast<std::size_t>(s.size());
    DistanceMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = geodesic_distance_unchecked(row_span(s.intrinsic, i), row_span(s.intrinsic, j),
                                                         s.geometry.kappa);
            m(i, j) = v;
            m(j, i) = v;
        }
    return m;
}

}  // namespace geobound

#pragma once

// Intrinsic geometry of a point cloud: TwoNN dimension, k-NN graph
// geodesics and an effective constant curvature fitted to geodesic triangles.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "spaceform.hpp"
#include "types.hpp"

namespace geobound {

struct Neighbor {
    double dist;
    Eigen::Index index;
};

/// Exact k nearest neighbours (Euclidean) of every row, self excluded,
/// sorted by distance then index. Brute force: candidates come from blocked
/// Gram-matrix products on the centred cloud, then distances of the
/// candidates are recomputed directly so rounding in the Gram trick never
/// reaches the caller.
inline std::vector<std::vector<Neighbor>> nearest_neighbors(const Points& X, int k, unsigned threads = 0) {
    const Eigen::Index n = X.rows();
    if (k < 1 || k >= n) throw DomainError("nearest_neighbors: need 1 <= k < n");
    const Points C = X.rowwise() - X.colwise().mean();
    const Eigen::VectorXd sq = C.rowwise().squaredNorm();
    const int candidates = static_cast<int>(std::min<Eigen::Index>(n - 1, k + 4));

    constexpr Eigen::Index block = 256;
    const std::size_t blocks = static_cast<std::size_t>((n + block - 1) / block);
    std::vector<std::vector<Neighbor>> out(static_cast<std::size_t>(n));
    parallel_for(blocks, threads, [&](std::size_t b) {
        const Eigen::Index i0 = static_cast<Eigen::Index>(b) * block;
        const Eigen::Index rows = std::min(block, n - i0);
        const Eigen::MatrixXd G = C.middleRows(i0, rows) * C.transpose();
        std::vector<Neighbor> approx(static_cast<std::size_t>(n));
        for (Eigen::Index r = 0; r < rows; ++r) {
            const Eigen::Index i = i0 + r;
            std::size_t m = 0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                approx[m++] = {sq(i) + sq(j) - 2.0 * G(r, j), j};
            }
            auto by_dist = [](const Neighbor& a, const Neighbor& b) {
                return a.dist < b.dist || (a.dist == b.dist && a.index < b.index);
            };
            std::partial_sort(approx.begin(), approx.begin() + candidates, approx.begin() + m, by_dist);
            std::vector<Neighbor> exact(approx.begin(), approx.begin() + candidates);
            for (auto& nb : exact) nb.dist = std::sqrt(squared_distance(row_span(X, i), row_span(X, nb.index)));
            std::sort(exact.begin(), exact.end(), by_dist);
            exact.resize(static_cast<std::size_t>(k));
            out[static_cast<std::size_t>(i)] = std::move(exact);
        }
    });
    return out;
}

struct TwoNNResult {
    double d_hat = 0.0;
    std::size_t n_used = 0;        // points with r1 > 0
    std::size_t n_kept = 0;        // after discarding the largest ratios
    std::size_t n_duplicates = 0;  // points dropped because r1 == 0
};

/// TwoNN intrinsic dimension. mu_i = r2/r1 is Pareto(d) distributed; the
/// largest discard_fraction of the ratios are treated as right-censored at
/// the largest kept ratio, giving the censored maximum-likelihood estimate
///   d = n_kept / (sum_kept log mu + n_discarded * log mu_(n_kept)).
inline TwoNNResult twonn(const Points& X, double discard_fraction = 0.1, unsigned threads = 0) {
    if (X.rows() < 10) throw DegenerateInputError("twonn: need at least 10 points");
    if (!(discard_fraction >= 0.0 && discard_fraction < 1.0))
        throw DomainError("twonn: discard_fraction must lie in [0, 1)");
    const auto nn = nearest_neighbors(X, 2, threads);
    TwoNNResult res;
    std::vector<double> log_mu;
    log_mu.reserve(nn.size());
    for (const auto& row : nn) {
        if (!(row[0].dist > 0.0)) {
            ++res.n_duplicates;
            continue;
        }
        log_mu.push_back(std::log(row[1].dist / row[0].dist));
    }
    if (2 * res.n_duplicates > nn.size())
        throw DegenerateInputError("twonn: more than half of the points are duplicates");
    res.n_used = log_mu.size();
    std::sort(log_mu.begin(), log_mu.end());
    const auto kept = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor((1.0 - discard_fraction) * static_cast<double>(res.n_used))));
    res.n_kept = kept;
    double denom = 0.0;
    for (std::size_t i = 0; i < kept; ++i) denom += log_mu[i];
    denom += static_cast<double>(res.n_used - kept) * log_mu[kept - 1];
    if (!(denom > 0.0)) throw DegenerateInputError("twonn: all neighbour ratios equal one");
    res.d_hat = static_cast<double>(kept) / denom;
    return res;
}

inline double twonn_dimension(const Points& X, double discard_fraction = 0.1) {
    return twonn(X, discard_fraction).d_hat;
}

/// All-pairs shortest paths on the symmetric k-NN graph with Euclidean edge
/// weights (Dijkstra from every source, sources spread over the worker pool).
/// Throws DisconnectedGraphError when the graph has more than one component.
inline DistanceMatrix knn_geodesic_matrix(const Points& X, int k, unsigned threads = 0) {
    const auto n = static_cast<std::size_t>(X.rows());
    const auto nn = nearest_neighbors(X, k, threads);

    std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& nb : nn[i]) {
            const auto j = static_cast<std::size_t>(nb.index);
            adj[i].emplace_back(j, nb.dist);
            adj[j].emplace_back(i, nb.dist);
        }
    for (auto& edges : adj) {
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end(),
                                [](const auto& a, const auto& b) { return a.first == b.first; }),
                    edges.end());
    }

    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::function<std::size_t(std::size_t)> find = [&](std::size_t v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    };
    std::size_t components = n;
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& e : adj[i]) {
            const auto a = find(i), b = find(e.first);
            if (a != b) {
                parent[a] = b;
                --components;
            }
        }
    if (components > 1) throw DisconnectedGraphError(components, static_cast<std::size_t>(k));

    DistanceMatrix D(n);
    parallel_for(n, threads, [&](std::size_t s) {
        auto row = D.row(s);
        std::fill(row.begin(), row.end(), std::numeric_limits<double>::infinity());
        using Item = std::pair<double, std::size_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        row[s] = 0.0;
        pq.emplace(0.0, s);
        while (!pq.empty()) {
            const auto [du, u] = pq.top();
            pq.pop();
            if (du > row[u]) continue;
            for (const auto& [v, w] : adj[u]) {
                const double nd = du + w;
                if (nd < row[v]) {
                    row[v] = nd;
                    pq.emplace(nd, v);
                }
            }
        }
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = std::min(D(i, j), D(j, i));
            D(i, j) = m;
            D(j, i) = m;
        }
    return D;
}

namespace detail {

// sn_kappa(x) = sin(sqrt(k) x)/sqrt(k) (x for k = 0, sinh for k < 0).
inline double sn(double kappa, double x) { return sn_kappa(kappa, x); }

// h_kappa(x) = (1 - cs_kappa(x)) / kappa, i.e. 2 sin^2(sqrt(k) x/2)/k,
// continuous through x^2/2 at kappa = 0.
inline double hk(double kappa, double x) {
    if (kappa > 0.0) {
        const double s = std::sin(0.5 * std::sqrt(kappa) * x);
        return 2.0 * s * s / kappa;
    }
    if (kappa < 0.0) {
        const double s = std::sinh(0.5 * std::sqrt(-kappa) * x);
        return 2.0 * s * s / -kappa;
    }
    return 0.5 * x * x;
}

inline double hk_inverse(double kappa, double H) {
    H = std::max(H, 0.0);
    if (kappa > 0.0) {
        const double arg = std::min(1.0, std::sqrt(0.5 * kappa * H));
        return 2.0 / std::sqrt(kappa) * std::asin(arg);
    }
    if (kappa < 0.0) return 2.0 / std::sqrt(-kappa) * std::asinh(std::sqrt(-0.5 * kappa * H));
    return std::sqrt(2.0 * H);
}

// (sn(a) - sn(s) - sn(t)) / kappa without cancellation for small kappa a^2.
inline double sn_defect(double kappa, double a, double s, double t) {
    if (std::abs(kappa) * a * a >= 0.1) return (sn(kappa, a) - sn(kappa, s) - sn(kappa, t)) / kappa;
    double sum = 0.0, kpow = 1.0, fact = 6.0;
    double pa = a * a * a, ps = s * s * s, pt = t * t * t;
    for (int k = 1; k <= 8; ++k) {
        sum += (k % 2 ? -1.0 : 1.0) * kpow * (pa - ps - pt) / fact;
        kpow *= kappa;
        fact *= (2.0 * k + 2.0) * (2.0 * k + 3.0);
        pa *= a * a;
        ps *= s * s;
        pt *= t * t;
    }
    return sum;
}

}  // namespace detail

/// One apex-to-base comparison: apex at distances p, q from the base
/// endpoints, base length a, and a base point at distances s, t (s + t = a)
/// from the endpoints whose observed apex distance is `observed`.
struct TriangleSample {
    double p, q, a, s, t, observed;
};

/// Distance from the apex to the base point predicted by the space form of
/// curvature kappa (Stewart relation cs(m) sn(a) = cs(p) sn(t) + cs(q) sn(s)).
inline double space_form_cevian(double kappa, const TriangleSample& tr) {
    const double sa = detail::sn(kappa, tr.a);
    const double H = (detail::sn_defect(kappa, tr.a, tr.s, tr.t) + detail::hk(kappa, tr.p) * detail::sn(kappa, tr.t) +
                      detail::hk(kappa, tr.q) * detail::sn(kappa, tr.s)) /
                     sa;
    return detail::hk_inverse(kappa, H);
}

struct CurvatureOptions {
    int n_triangles = 500;
    Seed seed = 0;
    double max_height_ratio = 0.1;   // reject triangles whose best base point is farther off the base
    double max_offset_ratio = 0.25;  // base point must project within this fraction of a from the midpoint
};

struct CurvatureFit {
    double kappa = 0.0;
    std::size_t n_triangles = 0;
    std::size_t attempts = 0;
    int iterations = 0;
    bool converged = false;
    double q25 = 0.0, q75 = 0.0;
    std::vector<double> residuals;  // observed - predicted apex distance at the fitted kappa
};

/// Effective constant curvature from a geodesic distance matrix.
///
/// Triangles (apex, b, c) with all sides inside the interquartile range of
/// the pairwise distances are sampled. For each, the point m whose flat
/// comparison foot lies near the middle of bc and which sits closest to the
/// base (height h) stands in for the geodesic midpoint; its distance to the
/// apex, corrected by h, is compared with the space-form prediction. kappa is
/// the least-squares fit over all triangles (Gauss-Newton from kappa = 0).
/// Positive means sphere-like.
inline CurvatureFit estimate_curvature(const DistanceMatrix& G, const CurvatureOptions& opt = {}) {
    const std::size_t n = G.size();
    if (n < 50) throw DegenerateInputError("estimate_curvature: need at least 50 points");
    if (opt.n_triangles < 1) throw DomainError("estimate_curvature: n_triangles must be positive");
    std::mt19937_64 rng(opt.seed);

    CurvatureFit fit;
    {
        std::vector<double> pool;
        const std::size_t pairs = n * (n - 1) / 2;
        constexpr std::size_t cap = 2000000;
        if (pairs <= cap) {
            pool.reserve(pairs);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) pool.push_back(G(i, j));
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            pool.reserve(cap);
            while (pool.size() < cap) {
                const auto i = pick(rng), j = pick(rng);
                if (i != j) pool.push_back(G(i, j));
            }
        }
        auto quantile = [&](double q) {
            const auto idx = static_cast<std::size_t>(q * static_cast<double>(pool.size() - 1));
            std::nth_element(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(idx), pool.end());
            return pool[idx];
        };
        fit.q25 = quantile(0.25);
        fit.q75 = quantile(0.75);
    }
    auto in_range = [&](double v) { return v >= fit.q25 && v <= fit.q75 && v > 0.0; };

    std::vector<TriangleSample> tris;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const std::size_t max_attempts = 1000 * static_cast<std::size_t>(opt.n_triangles);
    while (tris.size() < static_cast<std::size_t>(opt.n_triangles) && fit.attempts < max_attempts) {
        ++fit.attempts;
        const auto apex = pick(rng), b = pick(rng), c = pick(rng);
        if (apex == b || apex == c || b == c) continue;
        const double a = G(b, c), p = G(apex, b), q = G(apex, c);
        if (!in_range(a) || !in_range(p) || !in_range(q)) continue;

        double best_h2 = std::numeric_limits<double>::infinity();
        std::size_t best = n;
        double best_x = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            if (m == b || m == c) continue;
            const double s = G(b, m), t = G(c, m);
            const double x = (s * s - t * t) / (2.0 * a);
            if (std::abs(x) > opt.max_offset_ratio * a) continue;
            const double along = 0.5 * a + x;
            const double h2 = s * s - along * along;
            if (h2 < best_h2) {
                best_h2 = h2;
                best = m;
                best_x = x;
            }
        }
        if (best == n || best == apex) continue;
        const double h2 = std::max(0.0, best_h2);
        if (h2 > opt.max_height_ratio * opt.max_height_ratio * a * a) continue;
        const double d_am = G(apex, best);
        tris.push_back({p, q, a, 0.5 * a + best_x, 0.5 * a - best_x, std::sqrt(std::max(0.0, d_am * d_am - h2))});
    }
    if (tris.size() < 10)
        throw InsufficientTrianglesError("estimate_curvature: only " + std::to_string(tris.size()) +
                                         " valid triangles found (need at least 10)");

    // Work in units of the median side so kappa is O(1) during the solve.
    std::vector<double> sides;
    double max_side = 0.0;
    for (const auto& t : tris) {
        sides.push_back(t.a);
        max_side = std::max({max_side, t.a, t.p, t.q});
    }
    std::nth_element(sides.begin(), sides.begin() + static_cast<std::ptrdiff_t>(sides.size() / 2), sides.end());
    const double scale = sides[sides.size() / 2];
    for (auto& t : tris) {
        t.p /= scale;
        t.q /= scale;
        t.a /= scale;
        t.s /= scale;
        t.t /= scale;
        t.observed /= scale;
    }
    const double k_hi = std::pow(0.999 * std::numbers::pi / (max_side / scale), 2);
    const double k_lo = -1e4;

    auto cost = [&](double kappa) {
        double c = 0.0;
        for (const auto& t : tris) {
            const double r = t.observed - space_form_cevian(kappa, t);
            c += r * r;
        }
        return c;
    };
    double kappa = 0.0;
    double current = cost(kappa);
    for (int it = 0; it < 100; ++it) {
        fit.iterations = it + 1;
        const double step = 1e-6 * std::max(1.0, std::abs(kappa));
        double jr = 0.0, jj = 0.0;
        for (const auto& t : tris) {
            const double r = t.observed - space_form_cevian(kappa, t);
            const double km = std::max(k_lo, kappa - step), kp = std::min(k_hi, kappa + step);
            const double dr = -(space_form_cevian(kp, t) - space_form_cevian(km, t)) / (kp - km);
            jr += dr * r;
            jj += dr * dr;
        }
        if (!(jj > 0.0)) break;
        double delta = -jr / jj;
        bool accepted = false;
        for (int half = 0; half < 40; ++half) {
            const double trial = std::clamp(kappa + delta, k_lo, k_hi);
            const double c = cost(trial);
            if (c <= current) {
                accepted = std::abs(trial - kappa) > 0.0;
                delta = trial - kappa;
                kappa = trial;
                current = c;
                break;
            }
            delta *= 0.5;
        }
        if (!accepted || std::abs(delta) < 1e-12 * std::max(1.0, std::abs(kappa))) {
            fit.converged = true;
            break;
        }
    }
    fit.kappa = kappa / (scale * scale);
    fit.n_triangles = tris.size();
    fit.residuals.reserve(tris.size());
    for (const auto& t : tris) fit.residuals.push_back((t.observed - space_form_cevian(kappa, t)) * scale);
    return fit;
}

struct EstimateOptions {
    int k = 10;
    int n_triangles = 500;
    Seed seed = 0;
    double discard_fraction = 0.1;
    std::size_t max_graph_points = 3000;
    unsigned threads = 0;
};

struct GeometryEstimate {
    double d_hat = 0.0;
    double kappa_hat = 0.0;
    double kappa_used = 0.0;  // kappa_hat clamped so the working cap stays inside a hemisphere
    std::size_t n_points = 0;
    std::size_t n_graph_points = 0;
    int k_graph = 0;
    std::size_t n_triangles = 0;
    std::size_t n_duplicates = 0;
    double domain_radius = 0.0;
    double inj = 0.0;
    double vol = 0.0;
    Seed seed = 0;
    std::vector<double> residuals;

    /// Working-domain geometry handed to the bounds module.
    SpaceFormGeometry geometry() const {
        SpaceFormGeometry g;
        g.d = std::max(1, static_cast<int>(std::lround(d_hat)));
        g.kappa = kappa_used;
        g.inj = inj;
        g.vol = vol;
        g.domain_radius = domain_radius;
        return g;
    }
};

/// TwoNN on all points; graph geodesics and curvature on a seeded subsample
/// of at most max_graph_points points. Domain surrogates: R = max graph
/// distance / 2, inj = R, vol = V(round(d_hat), kappa_used, R).
inline GeometryEstimate estimate_geometry(const Points& X, const EstimateOptions& opt = {}) {
    GeometryEstimate est;
    est.n_points = static_cast<std::size_t>(X.rows());
    est.seed = opt.seed;
    est.k_graph = opt.k;
    const auto tn = twonn(X, opt.discard_fraction, opt.threads);
    est.d_hat = tn.d_hat;
    est.n_duplicates = tn.n_duplicates;

    Points sub;
    if (static_cast<std::size_t>(X.rows()) > opt.max_graph_points) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(X.rows()));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(opt.max_graph_points);
        std::sort(idx.begin(), idx.end());
        sub.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = X.row(idx[r]);
    } else {
        sub = X;
    }
    est.n_graph_points = static_cast<std::size_t>(sub.rows());
    if (static_cast<std::size_t>(opt.k) + 1 > est.n_graph_points)
        throw DomainError("estimate_geometry: need at least k + 1 points");

    const auto G = knn_geodesic_matrix(sub, opt.k, opt.threads);
    double diam = 0.0;
    for (std::size_t i = 0; i < G.size(); ++i)
        for (double v : G.row(i)) diam = std::max(diam, v);
    if (!(diam > 0.0)) throw DegenerateInputError("estimate_geometry: all points coincide");

    CurvatureOptions co;
    co.n_triangles = opt.n_triangles;
    co.seed = opt.seed;
    const auto fit = estimate_curvature(G, co);
    est.kappa_hat = fit.kappa;
    est.n_triangles = fit.n_triangles;
    est.residuals = fit.residuals;

    est.domain_radius = 0.5 * diam;
    const double k_cap = std::pow(std::numbers::pi / (2.0 * est.domain_radius), 2);
    est.kappa_used = std::clamp(est.kappa_hat, -k_cap, k_cap);
    est.inj = est.domain_radius;
    const int d_round = std::max(1, static_cast<int>(std::lround(est.d_hat)));
    est.vol = space_form_ball_volume(d_round, est.kappa_used, est.domain_radius);
    return est;
}

}  // namespace geobound

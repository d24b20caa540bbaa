#pragma once

// Curvature-aware covering-number, Rademacher and generalization bounds for
// L-Lipschitz, B-bounded function classes on space forms, plus the Euclidean
// baselines they are compared against.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include "error.hpp"
#include "quadrature.hpp"
#include "spaceform.hpp"

namespace geobound {

/// Hypothesis class: L-Lipschitz functions with |f| <= B, trained with an
/// L_loss-Lipschitz loss.
struct FunctionClassSpec {
    double L = 1.0;
    double B = 1.0;
    double L_loss = 1.0;

    void validate() const {
        if (!(L > 0.0) || !(B > 0.0) || !(L_loss > 0.0) || !std::isfinite(L) || !std::isfinite(B) ||
            !std::isfinite(L_loss))
            throw DomainError("function class: L, B and L_loss must be positive and finite");
    }
};

/// Constants the theory leaves unspecified. c_pack is the c in C = c*d; the
/// Dudley pair gives a*alpha + (b/sqrt n) * integral; big_o_scale multiplies
/// every O(.) read-out.
struct BoundConstants {
    double c_pack = 1.0;
    double c_dudley_a = 4.0;
    double c_dudley_b = 12.0;
    double big_o_scale = 1.0;
    double delta = 0.05;

    void validate() const {
        if (!(c_pack > 0.0) || !(c_dudley_a > 0.0) || !(c_dudley_b > 0.0) || !(big_o_scale > 0.0))
            throw DomainError("bound constants must be positive");
        if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
    }
};

/// Curvature penalty sqrt|kappa|/L for kappa < 0, zero otherwise.
inline double psi(double kappa, double L) {
    if (!(L > 0.0)) throw DomainError("psi: L must be positive");
    return kappa < 0.0 ? std::sqrt(-kappa) / L : 0.0;
}

/// Upper bound on log N(M, eps, d_g):
///   log(Vol / V_kappa(eps/2)) + c_pack * d * sqrt|kappa| * eps,   eps < inj/2.
/// Space forms are homogeneous, so the infimum ball volume is V_kappa(eps/2).
inline double manifold_log_covering(const SpaceFormGeometry& g, double eps, const BoundConstants& c) {
    g.validate();
    c.validate();
    if (!(eps > 0.0) || !(eps < 0.5 * g.inj)) {
        std::ostringstream os;
        os << "manifold_log_covering: eps = " << eps << " must satisfy 0 < eps < inj/2 = " << 0.5 * g.inj;
        throw DomainError(os.str());
    }
    const double ball = space_form_ball_volume(g.d, g.kappa, 0.5 * eps);
    return std::log(g.vol / ball) + c.c_pack * g.d * std::sqrt(std::abs(g.kappa)) * eps;
}

/// Same bound with V_kappa(eps/2) replaced by its closed-form lower bound
/// (ball_volume_lower_bound); always >= manifold_log_covering.
inline double manifold_log_covering_closed_form(const SpaceFormGeometry& g, double eps,
                                                const BoundConstants& c) {
    g.validate();
    c.validate();
    if (!(eps > 0.0) || !(eps < 0.5 * g.inj))
        throw DomainError("manifold_log_covering_closed_form: eps must satisfy 0 < eps < inj/2");
    const double ball = ball_volume_lower_bound(g.d, g.kappa, 0.5 * eps);
    return std::log(g.vol / ball) + c.c_pack * g.d * std::sqrt(std::abs(g.kappa)) * eps;
}

/// ceil(exp(log_count)); values within 1e-12 (relative) above an integer
/// round down to it so exact counts like exp(log 16) stay 16.
inline double cover_count_from_log(double log_count) {
    if (log_count > 700.0) throw DomainError("covering number overflows double precision");
    const double v = std::exp(log_count);
    return std::max(1.0, std::ceil(v - v * 1e-12));
}

inline double manifold_cover_count(const SpaceFormGeometry& g, double eps, const BoundConstants& c) {
    return cover_count_from_log(manifold_log_covering(g, eps, c));
}

/// log N(F, eps, sup-norm) <= N(M, eps/2L, d_g) * log(4B/eps),
/// for 0 < eps < inj/(2L), eps < B (and eps/2L < inj/2 for the manifold cover).
inline double function_class_log_covering(const SpaceFormGeometry& g, const FunctionClassSpec& spec,
                                          double eps, const BoundConstants& c) {
    spec.validate();
    if (!(eps > 0.0)) throw DomainError("function_class_log_covering: eps must be positive");
    if (!(eps < g.inj / (2.0 * spec.L)))
        throw DomainError("function_class_log_covering: eps must be < inj/(2L)");
    if (!(eps < spec.B)) throw DomainError("function_class_log_covering: eps must be < B");
    const double count = manifold_cover_count(g, eps / (2.0 * spec.L), c);
    return count * std::log(4.0 * spec.B / eps);
}

/// Combined closed form
///   [d log(2L/eps) + c_pack sqrt|kappa| eps/L + log(Vol/omega_d)] * log(4B/eps).
/// The bracket is clamped at zero (a cover never has fewer than one element).
inline double combined_log_covering_closed_form(const SpaceFormGeometry& g, const FunctionClassSpec& spec,
                                                double eps, const BoundConstants& c) {
    spec.validate();
    if (!(eps > 0.0)) throw DomainError("combined_log_covering_closed_form: eps must be positive");
    const double bracket = g.d * std::log(2.0 * spec.L / eps) +
                           c.c_pack * std::sqrt(std::abs(g.kappa)) * eps / spec.L +
                           std::log(g.vol / unit_ball_volume(g.d));
    return std::max(0.0, bracket) * std::log(4.0 * spec.B / eps);
}

/// Largest eps (exclusive) for which the covering-number route applies:
/// eps < inj/(2L) and eps/(2L) < inj/2.
inline double covering_validity_limit(const SpaceFormGeometry& g, const FunctionClassSpec& spec) {
    return std::min(g.inj / (2.0 * spec.L), spec.L * g.inj);
}

/// log N(F, eps) as used inside the entropy integral: the covering-number
/// route below covering_validity_limit, the combined closed form above it.
inline double entropy_log_covering(const SpaceFormGeometry& g, const FunctionClassSpec& spec, double eps,
                                   const BoundConstants& c) {
    if (eps < covering_validity_limit(g, spec)) {
        const double count = manifold_cover_count(g, eps / (2.0 * spec.L), c);
        return count * std::log(4.0 * spec.B / eps);
    }
    return combined_log_covering_closed_form(g, spec, eps, c);
}

inline double entropy_integrand(const SpaceFormGeometry& g, const FunctionClassSpec& spec, double eps,
                                const BoundConstants& c) {
    return std::sqrt(std::max(0.0, entropy_log_covering(g, spec, eps, c)));
}

struct RademacherBound {
    double integral = 0.0;    // a*alpha + (b/sqrt n) * int_alpha^B sqrt(log N) d eps
    double asymptotic = 0.0;  // big_o_scale * sqrt(d log(L sqrt n) + psi) / n^{1/d}
    double alpha = 0.0;
    double entropy_integral = 0.0;
    std::size_t evaluations = 0;
    bool converged = true;
};

/// Explicit-rate form big_o_scale * sqrt(d log(L sqrt n) + psi(kappa, L)) / n^{1/d}.
inline double rademacher_asymptotic(int d, double kappa, const FunctionClassSpec& spec, double n,
                                    const BoundConstants& c) {
    const double inner = d * std::log(spec.L * std::sqrt(n)) + psi(kappa, spec.L);
    return c.big_o_scale * std::sqrt(std::max(0.0, inner)) / std::pow(n, 1.0 / d);
}

/// Dudley entropy bound at alpha = n^{-1/d}, integrated by adaptive Simpson
/// (relative tolerance 1e-6, at most 2e5 integrand evaluations), split at the
/// covering-route validity limit where the integrand switches form.
inline RademacherBound rademacher_bound(const SpaceFormGeometry& g, const FunctionClassSpec& spec, double n,
                                        const BoundConstants& c) {
    g.validate();
    spec.validate();
    c.validate();
    if (!(n >= 2.0)) throw DomainError("rademacher_bound: n must be >= 2");
    RademacherBound out;
    out.alpha = std::pow(n, -1.0 / g.d);
    const double upper = std::min(spec.B, g.inj / (2.0 * spec.L));
    if (!(out.alpha < upper)) {
        std::ostringstream os;
        os << "rademacher_bound: alpha = n^(-1/d) = " << out.alpha << " must be < min(B, inj/(2L)) = " << upper
           << "; n is too small for this geometry";
        throw DomainError(os.str());
    }

    auto G = [&](double eps) { return entropy_integrand(g, spec, eps, c); };
    constexpr std::size_t budget = 200000;
    constexpr double rel_tol = 1e-6;
    const double split = covering_validity_limit(g, spec);
    double integral = 0.0;
    if (split > out.alpha && split < spec.B) {
        const auto lo = adaptive_simpson(G, out.alpha, split, rel_tol, budget / 2);
        const auto hi = adaptive_simpson(G, split, spec.B, rel_tol, budget - lo.evaluations);
        integral = lo.value + hi.value;
        out.evaluations = lo.evaluations + hi.evaluations;
        out.converged = lo.converged && hi.converged;
    } else {
        const auto q = adaptive_simpson(G, out.alpha, spec.B, rel_tol, budget);
        integral = q.value;
        out.evaluations = q.evaluations;
        out.converged = q.converged;
    }
    out.entropy_integral = integral;
    out.integral = c.c_dudley_a * out.alpha + c.c_dudley_b / std::sqrt(n) * integral;
    out.asymptotic = rademacher_asymptotic(g.d, g.kappa, spec, n, c);
    return out;
}

/// 3B sqrt(log(2/delta) / (2n)).
inline double confidence_term(double B, double n, double delta) {
    return 3.0 * B * std::sqrt(std::log(2.0 / delta) / (2.0 * n));
}

/// 2 L_loss Rad_n + 3B sqrt(log(2/delta)/2n) with the integral-form Rad_n.
inline double generalization_bound(const SpaceFormGeometry& g, const FunctionClassSpec& spec, double n,
                                   const BoundConstants& c) {
    const auto rad = rademacher_bound(g, spec, n, c);
    return 2.0 * spec.L_loss * rad.integral + confidence_term(spec.B, n, c.delta);
}

/// Generalization bound with the explicit-rate Rademacher form.
inline double explicit_generalization_bound(int d, double kappa, const FunctionClassSpec& spec, double n,
                                            const BoundConstants& c) {
    spec.validate();
    c.validate();
    if (!(n >= 1.0) || d < 1) throw DomainError("explicit_generalization_bound: need d >= 1 and n >= 1");
    return 2.0 * spec.L_loss * rademacher_asymptotic(d, kappa, spec, n, c) + confidence_term(spec.B, n, c.delta);
}

struct EuclideanBaseline {
    double rademacher = 0.0;
    double generalization = 0.0;
};

/// Ambient-dimension baseline Rad = big_o_scale * L * B * sqrt(D/n), composed
/// into the same outer generalization form.
inline EuclideanBaseline euclidean_baseline(int D, const FunctionClassSpec& spec, double n,
                                            const BoundConstants& c) {
    spec.validate();
    c.validate();
    if (D < 1 || !(n >= 1.0)) throw DomainError("euclidean_baseline: need D >= 1 and n >= 1");
    EuclideanBaseline out;
    out.rademacher = c.big_o_scale * spec.L * spec.B * std::sqrt(static_cast<double>(D) / n);
    out.generalization = 2.0 * spec.L_loss * out.rademacher + confidence_term(spec.B, n, c.delta);
    return out;
}

/// 100 * (euclidean - ours) / euclidean. Negative when ours is looser.
inline double improvement(double ours, double euclidean) {
    if (!(euclidean > 0.0)) throw DomainError("improvement: euclidean bound must be positive");
    return 100.0 * (euclidean - ours) / euclidean;
}

/// All bounds for one configuration.
struct BoundReport {
    SpaceFormGeometry geometry;
    FunctionClassSpec spec;
    BoundConstants constants;
    double n = 0.0;
    int D = 0;
    double eps = 0.0;

    double log_cover_manifold = 0.0;
    double log_cover_class = 0.0;
    double log_cover_class_closed_form = 0.0;
    double rademacher = 0.0;
    double rademacher_asymptotic = 0.0;
    double gen_bound = 0.0;
    double gen_bound_explicit = 0.0;
    double euclidean_rademacher = 0.0;
    double euclidean_gen_bound = 0.0;
    double ambient_gen_bound_explicit = 0.0;
    double improvement_pct = 0.0;
    double psi = 0.0;
    bool quadrature_converged = true;
};

/// Evaluates every bound. `eps` for the covering read-outs defaults to the
/// Dudley cutoff alpha = n^{-1/d}. improvement_pct compares the explicit-rate
/// generalization bound at the intrinsic (d, kappa) against the same bound on
/// the flat ambient space (d = D, kappa = 0).
inline BoundReport evaluate_bounds(const SpaceFormGeometry& g, const FunctionClassSpec& spec, double n, int D,
                                   const BoundConstants& c, std::optional<double> eps = std::nullopt) {
    BoundReport r;
    r.geometry = g;
    r.spec = spec;
    r.constants = c;
    r.n = n;
    r.D = D;

    const auto rad = rademacher_bound(g, spec, n, c);
    r.eps = eps ? *eps : rad.alpha;
    r.log_cover_manifold = manifold_log_covering(g, std::min(r.eps, 0.5 * g.inj * (1.0 - 1e-12)), c);
    if (r.eps < covering_validity_limit(g, spec) && r.eps < spec.B)
        r.log_cover_class = function_class_log_covering(g, spec, r.eps, c);
    else
        r.log_cover_class = combined_log_covering_closed_form(g, spec, r.eps, c);
    r.log_cover_class_closed_form = combined_log_covering_closed_form(g, spec, r.eps, c);
    r.rademacher = rad.integral;
    r.rademacher_asymptotic = rad.asymptotic;
    r.quadrature_converged = rad.converged;
    r.gen_bound = 2.0 * spec.L_loss * rad.integral + confidence_term(spec.B, n, c.delta);
    r.gen_bound_explicit = explicit_generalization_bound(g.d, g.kappa, spec, n, c);

    const auto base = euclidean_baseline(D, spec, n, c);
    r.euclidean_rademacher = base.rademacher;
    r.euclidean_gen_bound = base.generalization;
    r.ambient_gen_bound_explicit = explicit_generalization_bound(D, 0.0, spec, n, c);
    r.improvement_pct = improvement(r.gen_bound_explicit, r.ambient_gen_bound_explicit);
    r.psi = psi(g.kappa, spec.L);

    for (double v : {r.log_cover_class, r.rademacher, r.gen_bound, r.euclidean_rademacher, r.euclidean_gen_bound})
        if (!std::isfinite(v) || v < 0.0) throw DomainError("evaluate_bounds: non-finite or negative bound");
    return r;
}

}  // namespace geobound

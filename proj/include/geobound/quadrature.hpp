#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>

namespace geobound {

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
    std::size_t evaluations = 0;
    bool converged = true;
};

namespace detail {

template <class F>
struct SimpsonState {
    F& f;
    double abs_tol;
    std::size_t max_evals;
    std::size_t evals = 0;
    double error = 0.0;
    bool converged = true;

    double eval(double x) {
        ++evals;
        return f(x);
    }

    // Lyness-style recursion: accept when the two-panel estimate agrees with
    // the one-panel estimate to 15*tol, then apply the Richardson correction.
    double refine(double a, double b, double fa, double fm, double fb, double whole,
                  double tol, int depth) {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m);
        const double rm = 0.5 * (m + b);
        const double flm = eval(lm);
        const double frm = eval(rm);
        const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        const double delta = left + right - whole;
        if (std::abs(delta) <= 15.0 * tol || depth <= 0 || evals + 2 > max_evals) {
            if (std::abs(delta) > 15.0 * tol) converged = false;
            error += std::abs(delta) / 15.0;
            return left + right + delta / 15.0;
        }
        return refine(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
               refine(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }
};

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b].
///
/// The relative tolerance is converted into an absolute one using a coarse
/// 64-panel composite Simpson estimate of the integral. At most `max_evals`
/// integrand evaluations are spent; when the cap is hit the best estimate is
/// returned with `converged == false`.
template <class F>
QuadratureResult adaptive_simpson(F&& f, double a, double b, double rel_tol,
                                  std::size_t max_evals = 200000, int max_depth = 50) {
    QuadratureResult out;
    if (!(b > a)) return out;

    constexpr int panels = 64;
    const double h = (b - a) / panels;
    double nodes[2 * panels + 1];
    detail::SimpsonState<F> st{f, 0.0, max_evals};
    for (int i = 0; i <= 2 * panels; ++i) nodes[i] = st.eval(a + 0.5 * h * i);

    double coarse = 0.0;
    double panel_value[panels];
    for (int p = 0; p < panels; ++p) {
        panel_value[p] = h / 6.0 * (nodes[2 * p] + 4.0 * nodes[2 * p + 1] + nodes[2 * p + 2]);
        coarse += panel_value[p];
    }
    double scale = std::abs(coarse);
    if (scale == 0.0) {
        for (int i = 0; i <= 2 * panels; ++i) scale = std::max(scale, std::abs(nodes[i]) * (b - a));
    }
    st.abs_tol = rel_tol * (scale > 0.0 ? scale : 1.0);

    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double pa = a + h * p;
        total += st.refine(pa, pa + h, nodes[2 * p], nodes[2 * p + 1], nodes[2 * p + 2],
                           panel_value[p], st.abs_tol / panels, max_depth);
    }
    out.value = total;
    out.error_estimate = st.error;
    out.evaluations = st.evals;
    out.converged = st.converged;
    return out;
}

}  // namespace geobound

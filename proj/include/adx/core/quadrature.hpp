#pragma once

// Adaptive Simpson quadrature, scalar and multi-weight variants.
//
// The multi-weight form evaluates a family of integrands that share the same
// expensive inner factors (density, conditional cdf) in one pass; the error
// control is on the max component. Returns the error estimate so callers can
// surface non-convergence with the achieved tolerance.

#include <array>
#include <cmath>
#include <cstddef>

namespace adx {

constexpr int kQuadMaxWeights = 16;

namespace detail {

template <class F>
struct SimpsonVec {
    F& f;
    int n;
    double abs_tol;
    int max_depth;
    double achieved = 0.0;

    using Vals = std::array<double, kQuadMaxWeights>;

    void eval(double x, Vals& out) {
        for (int i = 0; i < n; ++i) out[i] = 0.0;
        f(x, out.data());
    }

    static void simpson(const Vals& fa, const Vals& fm, const Vals& fb, double h,
                        int n, Vals& out) {
        for (int i = 0; i < n; ++i) out[i] = h / 6.0 * (fa[i] + 4.0 * fm[i] + fb[i]);
    }

    void recurse(double a, double b, const Vals& fa, const Vals& fm, const Vals& fb,
                 const Vals& whole, double tol, int depth, Vals& acc) {
        double m = 0.5 * (a + b);
        double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
        Vals flm, frm, left, right;
        eval(lm, flm);
        eval(rm, frm);
        simpson(fa, flm, fm, m - a, n, left);
        simpson(fm, frm, fb, b - m, n, right);
        double err = 0.0;
        for (int i = 0; i < n; ++i)
            err = std::max(err, std::abs(left[i] + right[i] - whole[i]) / 15.0);
        if (err <= tol || depth >= max_depth) {
            if (depth >= max_depth) achieved = std::max(achieved, err);
            for (int i = 0; i < n; ++i)
                acc[i] += left[i] + right[i] + (left[i] + right[i] - whole[i]) / 15.0;
            return;
        }
        recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, acc);
        recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, acc);
    }

    // out[0..n) += integral; returns max residual where the depth cap was hit.
    double run(double a, double b, double* out) {
        if (!(b > a)) return 0.0;
        Vals fa, fm, fb, whole, acc{};
        eval(a, fa);
        eval(0.5 * (a + b), fm);
        eval(b, fb);
        simpson(fa, fm, fb, b - a, n, whole);
        for (int i = 0; i < n; ++i) acc[i] = 0.0;
        recurse(a, b, fa, fm, fb, whole, abs_tol, 0, acc);
        for (int i = 0; i < n; ++i) out[i] += acc[i];
        return achieved;
    }
};

} // namespace detail

// Integrates n coupled weights of f(x, out) over [a, b]; accumulates into out.
template <class F>
double integrate_weights(F&& f, int n, double a, double b, double abs_tol, double* out,
                         int max_depth = 32) {
    detail::SimpsonVec<F> s{f, n, abs_tol, max_depth};
    return s.run(a, b, out);
}

template <class F>
double integrate(F&& f, double a, double b, double abs_tol, int max_depth = 40) {
    double out = 0.0;
    auto wrap = [&](double x, double* o) { o[0] = f(x); };
    integrate_weights(wrap, 1, a, b, abs_tol, &out, max_depth);
    return out;
}

} // namespace adx

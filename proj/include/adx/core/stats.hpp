#pragma once

// Normal-family special functions: univariate pdf/cdf/quantile, log-normal
// helpers, and multivariate normal rectangle probabilities up to small
// dimension (computed by conditioning on the last coordinate and integrating
// the lower-dimensional cdf).

#include <algorithm>
#include <cmath>
#include <vector>

#include "adx/core/errors.hpp"
#include "adx/core/quadrature.hpp"

namespace adx {

inline constexpr double kSqrt2 = 1.4142135623730950488;
inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;

inline double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

inline double norm_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

// Inverse standard normal cdf. Bisection to a coarse bracket, then Newton.
inline double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -INFINITY;
        if (p == 1.0) return INFINITY;
        throw ConfigError("norm_quantile: p outside [0,1]");
    }
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 30; ++i) {
        double mid = 0.5 * (lo + hi);
        if (norm_cdf(mid) < p)
            lo = mid;
        else
            hi = mid;
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 5; ++i) {
        double err = norm_cdf(x) - p;
        double d = norm_pdf(x);
        if (d <= 0.0) break;
        double step = err / d;
        step = std::clamp(step, -1.0, 1.0);
        x -= step;
    }
    return x;
}

// Gauss-Legendre nodes/weights on [-1, 1], computed once per order by Newton
// iteration on the Legendre recurrence.
struct GaussLegendre {
    std::vector<double> nodes, weights;
};

inline const GaussLegendre& gauss_legendre(int n) {
    static GaussLegendre cache[65];
    GaussLegendre& gl = cache[n];
    if (!gl.nodes.empty()) return gl;
    gl.nodes.resize(n);
    gl.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        gl.nodes[i] = -x;
        gl.nodes[n - 1 - i] = x;
        gl.weights[i] = gl.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
    return gl;
}

// --- log-normal ---------------------------------------------------------

inline double lognorm_cdf(double x, double mu, double sigma) {
    if (x <= 0.0) return 0.0;
    if (sigma <= 0.0) return std::log(x) >= mu ? 1.0 : 0.0;
    return norm_cdf((std::log(x) - mu) / sigma);
}

inline double lognorm_sf(double x, double mu, double sigma) { return 1.0 - lognorm_cdf(x, mu, sigma); }

inline double lognorm_pdf(double x, double mu, double sigma) {
    if (x <= 0.0 || sigma <= 0.0) return 0.0;
    double z = (std::log(x) - mu) / sigma;
    return norm_pdf(z) / (x * sigma);
}

inline double lognorm_quantile(double p, double mu, double sigma) {
    return std::exp(mu + sigma * norm_quantile(p));
}

inline double lognorm_mean(double mu, double var) { return std::exp(mu + 0.5 * var); }

// --- multivariate normal rectangle probability --------------------------

// Bivariate normal cdf via the correlation-derivative identity
// d/dr P{Z1<=x, Z2<=y; r} = phi2(x, y; r), integrated from independence with
// fixed Gauss-Legendre nodes; high correlations fall back to conditioning.
inline double bvn_cdf(double x, double y, double rho) {
    constexpr double kTail = 9.0;
    rho = std::clamp(rho, -1.0, 1.0);
    if (rho >= 1.0 - 1e-14) return norm_cdf(std::min(x, y));
    if (rho <= -1.0 + 1e-14) return std::max(0.0, norm_cdf(x) + norm_cdf(y) - 1.0);
    if (x > kTail && y > kTail) return 1.0;
    if (x < -kTail || y < -kTail) return 0.0;
    if (std::abs(rho) < 1e-14) return norm_cdf(x) * norm_cdf(y);
    if (std::abs(rho) <= 0.928) {
        const GaussLegendre& gl = gauss_legendre(24);
        double acc = 0.0;
        for (int i = 0; i < 24; ++i) {
            double r = 0.5 * rho * (gl.nodes[i] + 1.0);
            double omr2 = 1.0 - r * r;
            acc += gl.weights[i] *
                   std::exp(-(x * x - 2.0 * r * x * y + y * y) / (2.0 * omr2)) /
                   std::sqrt(omr2);
        }
        acc *= 0.5 * rho / (2.0 * 3.14159265358979323846);
        return std::clamp(norm_cdf(x) * norm_cdf(y) + acc, 0.0, 1.0);
    }
    // |rho| near 1: condition on the first coordinate.
    if (y < x) std::swap(x, y);
    double denom = std::sqrt(1.0 - rho * rho);
    double hi = std::min(x, kTail);
    auto f = [&](double t) { return norm_pdf(t) * norm_cdf((y - rho * t) / denom); };
    return std::clamp(integrate(f, -kTail, hi, 1e-12), 0.0, 1.0);
}

// P{Z_i <= b_i, i=1..k} for Z ~ N(0, R), R a correlation matrix (row-major).
// k <= 2 closed/fast paths; k >= 3 by conditioning on the last coordinate.
inline double mvn_cdf(const double* b, const double* corr, int k) {
    constexpr double kTail = 9.0;
    if (k <= 0) return 1.0;
    if (k == 1) return norm_cdf(b[0]);
    if (k == 2) return bvn_cdf(b[0], b[1], corr[1]);
    // Condition on the last coordinate.
    int m = k - 1;
    std::vector<double> r(static_cast<std::size_t>(k), 0.0);
    for (int i = 0; i < k; ++i) r[i] = std::clamp(corr[i * k + (k - 1)], -1.0, 1.0);
    std::vector<double> sub_corr(static_cast<std::size_t>(m * m), 0.0);
    std::vector<double> cond_sd(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i)
        cond_sd[i] = std::sqrt(std::max(1e-28, 1.0 - r[i] * r[i]));
    for (int i = 0; i < m; ++i) {
        sub_corr[i * m + i] = 1.0;
        for (int j = 0; j < i; ++j) {
            double c = (corr[i * k + j] - r[i] * r[j]) / (cond_sd[i] * cond_sd[j]);
            c = std::clamp(c, -1.0, 1.0);
            sub_corr[i * m + j] = sub_corr[j * m + i] = c;
        }
    }
    double hi = std::min(b[k - 1], kTail);
    if (hi < -kTail) return 0.0;
    std::vector<double> cb(static_cast<std::size_t>(m), 0.0);
    auto f = [&](double t) {
        for (int i = 0; i < m; ++i) cb[i] = (b[i] - r[i] * t) / cond_sd[i];
        return norm_pdf(t) * mvn_cdf(cb.data(), sub_corr.data(), m);
    };
    return std::clamp(integrate(f, -kTail, hi, k == 3 ? 1e-10 : 1e-9), 0.0, 1.0);
}

} // namespace adx

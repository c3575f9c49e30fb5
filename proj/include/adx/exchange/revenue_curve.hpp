#pragma once

// Revenue curves r(s) over survival probability and the optimal-response
// problem R(c) = max_s r(s) + (1-s)c.
//
// Two query paths:
//  * analytic: for parametric bid models the least maximizer is found by
//    bisecting the monotone marginal p(s) - F_bar(p)/f(p) - c, giving
//    reserve prices to root-finding accuracy;
//  * envelope: every curve precomputes the upper concave envelope of its
//    vertices as a maximum of affine functions of c, giving O(log n) queries
//    that are exactly convex/monotone - the form the dual solver, fluid
//    evaluator and simulator consume.
// Non-concave (empirical) grids only enter the optimizer through the
// envelope, i.e. through their concave majorant.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "adx/core/errors.hpp"
#include "adx/core/quadrature.hpp"
#include "adx/exchange/bid_model.hpp"

namespace adx::exchange {

struct ExchangeResponse {
    double survival = 0.0;     // s*(c), least maximizer
    Price reserve;             // p*(c)
    double value = 0.0;        // R(c)
    double spot_revenue = 0.0; // r(s*(c)), the exchange-revenue component
};

struct CurvePoint {
    double s = 0.0;
    Price p;
    double r = 0.0;
};

// Expected second-price revenue E[1{B1:K >= p} max(B2:K, p)] for K iid values,
// by integrating the order-statistic density of the runner-up bid.
inline double second_price_expected_revenue(const CdfFamily& f, int k, double p) {
    if (std::isinf(p)) return 0.0;
    p = std::max(p, 0.0);
    double lo = std::max(p, f.support_lo());
    double hi = std::isinf(f.support_hi()) ? std::max(lo, f.quantile(1.0 - 1e-13))
                                           : f.support_hi();
    double tail = 0.0;
    if (k >= 2 && hi > lo) {
        auto integrand = [&](double b) {
            double F = f.cdf(b);
            return b * std::pow(F, k - 2) * f.pdf(b) * (1.0 - F);
        };
        tail = k * (k - 1) * integrate(integrand, lo, hi, 1e-10 * (1.0 + f.mean()));
    }
    double F = f.cdf(p);
    double point = k * p * std::pow(F, k - 1) * (1.0 - F);
    return tail + point;
}

// Sample-average revenue estimator at a given reserve price.
inline double empirical_revenue_at_price(const std::vector<BidSample>& samples, double p) {
    if (samples.empty()) throw ConfigError("empirical estimator needs >= 1 sample");
    double acc = 0.0;
    for (const auto& s : samples)
        if (s.highest >= p) acc += std::max(s.second_highest, p);
    return acc / static_cast<double>(samples.size());
}

namespace detail {

// Reserve as a function of survival: single bidder inverts the survival
// function, K bidders invert 1 - F^K.
inline double reserve_of_survival(const CdfFamily& f, int k, double s) {
    if (k == 1) return f.sf_inv(s);
    return f.quantile(std::pow(1.0 - s, 1.0 / k));
}

} // namespace detail

// Maximum over affine functions {r_i + (1 - s_i) c}, precomputed from the
// upper concave hull of curve vertices. Breakpoints are the hull-edge slopes
// dr/ds, increasing as s decreases; ties resolve to the smaller s.
class ResponseOracle {
public:
    ResponseOracle() = default;

    // vertices: any (s, p, r) set; duplicates and dominated points are dropped.
    explicit ResponseOracle(std::vector<CurvePoint> vertices) {
        if (vertices.empty()) throw ConfigError("response oracle needs vertices");
        std::sort(vertices.begin(), vertices.end(),
                  [](const CurvePoint& a, const CurvePoint& b) {
                      return a.s < b.s || (a.s == b.s && a.r > b.r);
                  });
        // Dedupe equal s keeping the best r.
        std::vector<CurvePoint> pts;
        for (const auto& v : vertices) {
            if (!pts.empty() && v.s == pts.back().s) continue;
            pts.push_back(v);
        }
        // Upper concave hull over (s, r), ascending s.
        std::vector<CurvePoint> hull;
        for (const auto& v : pts) {
            while (hull.size() >= 2) {
                const auto& a = hull[hull.size() - 2];
                const auto& b = hull[hull.size() - 1];
                double cross = (b.r - a.r) * (v.s - a.s) - (v.r - a.r) * (b.s - a.s);
                if (cross <= 0.0)
                    hull.pop_back(); // b under or on segment a-v
                else
                    break;
            }
            hull.push_back(v);
        }
        // Store in descending s; slopes between consecutive vertices increase.
        verts_.assign(hull.rbegin(), hull.rend());
        slopes_.clear();
        for (std::size_t i = 0; i + 1 < verts_.size(); ++i) {
            double ds = verts_[i].s - verts_[i + 1].s;
            slopes_.push_back((verts_[i].r - verts_[i + 1].r) / ds);
        }
    }

    ExchangeResponse query(double c) const {
        std::size_t k = static_cast<std::size_t>(
            std::upper_bound(slopes_.begin(), slopes_.end(), c) - slopes_.begin());
        const CurvePoint& v = verts_[k];
        ExchangeResponse out;
        out.survival = v.s;
        out.reserve = v.p;
        out.spot_revenue = v.r;
        out.value = v.r + (1.0 - v.s) * c;
        return out;
    }

    const std::vector<CurvePoint>& vertices() const { return verts_; }
    const std::vector<double>& breakpoints() const { return slopes_; }

    // Hull revenue at a target survival (linear between hull vertices,
    // attainable by randomizing between the two adjacent reserves).
    double revenue_at_survival(double s) const {
        if (verts_.size() == 1) return verts_.front().r;
        if (s >= verts_.front().s) return verts_.front().r;
        if (s <= verts_.back().s) return verts_.back().r;
        for (std::size_t i = 0; i + 1 < verts_.size(); ++i) {
            if (s <= verts_[i].s && s >= verts_[i + 1].s) {
                double w = (s - verts_[i + 1].s) / (verts_[i].s - verts_[i + 1].s);
                return w * verts_[i].r + (1.0 - w) * verts_[i + 1].r;
            }
        }
        return verts_.back().r;
    }

private:
    std::vector<CurvePoint> verts_; // descending s
    std::vector<double> slopes_;    // breakpoints in c
};

class RevenueCurve {
public:
    RevenueCurve() = default;

    RevenueCurve(std::vector<CurvePoint> grid, BidModel model, bool analytic,
                 std::vector<CurvePoint> envelope_vertices = {})
        : grid_(std::move(grid)),
          model_(std::move(model)),
          analytic_(analytic),
          envelope_vertices_(std::move(envelope_vertices)) {
        validate_grid();
        build_envelope();
    }

    const std::vector<CurvePoint>& grid() const { return grid_; }
    const BidModel& model() const { return model_; }
    bool has_analytic() const { return analytic_; }
    const ResponseOracle& oracle() const { return oracle_; }

    void write_csv(std::ostream& os) const {
        os << "s,p,r\n";
        for (const auto& pt : grid_) {
            os << pt.s << ',';
            if (pt.p.is_null)
                os << "inf";
            else
                os << pt.p.value;
            os << ',' << pt.r << '\n';
        }
    }

private:
    void validate_grid() const {
        if (grid_.size() < 2) throw ConfigError("revenue curve needs >= 2 grid points");
        if (grid_.front().s != 0.0 || grid_.back().s != 1.0)
            throw ConfigError("revenue curve grid must cover s=0 and s=1");
        if (std::abs(grid_.front().r) > 1e-9)
            throw ConfigError("revenue curve must satisfy r(0) = 0");
        double prev_s = -1.0;
        double prev_p = INFINITY;
        for (const auto& pt : grid_) {
            if (!(pt.s > prev_s)) throw ConfigError("curve grid must be strictly increasing in s");
            if (pt.r < -1e-12 || !std::isfinite(pt.r))
                throw ConfigError("curve r must be non-negative and bounded");
            double pv = pt.p.is_null ? INFINITY : pt.p.value;
            if (pv > prev_p + 1e-9) throw ConfigError("curve p must be non-increasing in s");
            prev_p = std::min(prev_p, pv);
            prev_s = pt.s;
        }
    }

    void build_envelope() {
        if (!envelope_vertices_.empty()) {
            oracle_ = ResponseOracle(envelope_vertices_);
            return;
        }
        if (analytic_) {
            // Dense refinement so envelope queries track the analytic curve.
            std::vector<double> svals;
            const int n = 2049;
            svals.reserve(n + 96);
            for (int j = 0; j < n; ++j) svals.push_back(double(j) / (n - 1));
            for (int k = 12; k <= 44; ++k) {
                svals.push_back(std::ldexp(1.0, -k));
                svals.push_back(1.0 - std::ldexp(1.0, -k));
            }
            std::vector<CurvePoint> pts;
            pts.reserve(svals.size());
            if (model_.kind() == BidModel::Kind::SecondPrice && model_.bidders() >= 2) {
                build_second_price_vertices(svals, pts);
            } else {
                for (double s : svals) add_analytic_vertex(pts, s);
            }
            oracle_ = ResponseOracle(std::move(pts));
        } else {
            oracle_ = ResponseOracle(grid_);
        }
    }

    // One cumulative sweep of the runner-up order-statistic integral instead
    // of an adaptive quadrature per vertex.
    void build_second_price_vertices(std::vector<double> svals,
                                     std::vector<CurvePoint>& pts) const {
        const CdfFamily& f = model_.family();
        const int k = model_.bidders();
        std::sort(svals.begin(), svals.end());
        svals.erase(std::unique(svals.begin(), svals.end()), svals.end());
        // descending price order = ascending s order
        std::vector<double> prices(svals.size());
        for (std::size_t i = 0; i < svals.size(); ++i)
            prices[i] = svals[i] <= 0.0 ? INFINITY
                                        : detail::reserve_of_survival(f, k, svals[i]);
        double hi = std::isinf(f.support_hi()) ? f.quantile(1.0 - 1e-13) : f.support_hi();
        auto integrand = [&](double b) {
            double F = f.cdf(b);
            return b * std::pow(F, k - 2) * f.pdf(b) * (1.0 - F);
        };
        auto simpson = [&](double a, double b) {
            if (!(b > a)) return 0.0;
            double m = 0.5 * (a + b);
            double m1 = 0.5 * (a + m), m2 = 0.5 * (m + b);
            return (b - a) / 12.0 *
                   (integrand(a) + 4.0 * integrand(m1) + 2.0 * integrand(m) +
                    4.0 * integrand(m2) + integrand(b));
        };
        double tail = 0.0;
        double upper = hi;
        pts.resize(svals.size());
        for (std::size_t i = svals.size(); i-- > 0;) {
            double p = prices[i];
            CurvePoint pt;
            pt.s = svals[i];
            if (std::isinf(p)) {
                pt.p = Price::null_price();
                pt.r = 0.0;
            } else {
                double lo = std::min(p, upper);
                tail += simpson(lo, upper);
                upper = lo;
                double F = f.cdf(p);
                pt.p = Price::of(p);
                pt.r = k * (k - 1) * tail + k * p * std::pow(F, k - 1) * (1.0 - F);
            }
            pts[i] = pt;
        }
    }

    void add_analytic_vertex(std::vector<CurvePoint>& pts, double s) const;

    std::vector<CurvePoint> grid_;
    BidModel model_;
    bool analytic_ = false;
    std::vector<CurvePoint> envelope_vertices_;
    ResponseOracle oracle_;
};

namespace detail {

inline CurvePoint analytic_point(const BidModel& model, double s) {
    CurvePoint pt;
    pt.s = s;
    switch (model.kind()) {
        case BidModel::Kind::NullExchange:
            pt.p = s > 0.0 ? Price::of(0.0) : Price::null_price();
            pt.r = 0.0;
            return pt;
        case BidModel::Kind::SingleBidder: {
            if (s <= 0.0) {
                double hi = model.family().support_hi();
                pt.p = std::isinf(hi) ? Price::null_price() : Price::of(hi);
                pt.r = 0.0;
                return pt;
            }
            double p = model.family().sf_inv(s);
            pt.p = Price::of(p);
            pt.r = s * std::max(p, 0.0);
            return pt;
        }
        case BidModel::Kind::SecondPrice: {
            int k = model.bidders();
            if (s <= 0.0) {
                double hi = model.family().support_hi();
                pt.p = std::isinf(hi) ? Price::null_price() : Price::of(hi);
                pt.r = 0.0;
                return pt;
            }
            double p = reserve_of_survival(model.family(), k, s);
            pt.p = Price::of(p);
            pt.r = second_price_expected_revenue(model.family(), k, p);
            return pt;
        }
        case BidModel::Kind::Empirical:
            throw ConfigError("analytic_point on empirical model");
    }
    return pt;
}

} // namespace detail

inline void RevenueCurve::add_analytic_vertex(std::vector<CurvePoint>& pts, double s) const {
    pts.push_back(detail::analytic_point(model_, s));
}

// Builds the (s, p, r) grid for a bid model. Uniform survival grid covering
// [0, 1]; empirical prices are lower sample quantiles of the top bid and
// revenues the sample-average estimator at those prices.
inline RevenueCurve build_revenue_curve(const BidModel& model, int grid_points = 100) {
    if (grid_points < 2) throw ConfigError("grid_points must be >= 2");
    model.validate();
    std::vector<CurvePoint> grid;
    grid.reserve(grid_points);

    if (model.kind() == BidModel::Kind::Empirical) {
        const auto& samples = model.samples();
        std::vector<double> b1(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) b1[i] = samples[i].highest;
        std::sort(b1.begin(), b1.end());
        auto lower_quantile = [&](double u) {
            if (u <= 0.0) return b1.front();
            std::size_t idx = static_cast<std::size_t>(
                std::ceil(u * static_cast<double>(b1.size()) - 1e-12));
            if (idx < 1) idx = 1;
            if (idx > b1.size()) idx = b1.size();
            return b1[idx - 1];
        };
        for (int j = 0; j < grid_points; ++j) {
            double s = double(j) / (grid_points - 1);
            CurvePoint pt;
            pt.s = s;
            if (s <= 0.0) {
                pt.p = Price::null_price();
                pt.r = 0.0;
            } else {
                double p = lower_quantile(1.0 - s);
                pt.p = Price::of(p);
                pt.r = empirical_revenue_at_price(samples, p);
            }
            grid.push_back(pt);
        }
        // Envelope vertices pair each distinct sample price with its actual
        // empirical survival; grid labels can understate survival at repeated
        // quantiles, which would put unachievable points in the hull.
        std::vector<CurvePoint> verts;
        verts.push_back({0.0, Price::null_price(), 0.0});
        double m = static_cast<double>(b1.size());
        for (std::size_t i = 0; i < b1.size(); ++i) {
            if (i > 0 && b1[i] == b1[i - 1]) continue;
            double p = b1[i];
            double survival = static_cast<double>(b1.size() - i) / m;
            verts.push_back({survival, Price::of(p), empirical_revenue_at_price(samples, p)});
        }
        return RevenueCurve(std::move(grid), model, /*analytic=*/false, std::move(verts));
    }

    for (int j = 0; j < grid_points; ++j) {
        double s = double(j) / (grid_points - 1);
        grid.push_back(detail::analytic_point(model, s));
    }
    return RevenueCurve(std::move(grid), model, /*analytic=*/true);
}

// Least maximizer of r(s) + (1-s)c. Parametric models bisect the monotone
// marginal revenue; other curves query the concave envelope.
inline ExchangeResponse optimal_response(const RevenueCurve& curve, double c) {
    if (!std::isfinite(c)) throw ConfigError("optimal_response: c must be finite");
    const BidModel& model = curve.model();
    if (model.kind() == BidModel::Kind::NullExchange) {
        ExchangeResponse out;
        out.spot_revenue = 0.0;
        if (c < 0.0) {
            out.survival = 1.0;
            out.reserve = Price::of(0.0);
            out.value = 0.0;
        } else {
            out.survival = 0.0;
            out.reserve = Price::null_price();
            out.value = c;
        }
        return out;
    }
    if (!curve.has_analytic() || !model.parametric()) return curve.oracle().query(c);

    const CdfFamily& f = model.family();
    int k = model.bidders();
    // Marginal revenue dr/ds = p(s) - F_bar(p)/f(p), non-increasing in s.
    auto marginal = [&](double s) -> double {
        double p = detail::reserve_of_survival(f, k, s);
        if (std::isinf(p)) return INFINITY;
        double dens = f.pdf(p);
        if (dens <= 0.0) return -INFINITY;
        return p - f.sf(p) / dens;
    };
    double s_star;
    const double eps = 1e-16;
    if (marginal(eps) <= c) {
        s_star = 0.0;
    } else if (marginal(1.0) >= c) {
        s_star = 1.0;
    } else {
        double lo = eps, hi = 1.0;
        for (int it = 0; it < 90; ++it) {
            double mid = 0.5 * (lo + hi);
            if (marginal(mid) <= c)
                hi = mid;
            else
                lo = mid;
        }
        s_star = hi; // smallest s with marginal <= c: the least maximizer
    }
    CurvePoint pt = detail::analytic_point(model, s_star);
    ExchangeResponse out;
    out.survival = s_star;
    out.reserve = pt.p;
    out.spot_revenue = pt.r;
    out.value = pt.r + (1.0 - s_star) * c;
    return out;
}

// Optimal reserve from the hazard-rate equation F_bar(p)/f(p) = p - c on
// [p0, p_inf], with the bypass clamp above p_inf and the keep-everything
// clamp below p0 - 1/f(p0). Requires an IFR parametric model.
inline Price reserve_from_hazard(const BidModel& model, double c) {
    if (!model.parametric())
        throw ConfigError("reserve_from_hazard requires a parametric bid model");
    const CdfFamily& f = model.family();
    if (!f.is_ifr())
        throw ConfigError("reserve_from_hazard: unsupported model (not IFR): " + f.name());
    double p0 = f.support_lo();
    double p_inf = f.support_hi();
    if (!std::isinf(p_inf) && c > p_inf) return Price::of(p_inf); // bypass the exchange
    double f0 = f.pdf(p0);
    if (f0 > 0.0 && c < p0 - 1.0 / f0) return Price::of(p0); // kept by the highest bidder

    auto residual = [&](double p) { return f.sf(p) / f.pdf(p) - (p - c); };
    double lo = p0;
    double hi = std::isinf(p_inf) ? std::max(p0 + 1.0, c + 1.0) : p_inf;
    if (std::isinf(p_inf)) {
        while (residual(hi) > 0.0 && hi < 1e30) hi *= 2.0;
    }
    // residual is decreasing under IFR; bisect to the stated price tolerance.
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (residual(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-12 * (1.0 + std::abs(hi))) break;
    }
    return Price::of(0.5 * (lo + hi));
}

// Revenue sharing: the exchange keeps fraction alpha, so the publisher solves
// the same problem at inflated opportunity cost and collects (1-alpha) of it.
inline ExchangeResponse apply_revenue_share(const RevenueCurve& curve, double alpha, double c) {
    if (!(alpha >= 0.0 && alpha < 1.0))
        throw ConfigError("revenue share alpha must lie in [0, 1)");
    ExchangeResponse inner = optimal_response(curve, c / (1.0 - alpha));
    ExchangeResponse out = inner;
    out.value = (1.0 - alpha) * inner.value;
    out.spot_revenue = (1.0 - alpha) * inner.spot_revenue;
    return out;
}

struct RegularityReport {
    double max_concavity_violation = 0.0; // max positive slope increase in s
    double min_r = 0.0;
    double r0_gap = 0.0;
    double max_p_increase = 0.0;
    bool regular = true;
    double tolerance = 1e-9;
};

inline RegularityReport check_regularity(const RevenueCurve& curve, double tol = 1e-9) {
    RegularityReport rep;
    rep.tolerance = tol;
    const auto& g = curve.grid();
    rep.min_r = INFINITY;
    for (const auto& pt : g) rep.min_r = std::min(rep.min_r, pt.r);
    rep.r0_gap = std::abs(g.front().r);
    double prev_slope = INFINITY;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
        double slope = (g[i + 1].r - g[i].r) / (g[i + 1].s - g[i].s);
        if (slope > prev_slope)
            rep.max_concavity_violation =
                std::max(rep.max_concavity_violation, slope - prev_slope);
        prev_slope = slope;
        double p_i = g[i].p.is_null ? INFINITY : g[i].p.value;
        double p_n = g[i + 1].p.is_null ? INFINITY : g[i + 1].p.value;
        if (p_n > p_i) rep.max_p_increase = std::max(rep.max_p_increase, p_n - p_i);
    }
    rep.regular = rep.max_concavity_violation <= tol && rep.r0_gap <= tol &&
                  rep.min_r >= -tol && rep.max_p_increase <= tol;
    return rep;
}

} // namespace adx::exchange

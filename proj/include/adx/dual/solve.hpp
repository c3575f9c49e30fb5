#pragma once

// Dual minimization.
//
// The generic path is gradient descent with Armijo backtracking, using the
// forward/backward directional derivatives to pick a descent direction at
// nondifferentiable points; a coordinate is stationary when both directional
// derivatives are >= -tol.
//
// Sample-average (piecewise-linear) duals additionally get an exact polish:
// the minimizer sits on an arrangement vertex where within-sample adjusted
// qualities tie or hit a curve kink, so nearby hyperplanes are enumerated,
// the candidate vertices solved exactly, and directional stationarity
// verified. Tie-flow feasibility downstream needs this exactness.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "adx/core/linalg.hpp"
#include "adx/dual/mixture_evaluator.hpp"
#include "adx/dual/sample_evaluator.hpp"
#include "adx/dual/types.hpp"

namespace adx::dual {

struct DualSolution {
    DualVector v;
    Evaluation eval;
    bool converged = false;
    int iterations = 0;
    std::string note;
};

namespace detail {

inline double magnitude_hint(const MixtureEvaluator& ev) {
    double h = 1.0;
    const auto& model = ev.model();
    for (std::size_t t = 0; t < model.types().size(); ++t) {
        const auto& ty = model.types()[t];
        for (std::size_t i = 0; i < ty.members.size(); ++i) {
            double sc = ev.scales()[ty.members[i]];
            if (sc > 0.0)
                h = std::max(h, sc * std::exp(ty.log_mean[i] +
                                              0.5 * ty.log_cov[i * ty.members.size() + i]));
        }
    }
    return h;
}

inline double magnitude_hint(const SampleEvaluator& ev) {
    double h = 1.0;
    for (const auto& q : ev.samples())
        for (std::size_t a = 0; a < q.size(); ++a)
            h = std::max(h, std::abs(ev.scales()[a] * q[a]));
    return h;
}

} // namespace detail

namespace detail {

struct Direction {
    double worst = 0.0; // most negative one-sided derivative found
    double pred = 0.0;  // directional derivative bound for the line search
};

// Steepest descent direction among per-coordinate moves; at nondifferentiable
// corners, among +/- subset indicator directions whose one-sided derivatives
// come from the tie table. worst >= -tol means subgradient stationarity.
inline Direction descent_direction(const Evaluation& e, const EvalContext& ctx,
                                   const std::vector<double>& rho, DualVector& d) {
    const std::size_t A = rho.size();
    d.assign(A, 0.0);
    Direction out;
    for (std::size_t a = 0; a < A; ++a) {
        if (!ctx.active(static_cast<int>(a))) continue;
        if (e.forward[a] < 0.0) {
            d[a] = -e.forward[a];
            out.pred -= e.forward[a] * e.forward[a];
            out.worst = std::min(out.worst, e.forward[a]);
        } else if (e.backward[a] < 0.0) {
            d[a] = e.backward[a];
            out.pred -= e.backward[a] * e.backward[a];
            out.worst = std::min(out.worst, e.backward[a]);
        }
    }
    if (out.worst < 0.0) return out;

    // Coordinate-stationary: scan subset indicator directions.
    std::vector<int> act;
    for (std::size_t a = 0; a < A; ++a)
        if (ctx.active(static_cast<int>(a))) act.push_back(static_cast<int>(a));
    if (act.size() > 14 || e.ties.entries.empty()) return out;
    double best = 0.0;
    std::uint64_t best_pick = 0;
    int best_sign = 0;
    for (std::uint64_t pick = 1; pick < (1ull << act.size()); ++pick) {
        tiebreak::SubsetMask alpha = 0;
        double rho_sum = 0.0;
        for (std::size_t i = 0; i < act.size(); ++i) {
            if (pick >> i & 1ull) {
                alpha |= tiebreak::advertiser_bit(act[i]);
                rho_sum += rho[static_cast<std::size_t>(act[i])];
            }
        }
        double strict = 0.0, weak = 0.0;
        for (const auto& [mask, p] : e.ties.entries) {
            if ((mask & alpha) != 0) weak += p;
            if (mask != 0 && (mask & ~alpha) == 0) strict += p;
        }
        double fwd = rho_sum - strict; // derivative along +1_alpha
        double bwd = weak - rho_sum;   // derivative along -1_alpha
        if (fwd < best) {
            best = fwd;
            best_pick = pick;
            best_sign = +1;
        }
        if (bwd < best) {
            best = bwd;
            best_pick = pick;
            best_sign = -1;
        }
    }
    if (best_sign != 0) {
        for (std::size_t i = 0; i < act.size(); ++i)
            if (best_pick >> i & 1ull)
                d[static_cast<std::size_t>(act[i])] = static_cast<double>(best_sign);
        out.worst = best;
        out.pred = best;
    }
    return out;
}

} // namespace detail

// Gradient descent with backtracking line search on the (possibly restricted)
// dual objective; subset indicator directions take over at corners where no
// single coordinate descends. Deterministic given options.
template <class Evaluator>
DualSolution solve_dual_gd(const Evaluator& ev, SolveOptions opts = {},
                           EvalContext ctx = EvalContext{}, DualVector v0 = {}) {
    const std::size_t A = ev.advertiser_count();
    if (ctx.active_mask == ~0ull) ctx.active_mask = EvalContext::all(A).active_mask;
    ctx.want_ties = true; // corner directions read the tie table
    DualVector v = v0.empty() ? DualVector(A, 0.0) : std::move(v0);
    const std::vector<double> rho = ev.rho();
    double hint = detail::magnitude_hint(ev);
    double step = opts.init_step * std::max(1.0, 0.25 * hint);

    DualSolution sol;
    Evaluation cur = ev.evaluate(v, ctx);
    DualVector d;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        detail::Direction dir = detail::descent_direction(cur, ctx, rho, d);
        if (dir.worst >= -opts.gradient_tolerance) {
            sol.converged = true;
            break;
        }
        double dmax = 0.0;
        for (double x : d) dmax = std::max(dmax, std::abs(x));
        if (dmax == 0.0) {
            sol.converged = true;
            break;
        }
        double t = step;
        bool improved = false;
        for (int bt = 0; bt < 70; ++bt) {
            DualVector trial = v;
            for (std::size_t a = 0; a < A; ++a) trial[a] += t * d[a];
            Evaluation te = ev.evaluate(trial, ctx);
            if (te.objective <= cur.objective + opts.armijo_c * t * dir.pred) {
                v = std::move(trial);
                cur = std::move(te);
                improved = true;
                step = t * 2.0;
                break;
            }
            t *= opts.backtrack;
            if (t * dmax < 1e-15 * std::max(1.0, hint)) break;
        }
        if (!improved) break; // stalled; stationarity is rechecked below
    }
    Evaluation fin = ev.evaluate(v, ctx);
    detail::Direction fdir = detail::descent_direction(fin, ctx, rho, d);
    sol.converged = sol.converged || fdir.worst >= -opts.gradient_tolerance;
    sol.v = std::move(v);
    sol.eval = std::move(fin);
    sol.iterations = it;
    if (!sol.converged) sol.note = "iteration cap or corner stall; best iterate returned";
    return sol;
}

// --- exact vertex polish for piecewise-linear (sample) duals --------------

namespace detail {

struct Plane {
    int a = -1;     // +v_a coefficient 1
    int b = -1;     // -v_b coefficient (or -1 for none)
    double rhs = 0; // v_a - v_b = rhs, or v_a = rhs
};

inline double plane_residual(const Plane& p, const DualVector& v) {
    double lhs = v[p.a] - (p.b >= 0 ? v[p.b] : 0.0);
    return std::abs(lhs - p.rhs);
}

inline bool stationary(const Evaluation& e, const EvalContext& ctx, std::size_t A,
                       double eps) {
    for (std::size_t a = 0; a < A; ++a) {
        if (!ctx.active(static_cast<int>(a))) continue;
        if (e.forward[a] < -eps || e.backward[a] < -eps) return false;
    }
    return true;
}

// Directional stationarity along every +/- subset indicator, evaluated from
// the tie table: necessary for the downstream tie-flow to be feasible, and
// strictly stronger than per-coordinate checks at piecewise-linear corners.
inline bool subset_stationary(const Evaluation& e, const EvalContext& ctx,
                              const std::vector<double>& rho, double eps) {
    const int A = static_cast<int>(rho.size());
    std::vector<int> act;
    for (int a = 0; a < A; ++a)
        if (ctx.active(a)) act.push_back(a);
    if (act.size() > 16) return stationary(e, ctx, rho.size(), eps);
    for (std::uint64_t pick = 1; pick < (1ull << act.size()); ++pick) {
        tiebreak::SubsetMask alpha = 0;
        double rho_sum = 0.0;
        for (std::size_t i = 0; i < act.size(); ++i) {
            if (pick >> i & 1ull) {
                alpha |= tiebreak::advertiser_bit(act[i]);
                rho_sum += rho[static_cast<std::size_t>(act[i])];
            }
        }
        double strict = 0.0, weak = 0.0;
        for (const auto& [mask, p] : e.ties.entries) {
            if ((mask & alpha) != 0) weak += p;
            if (mask != 0 && (mask & ~alpha) == 0) strict += p;
        }
        if (rho_sum - strict < -eps) return false; // forward along +alpha
        if (weak - rho_sum < -eps) return false;   // forward along -alpha
    }
    return true;
}

} // namespace detail

// Snaps a near-optimal iterate of a sample-average dual onto the exact
// arrangement vertex. Returns true when an exactly stationary point was found.
inline bool exact_discrete_polish(const SampleEvaluator& ev, DualSolution& sol,
                                  SolveOptions opts = {}, EvalContext ctx = EvalContext{}) {
    const std::size_t A = ev.advertiser_count();
    if (ctx.active_mask == ~0ull) ctx.active_mask = EvalContext::all(A).active_mask;
    if (A > 4) return false;
    ctx.want_ties = true; // subset stationarity reads the tie table
    double hint = detail::magnitude_hint(ev);
    const double eps_stat = 1e-11 * std::max(1.0, hint);
    const std::vector<double>& rho = ev.rho();

    // Candidate kink levels of the response: envelope breakpoints.
    std::vector<double> kinks;
    const auto& bps = ev.curve().oracle().breakpoints();
    if (bps.size() <= 64) kinks = bps;
    kinks.push_back(0.0); // the outside-option level

    // All tie hyperplanes of the arrangement.
    std::vector<detail::Plane> planes;
    for (const auto& q : ev.samples()) {
        for (int a = 0; a < static_cast<int>(A); ++a) {
            if (!ctx.active(a)) continue;
            double qa = ev.scales()[a] * q[a];
            for (int b = a + 1; b < static_cast<int>(A); ++b) {
                if (!ctx.active(b)) continue;
                planes.push_back({a, b, qa - ev.scales()[b] * q[b]});
            }
            for (double k : kinks) planes.push_back({a, -1, qa - k});
        }
    }

    Evaluation cur = ev.evaluate(sol.v, ctx);
    bool have = detail::stationary(cur, ctx, A, eps_stat) &&
                detail::subset_stationary(cur, ctx, rho, eps_stat);
    double best_obj = have ? cur.objective : INFINITY;
    DualVector best_v = sol.v;
    Evaluation best_eval = cur;

    const double deltas[] = {1e-6, 1e-4, 1e-2, 1.0, INFINITY};
    for (double delta : deltas) {
        std::vector<detail::Plane> near;
        for (const auto& p : planes)
            if (detail::plane_residual(p, sol.v) <= delta * std::max(1.0, hint))
                near.push_back(p);
        // Combination guard: sum_k C(|near|, k) C(A, A-k) stays enumerable.
        double combos = 0.0;
        for (std::size_t k = 0; k <= std::min<std::size_t>(A, near.size()); ++k) {
            double c = 1.0;
            for (std::size_t i = 0; i < k; ++i)
                c *= static_cast<double>(near.size() - i) / static_cast<double>(i + 1);
            double ca = 1.0;
            for (std::size_t i = 0; i < A - k; ++i)
                ca *= static_cast<double>(A - i) / static_cast<double>(i + 1);
            combos += c * ca;
        }
        if (combos > 500000.0) continue;
        std::vector<int> idx(near.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

        // Choose k planes and A-k anchor coordinates (fixed at the iterate).
        std::vector<int> chosen;
        auto try_candidate = [&](const std::vector<int>& plane_ids,
                                 const std::vector<int>& anchors) {
            Matrix m(A * A, 0.0);
            std::vector<double> rhs(A, 0.0);
            std::size_t row = 0;
            for (int pi : plane_ids) {
                const auto& p = near[static_cast<std::size_t>(pi)];
                m[row * A + p.a] = 1.0;
                if (p.b >= 0) m[row * A + p.b] = -1.0;
                rhs[row] = p.rhs;
                ++row;
            }
            for (int a : anchors) {
                m[row * A + a] = 1.0;
                rhs[row] = sol.v[static_cast<std::size_t>(a)];
                ++row;
            }
            std::vector<double> x;
            if (!solve_linear(m, rhs, A, x)) return;
            for (double xv : x)
                if (!std::isfinite(xv) || std::abs(xv) > 1e7 * std::max(1.0, hint)) return;
            Evaluation e = ev.evaluate(x, ctx);
            if (!detail::stationary(e, ctx, A, eps_stat)) return;
            if (!detail::subset_stationary(e, ctx, rho, eps_stat)) return;
            bool better = e.objective < best_obj - 1e-12 * std::max(1.0, hint);
            bool tie = std::abs(e.objective - best_obj) <= 1e-12 * std::max(1.0, hint);
            if (better || (tie && std::lexicographical_compare(x.begin(), x.end(),
                                                               best_v.begin(), best_v.end()))) {
                best_obj = e.objective;
                best_v = x;
                best_eval = std::move(e);
                have = true;
            }
        };

        // Enumerate plane subsets of size k and coordinate anchors of size A-k.
        std::vector<int> coords;
        for (int a = 0; a < static_cast<int>(A); ++a) coords.push_back(a);
        std::vector<int> psubset, csubset;
        auto rec_anchor = [&](auto&& self, std::size_t start, std::size_t need,
                              const std::vector<int>& plane_ids) -> void {
            if (need == 0) {
                try_candidate(plane_ids, csubset);
                return;
            }
            for (std::size_t i = start; i < coords.size(); ++i) {
                csubset.push_back(coords[i]);
                self(self, i + 1, need - 1, plane_ids);
                csubset.pop_back();
            }
        };
        auto rec_plane = [&](auto&& self, std::size_t start, std::size_t k) -> void {
            if (psubset.size() == k) {
                csubset.clear();
                rec_anchor(rec_anchor, 0, A - k, psubset);
                return;
            }
            for (std::size_t i = start; i < near.size(); ++i) {
                psubset.push_back(idx[i]);
                self(self, i + 1, k);
                psubset.pop_back();
            }
        };
        for (std::size_t k = 0; k <= std::min<std::size_t>(A, near.size()); ++k) {
            psubset.clear();
            rec_plane(rec_plane, 0, k);
        }
        if (have) break;
    }

    if (have) {
        sol.v = std::move(best_v);
        sol.eval = std::move(best_eval);
        sol.converged = true;
        return true;
    }
    return false;
}

// --- public solver entry points -------------------------------------------

inline DualSolution solve_dual(const market::MarketModel& model,
                               const exchange::RevenueCurve& curve, SolveOptions opts = {}) {
    MixtureEvaluator ev(model, curve, opts);
    EvalContext ctx = EvalContext::all(model.advertiser_count());
    ctx.want_ties = true;
    return solve_dual_gd(ev, opts, ctx);
}

// Exact-where-possible solve for weighted discrete atoms.
inline DualSolution solve_dual_discrete(const SampleEvaluator& ev, SolveOptions opts = {}) {
    EvalContext ctx = EvalContext::all(ev.advertiser_count());
    ctx.want_ties = true;
    DualSolution sol = solve_dual_gd(ev, opts, ctx);
    if (exact_discrete_polish(ev, sol, opts, ctx)) {
        sol.eval = ev.evaluate(sol.v, ctx);
        sol.note = "exact arrangement vertex";
    }
    return sol;
}

// Sample-average approximation. Single-advertiser no-exchange case returns
// the left endpoint of the optimal sample-quantile interval exactly.
inline DualSolution solve_dual_saa(const std::vector<std::vector<double>>& samples,
                                   const std::vector<double>& rho,
                                   const exchange::RevenueCurve& curve,
                                   SolveOptions opts = {}) {
    SampleEvaluator ev = SampleEvaluator::equal_weight(samples, rho, curve, opts);
    const std::size_t A = rho.size();
    if (A == 1 &&
        curve.model().kind() == exchange::BidModel::Kind::NullExchange) {
        std::vector<double> q(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) q[i] = samples[i][0];
        std::sort(q.begin(), q.end());
        double m = static_cast<double>(q.size());
        auto k = static_cast<std::size_t>(std::ceil((1.0 - rho[0]) * m - 1e-9));
        if (k < 1) k = 1;
        if (k > q.size()) k = q.size();
        DualSolution sol;
        sol.v = {q[k - 1]};
        EvalContext ctx = EvalContext::all(1);
        ctx.want_ties = true;
        sol.eval = ev.evaluate(sol.v, ctx);
        sol.converged = true;
        sol.note = "sample quantile";
        return sol;
    }
    if (samples.size() <= 512) return solve_dual_discrete(ev, opts);
    EvalContext ctx = EvalContext::all(A);
    ctx.want_ties = true;
    return solve_dual_gd(ev, opts, ctx);
}

// --- spec-level convenience wrappers ---------------------------------------

inline double dual_objective(const market::MarketModel& model,
                             const exchange::RevenueCurve& curve, const DualVector& v,
                             SolveOptions opts = {}) {
    MixtureEvaluator ev(model, curve, opts);
    return ev.evaluate(v, EvalContext::all(model.advertiser_count())).objective;
}

inline Evaluation dual_derivatives(const market::MarketModel& model,
                                   const exchange::RevenueCurve& curve, const DualVector& v,
                                   SolveOptions opts = {}) {
    MixtureEvaluator ev(model, curve, opts);
    EvalContext ctx = EvalContext::all(model.advertiser_count());
    ctx.want_ties = true;
    return ev.evaluate(v, ctx);
}

// Monte Carlo oracle with the same signature shape as dual_objective.
inline double dual_objective_mc(const market::MarketModel& model,
                                const exchange::RevenueCurve& curve, const DualVector& v,
                                int samples, std::uint64_t seed, SolveOptions opts = {}) {
    SampleEvaluator ev = SampleEvaluator::from_model(model, curve, samples, seed, opts);
    return ev.evaluate(v, EvalContext::all(model.advertiser_count())).objective;
}

// --- target quality constraints -------------------------------------------

struct QualityConstrainedSolution {
    DualVector v;
    std::vector<double> gamma;            // multipliers, >= 0
    std::vector<double> achieved_quality; // per assigned impression
    std::vector<double> floors;
    bool converged = false;
    bool feasible = true;
    int iterations = 0;
};

// Joint projected descent over (v, gamma >= 0) for floors on the average
// quality of assigned impressions: Lagrangian term gamma_a (E[i_a Q_a] -
// floor_a rho_a).
template <class Evaluator>
QualityConstrainedSolution solve_dual_quality_constrained_ev(Evaluator& ev,
                                                             const std::vector<double>& floors,
                                                             SolveOptions opts = {}) {
    const std::size_t A = ev.advertiser_count();
    if (floors.size() != A) throw ConfigError("floor vector size mismatch");
    for (double f : floors)
        if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigError("floors must be finite and >= 0");
    EvalContext ctx = EvalContext::all(A);
    const std::vector<double> rho = ev.rho();
    double hint = detail::magnitude_hint(ev);
    const double gamma_cap = 1e7;

    DualVector v(A, 0.0);
    std::vector<double> gamma(A, 1.0);
    auto objective = [&](const DualVector& vv, const std::vector<double>& gg,
                         Evaluation* out_eval) {
        ev.set_scales(gg);
        Evaluation e = ev.evaluate(vv, ctx);
        double h = e.objective;
        for (std::size_t a = 0; a < A; ++a) h -= gg[a] * floors[a] * rho[a];
        if (out_eval) *out_eval = std::move(e);
        return h;
    };

    Evaluation cur_eval;
    double cur = objective(v, gamma, &cur_eval);
    double step = opts.init_step * std::max(1.0, 0.25 * hint);
    QualityConstrainedSolution sol;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        // Gradients: v from directional derivatives, gamma from quality rates.
        std::vector<double> dv(A, 0.0), dg(A, 0.0);
        double stat = 0.0;
        for (std::size_t a = 0; a < A; ++a) {
            if (cur_eval.forward[a] < 0.0)
                dv[a] = -cur_eval.forward[a];
            else if (cur_eval.backward[a] < 0.0)
                dv[a] = cur_eval.backward[a];
            stat = std::max(stat, std::max(-cur_eval.forward[a], -cur_eval.backward[a]));
            double grad_g = cur_eval.quality_rate[a] - floors[a] * rho[a];
            if (gamma[a] <= 0.0 && grad_g > 0.0)
                dg[a] = 0.0;
            else {
                dg[a] = -grad_g;
                stat = std::max(stat, std::abs(grad_g) /
                                          std::max(1.0, floors[a] * rho[a]));
            }
        }
        if (stat <= opts.gradient_tolerance) {
            sol.converged = true;
            break;
        }
        double dmax = 0.0;
        for (std::size_t a = 0; a < A; ++a)
            dmax = std::max({dmax, std::abs(dv[a]), std::abs(dg[a]) * hint});
        if (dmax == 0.0) {
            sol.converged = true;
            break;
        }
        bool improved = false;
        double t = step;
        for (int bt = 0; bt < 70; ++bt) {
            DualVector tv = v;
            std::vector<double> tg = gamma;
            for (std::size_t a = 0; a < A; ++a) {
                tv[a] += t * dv[a];
                tg[a] = std::clamp(tg[a] + t * dg[a] / std::max(1.0, hint * hint),
                                   0.0, gamma_cap);
            }
            Evaluation te;
            double tobj = objective(tv, tg, &te);
            if (tobj < cur - 1e-14 * std::max(1.0, std::abs(cur))) {
                v = std::move(tv);
                gamma = std::move(tg);
                cur = tobj;
                cur_eval = std::move(te);
                improved = true;
                step = t * 2.0;
                break;
            }
            t *= opts.backtrack;
            if (t < 1e-14) break;
        }
        if (!improved) break;
    }
    ev.set_scales(gamma);
    cur_eval = ev.evaluate(v, ctx);
    sol.v = v;
    sol.gamma = gamma;
    sol.floors = floors;
    sol.iterations = it;
    sol.achieved_quality.assign(A, 0.0);
    for (std::size_t a = 0; a < A; ++a) {
        double assigned = cur_eval.assign_rate[a];
        sol.achieved_quality[a] = assigned > 1e-12 ? cur_eval.quality_rate[a] / assigned : 0.0;
        if (gamma[a] >= gamma_cap * 0.99 &&
            cur_eval.quality_rate[a] < floors[a] * rho[a] - opts.gradient_tolerance)
            sol.feasible = false;
        if (sol.achieved_quality[a] < floors[a] * (1.0 - 1e-2) && gamma[a] >= gamma_cap * 0.99)
            sol.feasible = false;
    }
    return sol;
}

inline QualityConstrainedSolution solve_dual_quality_constrained(
    const market::MarketModel& model, const exchange::RevenueCurve& curve,
    const std::vector<double>& floors, SolveOptions opts = {}) {
    MixtureEvaluator ev(model, curve, opts);
    return solve_dual_quality_constrained_ev(ev, floors, opts);
}

} // namespace adx::dual

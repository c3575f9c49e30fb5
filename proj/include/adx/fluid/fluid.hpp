#pragma once

// Deterministic fluid limit of a bid-price policy: piecewise-linear
// trajectories of per-advertiser delivery and yield. Each piece evaluates the
// dual restriction to the still-active advertisers; an epoch removes every
// advertiser whose contract fills (simultaneous fills drop together). Once
// the outside option's slack is exhausted the exchange is bypassed and the
// remaining flow is forced onto the contracts (identity response).

#include <cmath>
#include <vector>

#include "adx/dual/types.hpp"
#include "adx/tiebreak/types.hpp"

namespace adx::fluid {

struct FluidPiece {
    double t_start = 0.0;
    double t_end = 0.0;
    std::uint64_t active_mask = 0;
    bool outside_active = true;
    std::vector<double> rates;        // assignment rate per advertiser
    double outside_rate = 0.0;        // accepted-by-exchange + discarded
    double yield_rate = 0.0;          // adx + scale-weighted quality
    double adx_rate = 0.0;
    std::vector<double> quality_rate; // raw per advertiser
};

struct FluidSolution {
    std::vector<FluidPiece> pieces;
    std::vector<double> delivered;     // S_a(1)
    double outside_consumed = 0.0;
    double total_yield = 0.0;          // J(1)
    double adx_revenue = 0.0;
    std::vector<double> quality;       // raw totals per advertiser
    bool unmet_demand = false;

    double quality_total() const {
        double q = 0.0;
        for (double x : quality) q += x;
        return q;
    }
};

template <class Evaluator>
FluidSolution fluid_evaluate(const Evaluator& ev, const dual::DualVector& v,
                             const tiebreak::TieBreakRule* rule = nullptr) {
    const std::size_t A = ev.advertiser_count();
    const std::vector<double>& rho = ev.rho();
    const std::vector<double>& scales = ev.scales();
    double rho0 = 1.0;
    for (double r : rho) rho0 -= r;

    FluidSolution sol;
    sol.delivered.assign(A, 0.0);
    sol.quality.assign(A, 0.0);

    const double eps = 1e-12;
    std::uint64_t active = 0;
    for (std::size_t a = 0; a < A; ++a)
        if (rho[a] > eps) active |= (1ull << a);
    bool outside_active = rho0 > eps;
    double t = 0.0;

    for (std::size_t piece_no = 0; piece_no <= A + 1 && t < 1.0 - 1e-12; ++piece_no) {
        if (active == 0 && !outside_active) break;
        dual::EvalContext ctx;
        ctx.active_mask = active;
        ctx.outside_active = outside_active;
        ctx.identity_response = !outside_active;
        ctx.rule = rule;
        dual::Evaluation e = ev.evaluate(v, ctx);

        double out_rate = e.accept_rate + e.outside_rate;
        double delta = 1.0 - t;
        for (std::size_t a = 0; a < A; ++a) {
            if (!(active >> a & 1ull)) continue;
            if (e.assign_rate[a] > eps)
                delta = std::min(delta, (rho[a] - sol.delivered[a]) / e.assign_rate[a]);
        }
        if (outside_active && out_rate > eps)
            delta = std::min(delta, (rho0 - sol.outside_consumed) / out_rate);
        delta = std::max(delta, 0.0);

        FluidPiece p;
        p.t_start = t;
        p.t_end = t + delta;
        p.active_mask = active;
        p.outside_active = outside_active;
        p.rates = e.assign_rate;
        p.outside_rate = out_rate;
        p.adx_rate = e.adx_rate;
        p.quality_rate = e.quality_rate;
        double yr = e.adx_rate;
        for (std::size_t a = 0; a < A; ++a) yr += scales[a] * e.quality_rate[a];
        p.yield_rate = yr;
        sol.pieces.push_back(p);

        for (std::size_t a = 0; a < A; ++a) {
            sol.delivered[a] += e.assign_rate[a] * delta;
            sol.quality[a] += e.quality_rate[a] * delta;
        }
        sol.outside_consumed += out_rate * delta;
        sol.adx_revenue += e.adx_rate * delta;
        sol.total_yield += yr * delta;
        t += delta;

        if (delta <= eps && piece_no > A) break; // zero-progress guard
        // Epochs: drop everything that just filled.
        bool removed = false;
        for (std::size_t a = 0; a < A; ++a) {
            if ((active >> a & 1ull) && sol.delivered[a] >= rho[a] - 1e-11) {
                active &= ~(1ull << a);
                sol.delivered[a] = rho[a];
                removed = true;
            }
        }
        if (outside_active && sol.outside_consumed >= rho0 - 1e-11) {
            outside_active = false;
            sol.outside_consumed = rho0;
            removed = true;
        }
        if (!removed && t < 1.0 - 1e-12) {
            // No epoch reached within the horizon: some advertiser never
            // fills (zero service rate). Extend to t = 1 and flag.
            sol.unmet_demand = active != 0;
            if (sol.pieces.back().t_end < 1.0) {
                FluidPiece& last = sol.pieces.back();
                double rest = 1.0 - t;
                for (std::size_t a = 0; a < A; ++a) {
                    sol.delivered[a] += last.rates[a] * rest;
                    sol.quality[a] += last.quality_rate[a] * rest;
                }
                sol.outside_consumed += last.outside_rate * rest;
                sol.adx_revenue += last.adx_rate * rest;
                sol.total_yield += last.yield_rate * rest;
                last.t_end = 1.0;
                t = 1.0;
            }
            break;
        }
    }
    for (std::size_t a = 0; a < A; ++a)
        if (sol.delivered[a] < rho[a] - 1e-9) sol.unmet_demand = true;
    return sol;
}

} // namespace adx::fluid

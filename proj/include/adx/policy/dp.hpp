#pragma once

// Exact dynamic-programming oracle for tiny discrete instances: finite
// quality atoms, finite top-two-bid atoms, backward induction over
// (impressions left, remaining demand). Reserve candidates are the bid atoms
// plus reject-all; transitions are restricted to feasible states, which
// subsumes the boundary penalties.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "adx/core/errors.hpp"
#include "adx/core/rng.hpp"
#include "adx/dual/sample_evaluator.hpp"
#include "adx/exchange/revenue_curve.hpp"

namespace adx::policy {

struct QualityAtom {
    double prob = 0.0;
    std::vector<double> q; // per advertiser
};

struct BidAtom {
    double prob = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
};

struct DiscreteInstance {
    std::vector<double> rho;
    std::vector<QualityAtom> quality_atoms;
    std::vector<BidAtom> bid_atoms; // {prob 1, 0, 0} models the null exchange
    double gamma = 1.0;

    void validate() const {
        if (rho.empty() || quality_atoms.empty() || bid_atoms.empty())
            throw ConfigError("discrete instance needs rho, quality atoms and bid atoms");
        double pq = 0.0, pb = 0.0;
        for (const auto& a : quality_atoms) {
            if (a.q.size() != rho.size()) throw ConfigError("quality atom dimension mismatch");
            pq += a.prob;
        }
        for (const auto& b : bid_atoms) {
            if (!(b.b1 >= b.b2 && b.b2 >= 0.0)) throw ConfigError("bid atom must satisfy b1 >= b2 >= 0");
            pb += b.prob;
        }
        if (std::abs(pq - 1.0) > 1e-9 || std::abs(pb - 1.0) > 1e-9)
            throw ConfigError("atom probabilities must sum to 1");
    }
};

// Bid atoms as an equal-weight empirical log (atom probabilities must be
// multiples of 1/denominator).
inline exchange::BidModel to_bid_model(const DiscreteInstance& inst, int denominator = 64) {
    std::vector<exchange::BidSample> samples;
    for (const auto& b : inst.bid_atoms) {
        double copies = b.prob * denominator;
        long k = std::lround(copies);
        if (std::abs(copies - static_cast<double>(k)) > 1e-9)
            throw ConfigError("bid atom probabilities must be multiples of 1/denominator");
        for (long i = 0; i < k; ++i) samples.push_back({b.b1, b.b2});
    }
    return exchange::BidModel::empirical(std::move(samples));
}

// Quality atoms drawn as a source for the policy simulator.
struct AtomSource {
    const DiscreteInstance* inst;
    void sample(Rng& rng, std::vector<double>& q) const {
        std::vector<double> w(inst->quality_atoms.size());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = inst->quality_atoms[i].prob;
        q = inst->quality_atoms[rng.categorical(w)].q;
    }
};

// Weighted-sample dual evaluator over the instance's atoms.
inline dual::SampleEvaluator atom_evaluator(const DiscreteInstance& inst,
                                            const exchange::RevenueCurve& curve,
                                            dual::SolveOptions opts = {}) {
    std::vector<std::vector<double>> qs;
    std::vector<double> w;
    for (const auto& a : inst.quality_atoms) {
        qs.push_back(a.q);
        w.push_back(a.prob);
    }
    dual::SampleEvaluator ev(std::move(qs), std::move(w), inst.rho, curve, opts);
    ev.set_scales(std::vector<double>(inst.rho.size(), inst.gamma));
    return ev;
}

struct DpResult {
    double value = 0.0;   // J_N(C)
    long states = 0;
};

// If allow_exchange is false every impression goes straight to the fallback
// decision (equivalent to always posting the reject-all price).
inline DpResult dp_solve(const DiscreteInstance& inst, long n_impressions,
                         const std::vector<long>& capacity, bool allow_exchange = true,
                         long state_budget = 4000000) {
    inst.validate();
    const std::size_t A = inst.rho.size();
    if (capacity.size() != A) throw ConfigError("capacity dimension mismatch");
    long owed = 0;
    for (long c : capacity) {
        if (c < 0) throw ConfigError("capacity must be >= 0");
        owed += c;
    }
    if (owed > n_impressions) throw ConfigError("infeasible horizon: N < sum of capacities");

    // Mixed-radix state index over remaining demands.
    std::vector<long> radix(A);
    long x_states = 1;
    for (std::size_t a = 0; a < A; ++a) {
        radix[a] = x_states;
        x_states *= capacity[a] + 1;
    }
    if (x_states * (n_impressions + 1) > state_budget)
        throw ConfigError("state space exceeds the oracle budget");

    // Reserve candidates: each bid atom value and reject-all (index -1).
    std::vector<double> reserves;
    for (const auto& b : inst.bid_atoms) reserves.push_back(b.b1);
    std::sort(reserves.begin(), reserves.end());
    reserves.erase(std::unique(reserves.begin(), reserves.end()), reserves.end());
    std::vector<double> acc(reserves.size(), 0.0), epay(reserves.size(), 0.0);
    for (std::size_t r = 0; r < reserves.size(); ++r) {
        for (const auto& b : inst.bid_atoms) {
            if (b.b1 >= reserves[r]) {
                acc[r] += b.prob;
                epay[r] += b.prob * std::max(b.b2, reserves[r]);
            }
        }
    }

    std::vector<double> prev(static_cast<std::size_t>(x_states), 0.0);
    std::vector<double> curv(static_cast<std::size_t>(x_states), 0.0);
    std::vector<long> xs(A, 0);
    DpResult out;

    for (long m = 1; m <= n_impressions; ++m) {
        for (long xi = 0; xi < x_states; ++xi) {
            long total = 0;
            {
                long rest = xi;
                for (std::size_t a = 0; a < A; ++a) {
                    xs[a] = (rest / radix[a]) % (capacity[a] + 1);
                    total += xs[a];
                }
                (void)rest;
            }
            if (total > m) continue; // infeasible state
            ++out.states;
            bool slack = total < m; // may discard / lose one to the exchange
            double value = 0.0;
            for (const auto& atom : inst.quality_atoms) {
                // Fallback: best assignment (or discard) when rejected.
                double fallback = slack ? prev[static_cast<std::size_t>(xi)] : -INFINITY;
                for (std::size_t a = 0; a < A; ++a) {
                    if (xs[a] == 0) continue;
                    double cand = inst.gamma * atom.q[a] +
                                  prev[static_cast<std::size_t>(xi - radix[a])];
                    fallback = std::max(fallback, cand);
                }
                double best = fallback; // reject-all reserve
                if (slack && allow_exchange) {
                    // epay is the unconditional expected payment at the reserve.
                    for (std::size_t r = 0; r < reserves.size(); ++r) {
                        double val = epay[r] + acc[r] * prev[static_cast<std::size_t>(xi)] +
                                     (1.0 - acc[r]) * fallback;
                        best = std::max(best, val);
                    }
                }
                value += atom.prob * best;
            }
            curv[static_cast<std::size_t>(xi)] = value;
        }
        std::swap(prev, curv);
    }

    long idx = 0;
    for (std::size_t a = 0; a < A; ++a) idx += radix[a] * capacity[a];
    out.value = prev[static_cast<std::size_t>(idx)];
    return out;
}

} // namespace adx::policy

#pragma once

// Tie probabilities and the randomized tie-breaking rule from the
// subset-advertiser feasible-flow problem. Subsets are enumerated sparsely
// from per-type tie events (continuous in-type maximizers are singletons
// almost surely; real ties arise among the constant adjusted qualities), so
// the graph stays linear in the number of types.

#include <cmath>
#include <string>
#include <vector>

#include "adx/core/errors.hpp"
#include "adx/core/maxflow.hpp"
#include "adx/dual/mixture_evaluator.hpp"
#include "adx/dual/sample_evaluator.hpp"
#include "adx/tiebreak/types.hpp"

namespace adx::tiebreak {

// Analytic tie table at bid prices v. Degenerate models (perfectly correlated
// or zero-variance in-type qualities) fall back to Monte Carlo estimation.
struct TieTableResult {
    TieTable table;
    bool used_monte_carlo = false;
    std::string warning;
};

inline TieTableResult tie_probabilities(const market::MarketModel& model,
                                        const exchange::RevenueCurve& curve,
                                        const dual::DualVector& v,
                                        dual::SolveOptions opts = {}) {
    dual::MixtureEvaluator ev(model, curve, opts);
    dual::EvalContext ctx = dual::EvalContext::all(model.advertiser_count());
    ctx.want_ties = true;
    dual::Evaluation e = ev.evaluate(v, ctx);
    TieTableResult out;
    if (!e.degenerate) {
        out.table = std::move(e.ties);
        return out;
    }
    // Monte Carlo fallback: sampled argmax sets with the same tie tolerance.
    dual::SampleEvaluator mc =
        dual::SampleEvaluator::from_model(model, curve, opts.mc_samples, opts.seed, opts);
    dual::Evaluation me = mc.evaluate(v, ctx);
    out.table = std::move(me.ties);
    out.table.monte_carlo = true;
    out.used_monte_carlo = true;
    out.warning = "degenerate in-type quality distribution; tie masses estimated by Monte Carlo";
    return out;
}

// Exact tie table for weighted discrete atoms.
inline TieTable tie_probabilities_discrete(const dual::SampleEvaluator& ev,
                                           const dual::DualVector& v) {
    dual::EvalContext ctx = dual::EvalContext::all(ev.advertiser_count());
    ctx.want_ties = true;
    return ev.evaluate(v, ctx).ties;
}

struct TieFlowResult {
    TieBreakRule rule;
    bool feasible = false;
    double required = 0.0;   // total supply that must be routed
    double max_flow = 0.0;
    double rho0_eff = 0.0;   // slack absorbed by the outside option
    double residual = 0.0;   // worst node-balance violation of the output
    // Min-cut certificate when infeasible.
    std::vector<SubsetMask> cut_subsets;
    std::vector<int> cut_advertisers;
};

// Source -> subset (cap P(S)) -> member advertisers -> sink (cap rho_a); the
// outside option absorbs exactly the slack supply. Feasible iff every source
// and sink arc saturates.
inline TieFlowResult solve_tiebreak_flow(const TieTable& table,
                                         const std::vector<double>& rho) {
    const int A = static_cast<int>(rho.size());
    TieFlowResult out;
    out.rule.advertiser_count = A;

    double supply = 0.0;
    for (const auto& [mask, p] : table.entries) supply += p;
    double demand = 0.0;
    for (double r : rho) demand += r;
    out.required = supply;
    out.rho0_eff = supply - demand;
    if (out.rho0_eff < -1e-9) {
        out.feasible = false;
        return out; // rejected mass cannot even cover the contracts
    }

    int n_nodes = 2 + static_cast<int>(table.entries.size()) + A + 1;
    MaxFlow g(n_nodes);
    int s = 0, t = 1;
    auto adv_node = [&](int a) { return 2 + a; };           // a in [0, A]; A = outside
    int subset_base = 2 + A + 1;

    std::vector<SubsetMask> masks;
    std::vector<int> source_arcs;
    std::vector<std::vector<std::pair<int, int>>> member_arcs; // (slot, arc id)
    int si = 0;
    for (const auto& [mask, p] : table.entries) {
        int node = subset_base + si;
        masks.push_back(mask);
        source_arcs.push_back(g.add_edge(s, node, p));
        member_arcs.emplace_back();
        for (int slot = 0; slot <= A; ++slot) {
            SubsetMask bit = slot < A ? advertiser_bit(slot) : outside_bit(A);
            if (mask & bit)
                member_arcs.back().push_back({slot, g.add_edge(node, adv_node(slot), p)});
        }
        ++si;
    }
    std::vector<int> sink_arcs(A + 1, -1);
    for (int a = 0; a < A; ++a) sink_arcs[a] = g.add_edge(adv_node(a), t, rho[a]);
    sink_arcs[A] = g.add_edge(adv_node(A), t, std::max(out.rho0_eff, 0.0));

    out.max_flow = g.run(s, t);
    bool sat = true;
    for (int arc : source_arcs)
        if (g.residual(arc) > 1e-11) sat = false;
    for (int arc : sink_arcs)
        if (g.residual(arc) > 1e-11) sat = false;
    out.feasible = sat;

    if (!sat) {
        auto side = g.min_cut_side(s);
        for (std::size_t i = 0; i < masks.size(); ++i)
            if (side[static_cast<std::size_t>(subset_base) + i]) out.cut_subsets.push_back(masks[i]);
        for (int a = 0; a <= A; ++a)
            if (side[static_cast<std::size_t>(adv_node(a))]) out.cut_advertisers.push_back(a);
        return out;
    }

    for (std::size_t i = 0; i < masks.size(); ++i) {
        std::vector<double> y(static_cast<std::size_t>(A) + 1, 0.0);
        for (const auto& [slot, arc] : member_arcs[i])
            y[static_cast<std::size_t>(slot)] = std::max(0.0, g.flow(arc));
        out.rule.flows[masks[i]] = std::move(y);
    }

    // Report the worst balance violation of the extracted flow.
    std::vector<double> incoming(static_cast<std::size_t>(A) + 1, 0.0);
    double worst = 0.0;
    for (const auto& [mask, y] : out.rule.flows) {
        double tot = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) {
            tot += y[k];
            incoming[k] += y[k];
        }
        worst = std::max(worst, std::abs(tot - table.entries.at(mask)));
    }
    for (int a = 0; a < A; ++a) worst = std::max(worst, std::abs(incoming[a] - rho[a]));
    out.residual = worst;
    return out;
}

} // namespace adx::tiebreak

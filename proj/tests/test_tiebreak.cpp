#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "adx/dual/solve.hpp"
#include "adx/tiebreak/tiebreak.hpp"
#include "fixtures.hpp"

using namespace adx;
using namespace adx::tiebreak;
using adx::dual::DualVector;
using adx::dual::EvalContext;
using adx::dual::SampleEvaluator;
using adx::exchange::BidModel;
using adx::exchange::BidSample;
using adx::exchange::CdfFamily;
using adx::exchange::RevenueCurve;
using adx::exchange::build_revenue_curve;

TEST_CASE("symmetric atom ties with and without exchange rejection") {
    RevenueCurve null_curve = build_revenue_curve(BidModel::null_exchange(), 10);
    std::vector<std::vector<double>> atom{{2.0, 2.0}};
    SampleEvaluator ev = SampleEvaluator::equal_weight(atom, {0.5, 0.5}, null_curve);
    TieTable t = tie_probabilities_discrete(ev, {0.0, 0.0});
    SubsetMask both = advertiser_bit(0) | advertiser_bit(1);
    REQUIRE(t.entries.at(both) == Catch::Approx(1.0));
    REQUIRE(t.empty_tie == Catch::Approx(0.0));

    // Bid log with 30% of top bids at 10: the envelope picks survival 0.3 at
    // cost 2, so the tie mass scales by the rejection probability 0.7.
    std::vector<BidSample> bids;
    for (int i = 0; i < 3; ++i) bids.push_back({10.0, 0.0});
    for (int i = 0; i < 7; ++i) bids.push_back({0.0, 0.0});
    RevenueCurve curve = build_revenue_curve(BidModel::empirical(bids), 11);
    SampleEvaluator ev2 = SampleEvaluator::equal_weight(atom, {0.3, 0.3}, curve);
    TieTable t2 = tie_probabilities_discrete(ev2, {0.0, 0.0});
    REQUIRE(t2.entries.at(both) == Catch::Approx(0.7));
    REQUIRE(t2.empty_tie == Catch::Approx(0.3));
}

TEST_CASE("tie partition sums to one") {
    Rng rng(88);
    RevenueCurve curve = build_revenue_curve(
        BidModel::single_bidder(CdfFamily::uniform(0.0, 2.0)), 50);
    auto model = fixtures::random_mixture(rng, BidModel::single_bidder(CdfFamily::uniform(0.0, 2.0)));
    DualVector v(model.advertiser_count());
    for (auto& x : v) x = rng.uniform(0.0, 1.0);
    auto res = tie_probabilities(model, curve, v);
    REQUIRE(res.table.total() == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("analytic tie masses match Monte Carlo") {
    auto bids = BidModel::single_bidder(CdfFamily::lognormal(6.3, 0.8));
    auto model = fixtures::instance1(bids);
    RevenueCurve curve = build_revenue_curve(bids, 100);
    dual::SolveOptions opts;
    DualVector v{700.0, 600.0, 400.0};
    auto analytic = tie_probabilities(model, curve, v);
    REQUIRE_FALSE(analytic.used_monte_carlo);

    const int m = 400000;
    SampleEvaluator mc = SampleEvaluator::from_model(model, curve, m, 4242, opts);
    EvalContext ctx = EvalContext::all(3);
    ctx.want_ties = true;
    TieTable mct = mc.evaluate(v, ctx).ties;
    for (const auto& [mask, p] : analytic.table.entries) {
        double phat = mct.entries.count(mask) ? mct.entries.at(mask) : 0.0;
        double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / m);
        REQUIRE(std::abs(phat - p) <= 4.0 * se + 1e-6);
    }
}

TEST_CASE("degenerate models fall back to Monte Carlo tie estimation") {
    // perfectly correlated pair within a type
    std::vector<market::Advertiser> advs{{"a", 0.3, 0.0, {}}, {"b", 0.3, 0.0, {}}};
    std::vector<market::UserType> types{
        {{0, 1}, 1.0, {0.0, 0.0}, {0.25, 0.25, 0.25, 0.25}}};
    market::MarketModel model(advs, types, 1.0, BidModel::null_exchange());
    RevenueCurve curve = build_revenue_curve(BidModel::null_exchange(), 10);
    auto res = tie_probabilities(model, curve, {0.0, 0.0});
    REQUIRE(res.used_monte_carlo);
    // identical log-qualities: the pair ties almost surely
    SubsetMask both = advertiser_bit(0) | advertiser_bit(1);
    REQUIRE(res.table.entries.at(both) == Catch::Approx(1.0).margin(1e-3));
}

TEST_CASE("flow on a single full tie splits by demand") {
    TieTable t;
    t.advertiser_count = 2;
    SubsetMask both = advertiser_bit(0) | advertiser_bit(1);
    t.add(both, 1.0);
    auto res = solve_tiebreak_flow(t, {0.5, 0.5});
    REQUIRE(res.feasible);
    REQUIRE(res.rule.flows.at(both)[0] == Catch::Approx(0.5));
    REQUIRE(res.rule.flows.at(both)[1] == Catch::Approx(0.5));
    REQUIRE(res.rule.routing(both, 0) == Catch::Approx(0.5));
    REQUIRE(res.residual <= 1e-9);
}

TEST_CASE("singleton ties route with probability one") {
    TieTable t;
    t.advertiser_count = 2;
    t.add(advertiser_bit(0), 0.4);
    t.add(advertiser_bit(1), 0.35);
    t.add(outside_bit(2), 0.25);
    auto res = solve_tiebreak_flow(t, {0.4, 0.35});
    REQUIRE(res.feasible);
    REQUIRE(res.rule.routing(advertiser_bit(0), 0) == Catch::Approx(1.0));
    REQUIRE(res.rule.routing(advertiser_bit(1), 1) == Catch::Approx(1.0));
}

TEST_CASE("infeasible tables come back with a cut certificate") {
    TieTable t;
    t.advertiser_count = 2;
    t.add(advertiser_bit(0), 0.2);
    t.add(outside_bit(2), 0.8);
    auto res = solve_tiebreak_flow(t, {0.5, 0.0});
    REQUIRE_FALSE(res.feasible);
    REQUIRE_FALSE(res.cut_advertisers.empty());
}

TEST_CASE("flow is feasible at exactly solved duals on random discrete instances") {
    Rng rng(909);
    for (int trial = 0; trial < 25; ++trial) {
        int A = 1 + static_cast<int>(rng.uniform01() * 3) % 3;
        std::vector<std::vector<double>> atoms;
        int n_atoms = 3 + static_cast<int>(rng.uniform01() * 4);
        for (int i = 0; i < n_atoms; ++i) {
            std::vector<double> q;
            // a small value grid makes genuine multi-way ties likely
            for (int a = 0; a < A; ++a) q.push_back(0.25 * (1 + static_cast<int>(rng.uniform01() * 4)));
            atoms.push_back(q);
        }
        std::vector<double> rho;
        double budget = 0.8;
        for (int a = 0; a < A; ++a) rho.push_back(rng.uniform(0.08, budget / A));
        RevenueCurve curve = build_revenue_curve(BidModel::null_exchange(), 10);
        SampleEvaluator ev = SampleEvaluator::equal_weight(atoms, rho, curve);
        dual::DualSolution sol = dual::solve_dual_discrete(ev);
        REQUIRE(sol.converged);
        TieTable table = tie_probabilities_discrete(ev, sol.v);
        auto flow = solve_tiebreak_flow(table, rho);
        INFO("trial " << trial << " note " << sol.note);
        REQUIRE(flow.feasible);
        REQUIRE(flow.residual <= 1e-9);
    }
}

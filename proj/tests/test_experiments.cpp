#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "adx/experiments/experiments.hpp"
#include "fixtures.hpp"

using namespace adx;
using namespace adx::experiments;
using adx::exchange::BidModel;
using adx::exchange::CdfFamily;
using adx::exchange::RevenueCurve;
using adx::exchange::build_revenue_curve;

TEST_CASE("regret constant formula") {
    // A = 1, rho = rho_0 = 0.5: K = sqrt(1/2 * (1 + 1)) = 1
    REQUIRE(regret_constant({0.5}) == Catch::Approx(1.0));
    // A = 2, rho = (0.25, 0.25), rho_0 = 0.5
    double expect = std::sqrt(2.0 / 3.0 * (3.0 + 3.0 + 1.0));
    REQUIRE(regret_constant({0.25, 0.25}) == Catch::Approx(expect));
}

TEST_CASE("analytic efficiency values from the closed forms") {
    REQUIRE(analytic_efficiency(EffFamily::Exponential, 0.2032) ==
            Catch::Approx(1.544).margin(5e-4));
    REQUIRE(analytic_efficiency(EffFamily::NormalKnownVar, 0.5) ==
            Catch::Approx(1.5707963).margin(1e-6));
}

TEST_CASE("efficiency experiment approaches the analytic ratio") {
    auto rows = estimator_efficiency(EffFamily::Exponential, 1.0, 0.0, 0.2032, {1000},
                                     4000, 2027);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].ratio ==
            Catch::Approx(rows[0].analytic).epsilon(0.12));
    REQUIRE(rows[0].ratio >= 1.0 - 0.1); // Cramer-Rao direction
}

TEST_CASE("uniform-fixture regret shrinks with the horizon and obeys the bound") {
    struct UniformSource {
        void sample(Rng& rng, std::vector<double>& q) const { q.assign(1, rng.uniform01()); }
    };
    UniformSource src;
    RevenueCurve curve = build_revenue_curve(BidModel::null_exchange(), 10);
    policy::PolicyConfig cfg;
    cfg.v = {0.5};
    auto rows = regret_experiment(src, {0.5}, curve, cfg, 0.375, {100, 10000}, 200, 11);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) REQUIRE(r.mean_regret <= r.bound);
    REQUIRE(rows[1].mean_regret < rows[0].mean_regret);
}

TEST_CASE("pareto sweep is monotone with anchors") {
    auto bids = BidModel::single_bidder(CdfFamily::lognormal(6.0, 0.8));
    auto model = fixtures::instance1(bids);
    RevenueCurve curve = build_revenue_curve(bids, 100);
    dual::SolveOptions opts;
    auto rows = pareto_sweep(model, curve, {0.0, 0.05, 0.5, 5.0}, opts);
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 0; i + 2 < rows.size(); ++i) {
        REQUIRE(rows[i + 1].quality >= rows[i].quality - 1e-6 * std::abs(rows[i].quality));
        REQUIRE(rows[i + 1].revenue <= rows[i].revenue + 1e-6 * std::abs(rows[i].revenue));
    }
    const FrontierPoint& anchor = rows.back();
    REQUIRE(std::isinf(anchor.gamma));
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        REQUIRE(anchor.quality >= rows[i].quality - 1e-9);
        REQUIRE(std::isfinite(rows[i].yield));
        REQUIRE(rows[i].yield ==
                Catch::Approx(rows[i].revenue + rows[i].gamma * rows[i].quality));
    }
}

TEST_CASE("parametric vs primal-dual comparison converges to OPT") {
    auto model = fixtures::instance1();
    auto rows = compare_pd(model, {100, 800}, 10, 5);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        REQUIRE(r.est_mean <= r.opt + 1e-6);
        REQUIRE(r.pd_mean <= r.opt + 1e-6);
    }
    // larger training sets close the gap and shrink the spread
    REQUIRE(rows[1].est_mean > rows[0].est_mean);
    REQUIRE(rows[1].est_std < rows[0].est_std);
    REQUIRE(rows[1].pd_mean > rows[0].pd_mean);
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "adx/market/json_io.hpp"
#include "adx/market/model.hpp"
#include "fixtures.hpp"

using namespace adx;
using namespace adx::market;
using adx::exchange::BidModel;

TEST_CASE("degenerate log-normal sampling is the constant 1") {
    std::vector<Advertiser> advs{{"a", 0.5, 0.0, {}}};
    std::vector<UserType> types{{{0}, 1.0, {0.0}, {0.0}}};
    MarketModel m(advs, types, 1.0, BidModel::null_exchange());
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        auto q = sample_impression(m, rng);
        REQUIRE(q.values[0] == Catch::Approx(1.0).margin(1e-4));
    }
}

TEST_CASE("out-of-type advertisers get exactly minus tau") {
    std::vector<Advertiser> advs{{"a", 0.3, 0.0, {}}, {"b", 0.3, 3.0, {}}};
    std::vector<UserType> types{{{0}, 1.0, {0.1}, {0.2}}};
    MarketModel m(advs, types, 1.0, BidModel::null_exchange());
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        auto q = sample_impression(m, rng);
        REQUIRE(q.values[1] == -3.0);
        REQUIRE(q.values[0] > 0.0);
    }
}

TEST_CASE("type frequencies follow the mixing probabilities") {
    auto m = fixtures::instance1();
    Rng rng(100);
    const int n = 100000;
    std::vector<double> counts(4, 0.0);
    for (int i = 0; i < n; ++i) counts[sample_impression(m, rng).type_index] += 1.0;
    std::vector<double> pi{0.2, 0.3, 0.1, 0.4};
    double chi2 = 0.0;
    for (int t = 0; t < 4; ++t) {
        double expect = pi[t] * n;
        chi2 += (counts[t] - expect) * (counts[t] - expect) / expect;
    }
    REQUIRE(chi2 < 16.27); // chi-square(3) at the 0.1% level
}

TEST_CASE("sampled log moments converge to the type parameters") {
    std::vector<Advertiser> advs{{"a", 0.2, 0.0, {}}, {"b", 0.2, 0.0, {}}};
    std::vector<UserType> types{{{0, 1}, 1.0, {0.5, -0.2}, {0.4, 0.15, 0.15, 0.3}}};
    MarketModel m(advs, types, 1.0, BidModel::null_exchange());
    Rng rng(9);
    const int n = 100000;
    double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
    for (int i = 0; i < n; ++i) {
        auto q = sample_impression(m, rng);
        double l1 = std::log(q.values[0]), l2 = std::log(q.values[1]);
        s1 += l1;
        s2 += l2;
        s11 += l1 * l1;
        s22 += l2 * l2;
        s12 += l1 * l2;
    }
    double m1 = s1 / n, m2 = s2 / n;
    double c11 = s11 / n - m1 * m1, c22 = s22 / n - m2 * m2, c12 = s12 / n - m1 * m2;
    // 4-sigma CLT bands
    REQUIRE(m1 == Catch::Approx(0.5).margin(4.0 * std::sqrt(0.4 / n)));
    REQUIRE(m2 == Catch::Approx(-0.2).margin(4.0 * std::sqrt(0.3 / n)));
    REQUIRE(c11 == Catch::Approx(0.4).margin(4.0 * std::sqrt(2 * 0.4 * 0.4 / n)));
    REQUIRE(c22 == Catch::Approx(0.3).margin(4.0 * std::sqrt(2 * 0.3 * 0.3 / n)));
    REQUIRE(c12 == Catch::Approx(0.15).margin(4.0 * std::sqrt((0.4 * 0.3 + 0.15 * 0.15) / n)));
}

TEST_CASE("fit_mixture hand example") {
    // two samples of a 1-advertiser type with qualities e and e^3
    std::vector<MixtureSample> samples{{{0}, {std::exp(1.0)}}, {{0}, {std::exp(3.0)}}};
    MixtureFit fit = fit_mixture(samples);
    REQUIRE(fit.types.size() == 1);
    REQUIRE(fit.types[0].probability == 1.0);
    REQUIRE(fit.types[0].log_mean[0] == Catch::Approx(2.0));
    REQUIRE(fit.types[0].log_cov[0] == Catch::Approx(1.0)); // denominator = count
}

TEST_CASE("fit_mixture flags singleton types") {
    std::vector<MixtureSample> samples{{{0}, {1.5}}};
    MixtureFit fit = fit_mixture(samples);
    REQUIRE(fit.types[0].probability == 1.0);
    REQUIRE(fit.types[0].log_cov[0] == 0.0);
    REQUIRE_FALSE(fit.warnings.empty());
}

TEST_CASE("fit round trip recovers the mixture") {
    auto m = fixtures::instance1();
    Rng rng(123);
    const int n = 10000;
    std::vector<QualityVector> qs;
    qs.reserve(n);
    for (int i = 0; i < n; ++i) qs.push_back(sample_impression(m, rng));
    MixtureFit fit = fit_mixture(to_mixture_samples(qs));
    REQUIRE(fit.types.size() == 4);
    for (const auto& t : fit.types) {
        const UserType* truth = nullptr;
        for (const auto& tt : m.types())
            if (tt.members == t.members) truth = &tt;
        REQUIRE(truth != nullptr);
        double sigma = std::sqrt(truth->probability * (1.0 - truth->probability) / n);
        REQUIRE(t.probability == Catch::Approx(truth->probability).margin(3.0 * sigma));
        for (std::size_t i = 0; i < t.log_mean.size(); ++i)
            REQUIRE(t.log_mean[i] == Catch::Approx(truth->log_mean[i]).margin(0.05));
    }
}

TEST_CASE("type feasibility flow verdicts") {
    std::vector<UserType> types{{{0}, 0.5, {0.0}, {0.1}}};
    auto r1 = check_type_feasibility(types, {0.6});
    REQUIRE_FALSE(r1.feasible);
    REQUIRE(r1.max_flow == Catch::Approx(0.5));
    auto r2 = check_type_feasibility(types, {0.3});
    REQUIRE(r2.feasible);
    auto r3 = check_type_feasibility(types, {0.0});
    REQUIRE(r3.feasible); // zero demand is trivially coverable
}

TEST_CASE("feasibility is invariant under advertiser relabeling") {
    std::vector<UserType> types{{{0, 1}, 0.4, {0.0, 0.0}, {0.1, 0.0, 0.0, 0.1}},
                                {{1}, 0.6, {0.0}, {0.1}}};
    auto base = check_type_feasibility(types, {0.25, 0.45});
    std::vector<UserType> swapped{{{0, 1}, 0.4, {0.0, 0.0}, {0.1, 0.0, 0.0, 0.1}},
                                  {{0}, 0.6, {0.0}, {0.1}}};
    auto flipped = check_type_feasibility(swapped, {0.45, 0.25});
    REQUIRE(base.feasible == flipped.feasible);
    REQUIRE(base.max_flow == Catch::Approx(flipped.max_flow));
}

TEST_CASE("penalty bound reporting") {
    auto m = fixtures::instance1();
    auto rep = check_type_feasibility(m);
    REQUIRE(rep.penalty_bound == Catch::Approx(100.0 / 3.0));
    REQUIRE(penalty_bound_holds(m, 30.0));
    REQUIRE_FALSE(penalty_bound_holds(m, 40.0));
}

TEST_CASE("model validation rejects bad configs") {
    std::vector<Advertiser> advs{{"a", 0.5, 0.0, {}}, {"b", 0.6, 0.0, {}}};
    std::vector<UserType> types{{{0}, 1.0, {0.0}, {0.1}}};
    REQUIRE_THROWS_AS(MarketModel(advs, types, 1.0, BidModel::null_exchange()), ConfigError);

    std::vector<Advertiser> reserved{{"0", 0.5, 0.0, {}}};
    REQUIRE_THROWS_AS(MarketModel(reserved, types, 1.0, BidModel::null_exchange()),
                      ConfigError);

    std::vector<Advertiser> ok{{"a", 0.3, 0.0, {}}};
    std::vector<UserType> dup{{{0}, 0.5, {0.0}, {0.1}}, {{0}, 0.5, {1.0}, {0.1}}};
    REQUIRE_THROWS_AS(MarketModel(ok, dup, 1.0, BidModel::null_exchange()), ConfigError);

    std::vector<Advertiser> two{{"a", 0.3, 0.0, {}}, {"b", 0.3, 0.0, {}}};
    std::vector<UserType> asym{{{0, 1}, 1.0, {0.0, 0.0}, {0.1, 0.3, 0.1, 0.2}}};
    REQUIRE_THROWS_AS(MarketModel(two, asym, 1.0, BidModel::null_exchange()), ConfigError);
}

TEST_CASE("model JSON round trip") {
    auto m = fixtures::instance1(BidModel::single_bidder(
        adx::exchange::CdfFamily::lognormal(6.0, 0.7)));
    json j = model_to_json(m);
    MarketModel back = model_from_json(j);
    REQUIRE(back.advertiser_count() == 3);
    REQUIRE(back.types().size() == 4);
    REQUIRE(back.types()[1].log_mean[0] == Catch::Approx(6.6755));
    REQUIRE(back.gamma() == m.gamma());
    REQUIRE(back.bids().kind() == exchange::BidModel::Kind::SingleBidder);
}

TEST_CASE("sample CSV round trip") {
    auto m = fixtures::instance1();
    Rng rng(5);
    std::vector<QualityVector> qs;
    for (int i = 0; i < 20; ++i) qs.push_back(sample_impression(m, rng));
    std::ostringstream os;
    write_sample_csv(os, m, qs);
    std::istringstream is(os.str());
    auto samples = read_sample_csv(is);
    REQUIRE(samples.size() == qs.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::vector<int> members;
        for (std::size_t a = 0; a < qs[i].values.size(); ++a)
            if (qs[i].values[a] > 0.0) members.push_back(static_cast<int>(a));
        REQUIRE(samples[i].members == members);
    }
}

TEST_CASE("bid CSV parsing") {
    std::istringstream is("b1,b2\n5,3\n2,1\n");
    auto samples = read_bid_csv(is);
    REQUIRE(samples.size() == 2);
    REQUIRE(samples[0].highest == 5.0);
    REQUIRE(samples[1].second_highest == 1.0);
}

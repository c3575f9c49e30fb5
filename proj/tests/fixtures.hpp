#pragma once

// Shared test fixtures: the published 3-advertiser/4-type quality mixture,
// small synthetic models, random instance generators, and closed-form
// oracles used to freeze expected values.

#include <cmath>
#include <vector>

#include "adx/core/rng.hpp"
#include "adx/core/stats.hpp"
#include "adx/exchange/revenue_curve.hpp"
#include "adx/market/model.hpp"

namespace fixtures {

using adx::Rng;
using adx::exchange::BidModel;
using adx::exchange::CdfFamily;
using adx::market::Advertiser;
using adx::market::MarketModel;
using adx::market::UserType;

// 4-type, 3-advertiser mixture; rho and tau are test choices.
inline MarketModel instance1(BidModel bids = BidModel::null_exchange(), double gamma = 1.0,
                             std::vector<double> rho = {0.25, 0.20, 0.15},
                             double tau = 100.0) {
    std::vector<Advertiser> advs{{"a1", rho[0], tau, {}},
                                 {"a2", rho[1], tau, {}},
                                 {"a3", rho[2], tau, {}}};
    std::vector<UserType> types;
    types.push_back({{0, 1, 2},
                     0.2,
                     {7.8155, 7.8155, 7.8155},
                     {0.3, 0.1, 0.1, 0.1, 0.3, 0.1, 0.1, 0.1, 0.3}});
    types.push_back({{0, 1}, 0.3, {6.6755, 7.0655}, {0.3180, 0.1649, 0.1649, 0.3602}});
    types.push_back({{1, 2}, 0.1, {6.6355, 7.8055}, {0.4347, 0.2357, 0.2357, 0.4367}});
    types.push_back({{0, 2}, 0.4, {7.2155, 6.9155}, {0.23, 0.05, 0.05, 0.40}});
    return MarketModel(std::move(advs), std::move(types), gamma, std::move(bids));
}

// Single advertiser with log-normal quality.
inline MarketModel single_lognormal(double mu, double sigma, double rho,
                                    BidModel bids = BidModel::null_exchange(),
                                    double gamma = 1.0) {
    std::vector<Advertiser> advs{{"a", rho, 0.0, {}}};
    std::vector<UserType> types{{{0}, 1.0, {mu}, {sigma * sigma}}};
    return MarketModel(std::move(advs), std::move(types), gamma, std::move(bids));
}

// Randomized mixture instance for property tests.
inline MarketModel random_mixture(Rng& rng, BidModel bids, int max_advertisers = 4,
                                  int max_types = 6) {
    int A = 1 + static_cast<int>(rng.uniform01() * max_advertisers);
    if (A > max_advertisers) A = max_advertisers;
    std::vector<Advertiser> advs;
    double rho_budget = 0.85;
    for (int a = 0; a < A; ++a) {
        double r = rng.uniform(0.05, rho_budget / A);
        advs.push_back({"a" + std::to_string(a + 1), r, rng.uniform(0.0, 2.0), {}});
    }
    int T = 1 + static_cast<int>(rng.uniform01() * max_types);
    if (T > max_types) T = max_types;
    std::vector<UserType> types;
    std::vector<std::vector<int>> used;
    for (int t = 0; t < T && static_cast<int>(types.size()) < T; ++t) {
        // member set: random non-empty subset, sizes biased small
        std::vector<int> members;
        for (int a = 0; a < A; ++a)
            if (rng.uniform01() < 0.45) members.push_back(a);
        if (members.empty()) members.push_back(static_cast<int>(rng.uniform01() * A) % A);
        if (std::find(used.begin(), used.end(), members) != used.end()) continue;
        used.push_back(members);
        std::size_t n = members.size();
        UserType ut;
        ut.members = members;
        ut.probability = rng.uniform(0.2, 1.0);
        for (std::size_t i = 0; i < n; ++i) ut.log_mean.push_back(rng.uniform(-0.5, 1.0));
        // random PSD covariance: L L^T with small off-diagonals
        std::vector<double> L(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < i; ++j) L[i * n + j] = rng.uniform(-0.25, 0.25);
            L[i * n + i] = rng.uniform(0.35, 0.9);
        }
        ut.log_cov.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < n; ++k)
                    ut.log_cov[i * n + j] += L[i * n + k] * L[j * n + k];
        types.push_back(std::move(ut));
    }
    double total = 0.0;
    for (const auto& t : types) total += t.probability;
    for (auto& t : types) t.probability /= total;
    return MarketModel(std::move(advs), std::move(types), 1.0, std::move(bids));
}

// Uniform[0,1] single-advertiser quality samples (Monte Carlo / SAA path).
inline std::vector<std::vector<double>> uniform_samples(int m, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> out;
    out.reserve(m);
    for (int i = 0; i < m; ++i) out.push_back({rng.uniform01()});
    return out;
}

// E[(Q - v)^+] for Q ~ logN(mu, sigma^2).
inline double lognormal_call(double mu, double sigma, double v) {
    if (v <= 0.0) return std::exp(mu + 0.5 * sigma * sigma) - v;
    double d1 = (mu + sigma * sigma - std::log(v)) / sigma;
    double d2 = (mu - std::log(v)) / sigma;
    return std::exp(mu + 0.5 * sigma * sigma) * adx::norm_cdf(d1) - v * adx::norm_cdf(d2);
}

// Survival quantile of logN: smallest v with P(Q > v) = rho.
inline double lognormal_survival_quantile(double mu, double sigma, double rho) {
    return std::exp(mu + sigma * adx::norm_quantile(1.0 - rho));
}

} // namespace fixtures

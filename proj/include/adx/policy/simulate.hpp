#pragma once

// Static bid-price policy with exchange pricing: per impression, the best
// contract-adjusted quality over unfulfilled advertisers (and the outside
// option) sets the opportunity cost, the exchange is tried at the optimal
// reserve, and rejections are assigned by the (renormalized) tie rule.
// Exact delivery is enforced by the reject-all branch once every remaining
// impression is owed to a contract.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "adx/core/errors.hpp"
#include "adx/core/rng.hpp"
#include "adx/dual/types.hpp"
#include "adx/exchange/revenue_curve.hpp"
#include "adx/market/model.hpp"
#include "adx/tiebreak/types.hpp"

namespace adx::policy {

struct PolicyConfig {
    dual::DualVector v;
    std::vector<double> scales; // per-advertiser quality scale in the argmax
    double gamma = 1.0;         // yield = adx_revenue + gamma * total quality
    tiebreak::TieBreakRule rule; // empty -> uniform split among tied
    double tie_tolerance = 1e-9;
};

struct SimOutcome {
    double yield = 0.0;
    double adx_revenue = 0.0;
    std::vector<double> quality;  // raw, per advertiser
    std::vector<long> delivered;  // per advertiser
    long leftover_onset = 0;      // N*: first contract fulfilled / forced regime
    std::uint64_t seed = 0;
};

// Largest-remainder rounding of N * rho with sum capped at N.
inline std::vector<long> capacities_from_rho(const std::vector<double>& rho, long n) {
    std::vector<long> c(rho.size());
    long total = 0;
    for (std::size_t a = 0; a < rho.size(); ++a) {
        c[a] = std::lround(rho[a] * static_cast<double>(n));
        total += c[a];
    }
    while (total > n) {
        // shrink the entry that over-rounded the most
        std::size_t pick = 0;
        double worst = -INFINITY;
        for (std::size_t a = 0; a < rho.size(); ++a) {
            double excess = static_cast<double>(c[a]) - rho[a] * static_cast<double>(n);
            if (c[a] > 0 && excess > worst) {
                worst = excess;
                pick = a;
            }
        }
        --c[pick];
        --total;
    }
    return c;
}

// Quality sources: anything with sample(rng, out_values).
struct MarketSource {
    const market::MarketModel* model;
    void sample(Rng& rng, std::vector<double>& q) const {
        q = market::sample_impression(*model, rng).values;
    }
};

template <class QualitySource>
SimOutcome simulate_policy(const QualitySource& source, const std::vector<double>& rho,
                           const exchange::RevenueCurve& curve, const PolicyConfig& cfg,
                           long n_impressions, std::uint64_t seed) {
    const std::size_t A = rho.size();
    if (cfg.v.size() != A) throw ConfigError("policy v dimension mismatch");
    std::vector<double> scales = cfg.scales.empty() ? std::vector<double>(A, cfg.gamma)
                                                    : cfg.scales;
    if (scales.size() != A) throw ConfigError("policy scales dimension mismatch");

    std::vector<long> cap = capacities_from_rho(rho, n_impressions);
    long owed = 0;
    for (long c : cap) owed += c;
    if (owed > n_impressions) throw ConfigError("infeasible horizon: N < sum of capacities");

    SimOutcome out;
    out.seed = seed;
    out.quality.assign(A, 0.0);
    out.delivered.assign(A, 0);
    out.leftover_onset = n_impressions + 1;

    Rng rng(seed);
    std::vector<long> x = cap;
    std::vector<double> q;
    std::vector<int> winners;
    const exchange::BidModel& bids = curve.model();
    const bool explicit_bids = bids.kind() == exchange::BidModel::Kind::SecondPrice ||
                               bids.kind() == exchange::BidModel::Kind::Empirical;

    if (owed == n_impressions && out.leftover_onset > 0) out.leftover_onset = 0;

    for (long n = 1; n <= n_impressions; ++n) {
        long remaining = n_impressions - n + 1;
        source.sample(rng, q);
        bool forced = owed == remaining;

        // Arg-max of contract-adjusted quality over the active set.
        double level = forced ? -INFINITY : 0.0; // outside option present if not forced
        for (std::size_t a = 0; a < A; ++a) {
            if (x[a] <= 0) continue;
            level = std::max(level, scales[a] * q[a] - cfg.v[a]);
        }
        winners.clear();
        tiebreak::SubsetMask mask = 0;
        if (!forced && 0.0 >= level - cfg.tie_tolerance) {
            winners.push_back(-1);
            mask |= tiebreak::outside_bit(static_cast<int>(A));
        }
        for (std::size_t a = 0; a < A; ++a) {
            if (x[a] <= 0) continue;
            if (scales[a] * q[a] - cfg.v[a] >= level - cfg.tie_tolerance) {
                winners.push_back(static_cast<int>(a));
                mask |= tiebreak::advertiser_bit(static_cast<int>(a));
            }
        }

        bool accepted = false;
        if (!forced) {
            exchange::ExchangeResponse resp = curve.oracle().query(level);
            if (!resp.reserve.is_null) {
                if (explicit_bids) {
                    exchange::BidSample b = bids.draw(rng);
                    if (b.highest >= resp.reserve.value) {
                        accepted = true;
                        out.adx_revenue += std::max(b.second_highest, resp.reserve.value);
                    }
                } else if (rng.uniform01() < resp.survival) {
                    accepted = true;
                    out.adx_revenue += resp.reserve.value;
                }
            }
        }

        if (!accepted) {
            int target = winners.size() == 1 ? winners.front() : -2;
            if (target == -2) {
                // tie: route by the rule, renormalized over the still-active set
                std::vector<double> w(winners.size(), 0.0);
                double tot = 0.0;
                if (cfg.rule.has(mask)) {
                    for (std::size_t i = 0; i < winners.size(); ++i) {
                        int slot = winners[i] < 0 ? static_cast<int>(A) : winners[i];
                        w[i] = cfg.rule.routing(mask, slot);
                        tot += w[i];
                    }
                }
                if (tot <= 1e-15) w.assign(winners.size(), 1.0);
                std::size_t pick = rng.categorical(w);
                target = winners[pick];
            }
            if (target >= 0) {
                --x[static_cast<std::size_t>(target)];
                --owed;
                ++out.delivered[static_cast<std::size_t>(target)];
                out.quality[static_cast<std::size_t>(target)] += q[static_cast<std::size_t>(target)];
                if (x[static_cast<std::size_t>(target)] == 0 && out.leftover_onset > n)
                    out.leftover_onset = n;
            }
        }
        if (owed == n_impressions - n && out.leftover_onset > n && owed > 0)
            out.leftover_onset = n;
    }

    for (std::size_t a = 0; a < A; ++a)
        if (x[a] != 0)
            throw NumericError("policy failed exact delivery for advertiser " +
                               std::to_string(a));
    double total_quality = 0.0;
    for (double qa : out.quality) total_quality += qa;
    out.yield = out.adx_revenue + cfg.gamma * total_quality;
    return out;
}

inline SimOutcome simulate_policy(const market::MarketModel& model,
                                  const exchange::RevenueCurve& curve, const PolicyConfig& cfg,
                                  long n_impressions, std::uint64_t seed) {
    MarketSource src{&model};
    return simulate_policy(src, model.rho(), curve, cfg, n_impressions, seed);
}

// Deterministic-approximation upper bound N * psi(v*).
inline double dap_upper_bound(double psi_at_v, long n) {
    return static_cast<double>(n) * psi_at_v;
}

} // namespace adx::policy

#pragma once

// Experiment drivers: trade-off sweep over gamma, regret-vs-horizon study,
// estimator-efficiency comparison (MLE plug-in vs sample quantile), and the
// parametric-vs-primal-dual training comparison.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "adx/core/parallel.hpp"
#include "adx/core/rng.hpp"
#include "adx/core/stats.hpp"
#include "adx/dual/solve.hpp"
#include "adx/fluid/fluid.hpp"
#include "adx/market/model.hpp"
#include "adx/policy/simulate.hpp"

namespace adx::experiments {

// --- Pareto sweep over the trade-off parameter ----------------------------

struct FrontierPoint {
    double gamma = 0.0; // +inf encodes the no-exchange anchor
    double quality = 0.0;
    double revenue = 0.0;
    double yield = 0.0;
    bool converged = true;
};

// Solves the dual with gamma-scaled qualities and scores it with the fluid
// limit. gamma = 0 is regularized to a vanishing positive scale (the policy
// limit as gamma -> 0+); the +inf anchor solves without the exchange and
// sells the remnant at the zero-cost optimal reserve.
inline std::vector<FrontierPoint> pareto_sweep(const market::MarketModel& model,
                                               const exchange::RevenueCurve& curve,
                                               std::vector<double> gamma_grid,
                                               dual::SolveOptions opts = {},
                                               unsigned threads = 0) {
    std::sort(gamma_grid.begin(), gamma_grid.end());
    const std::size_t A = model.advertiser_count();
    std::vector<FrontierPoint> out(gamma_grid.size() + 1);

    exchange::RevenueCurve null_curve =
        exchange::build_revenue_curve(exchange::BidModel::null_exchange(), 16);

    // gamma -> 0+: the exchange response freezes at its zero-cost optimum, so
    // every impression is submitted at p*(0) and the rejected fraction
    // 1 - s*(0) is assigned by the pure-quality rule with capacities
    // inflated accordingly. That reduced problem is a well-scaled gamma = 1
    // assignment dual.
    auto run_gamma_zero = [&]() {
        // Revenue is maximized over survivals that still reject the
        // contracted mass; hull mixing attains any survival in between.
        exchange::ExchangeResponse at_zero = curve.oracle().query(0.0);
        std::vector<double> rho = model.rho();
        double rho_sum = 0.0;
        for (double r : rho) rho_sum += r;
        double s_target = std::min(at_zero.survival, 1.0 - rho_sum);
        double rejected = 1.0 - s_target;
        std::vector<double> inflated = rho;
        for (auto& r : inflated) r /= std::max(rejected, 1e-12);

        market::MarketModel reduced(
            [&] {
                auto advs = model.advertisers();
                for (std::size_t a = 0; a < advs.size(); ++a) advs[a].rho = inflated[a];
                return advs;
            }(),
            model.types(), 1.0, exchange::BidModel::null_exchange());
        dual::MixtureEvaluator ev(reduced, null_curve, opts);
        dual::DualSolution sol = dual::solve_dual_gd(ev, opts);
        auto fl = fluid::fluid_evaluate(ev, sol.v);

        FrontierPoint p;
        p.gamma = 0.0;
        p.quality = rejected * fl.quality_total();
        p.revenue = curve.oracle().revenue_at_survival(s_target);
        p.converged = sol.converged;
        p.yield = p.revenue;
        return p;
    };

    auto run_gamma = [&](std::size_t gi) {
        double gamma = gamma_grid[gi];
        if (gamma <= 0.0) {
            out[gi] = run_gamma_zero();
            return;
        }
        dual::MixtureEvaluator ev(model, curve, std::vector<double>(A, gamma), opts);
        dual::DualSolution sol = dual::solve_dual_gd(ev, opts);
        auto fl = fluid::fluid_evaluate(ev, sol.v);
        FrontierPoint p;
        p.gamma = gamma;
        p.quality = fl.quality_total();
        p.revenue = fl.adx_revenue;
        p.yield = p.revenue + gamma * p.quality;
        p.converged = sol.converged;
        out[gi] = p;
    };
    parallel_for(gamma_grid.size(), run_gamma, threads);

    // gamma = +inf anchor: quality-only assignment, remnant at p*(0).
    {
        dual::MixtureEvaluator ev(model, null_curve, std::vector<double>(A, 1.0), opts);
        dual::DualSolution sol = dual::solve_dual_gd(ev, opts);
        auto fl = fluid::fluid_evaluate(ev, sol.v);
        FrontierPoint p;
        p.gamma = INFINITY;
        p.quality = fl.quality_total();
        p.revenue = fl.outside_consumed * curve.oracle().query(0.0).spot_revenue;
        p.yield = INFINITY;
        p.converged = sol.converged;
        out.back() = p;
    }
    return out;
}

// --- Theorem-2 style regret over the horizon -------------------------------

struct RegretRow {
    long n = 0;
    double mean_regret = 0.0; // 1 - yield / (N psi*)
    double band = 0.0;        // 95% half-width
    double bound = 0.0;       // K(rho)/sqrt(N)
};

inline double regret_constant(const std::vector<double>& rho) {
    double a = static_cast<double>(rho.size());
    double rho0 = 1.0;
    double sum = 0.0;
    for (double r : rho) {
        rho0 -= r;
        sum += (1.0 - r) / r;
    }
    sum += (1.0 - rho0) / rho0;
    return std::sqrt(a / (a + 1.0) * sum);
}

template <class QualitySource>
std::vector<RegretRow> regret_experiment(const QualitySource& source,
                                         const std::vector<double>& rho,
                                         const exchange::RevenueCurve& curve,
                                         const policy::PolicyConfig& cfg, double psi_star,
                                         const std::vector<long>& n_grid, int reps,
                                         std::uint64_t seed, unsigned threads = 0) {
    std::vector<RegretRow> rows;
    double k_rho = regret_constant(rho);
    for (long n : n_grid) {
        std::vector<double> yields(static_cast<std::size_t>(reps), 0.0);
        parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
            Rng sub = Rng::substream(seed, (static_cast<std::uint64_t>(n) << 20) + r);
            yields[r] = policy::simulate_policy(source, rho, curve, cfg, n,
                                                sub.next_u64())
                            .yield;
        }, threads);
        double mean = 0.0;
        for (double y : yields) mean += y;
        mean /= reps;
        double var = 0.0;
        for (double y : yields) var += (y - mean) * (y - mean);
        var /= std::max(1, reps - 1);
        double denom = static_cast<double>(n) * psi_star;
        RegretRow row;
        row.n = n;
        row.mean_regret = 1.0 - mean / denom;
        row.band = 1.96 * std::sqrt(var / reps) / denom;
        row.bound = k_rho / std::sqrt(static_cast<double>(n));
        rows.push_back(row);
    }
    return rows;
}

// --- estimator efficiency (MLE plug-in vs sample quantile) -----------------

enum class EffFamily { Exponential, NormalKnownVar };

struct EfficiencyRow {
    long m = 0;
    double var_saa_m = 0.0; // M * var(quantile estimator)
    double var_mle_m = 0.0; // M * var(MLE plug-in)
    double ratio = 0.0;
    double analytic = 0.0;
};

inline double analytic_efficiency(EffFamily family, double rho) {
    if (family == EffFamily::Exponential) {
        double lr = std::log(rho);
        return (1.0 - rho) / (rho * lr * lr);
    }
    double z = norm_quantile(1.0 - rho);
    return 2.0 * 3.14159265358979323846 * rho * (1.0 - rho) * std::exp(z * z);
}

inline std::vector<EfficiencyRow> estimator_efficiency(EffFamily family, double theta,
                                                       double sigma, double rho,
                                                       const std::vector<long>& m_grid,
                                                       int reps, std::uint64_t seed,
                                                       unsigned threads = 0) {
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
    std::vector<EfficiencyRow> rows;
    for (long m : m_grid) {
        std::vector<double> v_saa(static_cast<std::size_t>(reps));
        std::vector<double> v_mle(static_cast<std::size_t>(reps));
        parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
            Rng rng = Rng::substream(seed, (static_cast<std::uint64_t>(m) << 24) + r);
            std::vector<double> xs(static_cast<std::size_t>(m));
            double mean = 0.0;
            for (auto& x : xs) {
                x = family == EffFamily::Exponential ? rng.exponential(theta)
                                                     : rng.normal(theta, sigma);
                mean += x;
            }
            mean /= static_cast<double>(m);
            auto k = static_cast<std::size_t>(
                std::ceil((1.0 - rho) * static_cast<double>(m) - 1e-9));
            k = std::clamp<std::size_t>(k, 1, xs.size());
            std::nth_element(xs.begin(), xs.begin() + (k - 1), xs.end());
            v_saa[r] = xs[k - 1];
            v_mle[r] = family == EffFamily::Exponential
                           ? -std::log(rho) * mean
                           : mean + sigma * norm_quantile(1.0 - rho);
        }, threads);
        auto variance = [&](const std::vector<double>& xs) {
            double mu = 0.0;
            for (double x : xs) mu += x;
            mu /= xs.size();
            double var = 0.0;
            for (double x : xs) var += (x - mu) * (x - mu);
            return var / (xs.size() - 1);
        };
        EfficiencyRow row;
        row.m = m;
        row.var_saa_m = variance(v_saa) * static_cast<double>(m);
        row.var_mle_m = variance(v_mle) * static_cast<double>(m);
        row.ratio = row.var_saa_m / row.var_mle_m;
        row.analytic = analytic_efficiency(family, rho);
        rows.push_back(row);
    }
    return rows;
}

// --- parametric (EST) vs primal-dual (PD) comparison -----------------------

struct PdRow {
    long m = 0;
    double est_mean = 0.0, est_std = 0.0;
    double pd_mean = 0.0, pd_std = 0.0;
    double opt = 0.0;
};

inline std::vector<PdRow> compare_pd(const market::MarketModel& model,
                                     const std::vector<long>& m_grid, int reps,
                                     std::uint64_t seed, dual::SolveOptions opts = {},
                                     unsigned threads = 0) {
    if (model.bids().kind() != exchange::BidModel::Kind::NullExchange)
        throw ConfigError("compare_pd expects a no-exchange model");
    exchange::RevenueCurve curve =
        exchange::build_revenue_curve(exchange::BidModel::null_exchange(), 16);
    dual::MixtureEvaluator truth(model, curve, opts);
    dual::DualSolution opt_sol = dual::solve_dual_gd(truth, opts);
    double opt_score = fluid::fluid_evaluate(truth, opt_sol.v).total_yield;

    std::vector<PdRow> rows;
    for (long m : m_grid) {
        std::vector<double> est(static_cast<std::size_t>(reps)), pd(static_cast<std::size_t>(reps));
        parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
            Rng rng = Rng::substream(seed, (static_cast<std::uint64_t>(m) << 24) + r);
            std::vector<market::QualityVector> qs;
            qs.reserve(static_cast<std::size_t>(m));
            for (long i = 0; i < m; ++i) qs.push_back(market::sample_impression(model, rng));
            // EST: fit the mixture, solve on the fitted model, score on truth.
            auto fit = market::fit_mixture(market::to_mixture_samples(qs));
            market::MarketModel fitted(model.advertisers(), fit.types, model.gamma(),
                                       model.bids());
            dual::MixtureEvaluator fit_ev(fitted, curve, opts);
            dual::DualSolution est_sol = dual::solve_dual_gd(fit_ev, opts);
            est[r] = fluid::fluid_evaluate(truth, est_sol.v).total_yield;
            // PD: sample-average dual on the raw training samples.
            std::vector<std::vector<double>> raw;
            raw.reserve(qs.size());
            for (const auto& q : qs) raw.push_back(q.values);
            dual::DualSolution pd_sol = dual::solve_dual_saa(raw, model.rho(), curve, opts);
            pd[r] = fluid::fluid_evaluate(truth, pd_sol.v).total_yield;
        }, threads);
        auto stats = [&](const std::vector<double>& xs) {
            double mu = 0.0;
            for (double x : xs) mu += x;
            mu /= xs.size();
            double var = 0.0;
            for (double x : xs) var += (x - mu) * (x - mu);
            var /= std::max<std::size_t>(1, xs.size() - 1);
            return std::pair<double, double>(mu, std::sqrt(var));
        };
        PdRow row;
        row.m = m;
        std::tie(row.est_mean, row.est_std) = stats(est);
        std::tie(row.pd_mean, row.pd_std) = stats(pd);
        row.opt = opt_score;
        rows.push_back(row);
    }
    return rows;
}

} // namespace adx::experiments

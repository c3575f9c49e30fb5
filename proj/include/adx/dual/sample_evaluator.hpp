#pragma once

// Sample-average dual evaluation: exact for weighted discrete atoms, the SAA
// objective for drawn training samples, and the Monte Carlo oracle for the
// analytic mixture path (same quantities, same signature shape).

#include <algorithm>
#include <cmath>
#include <vector>

#include "adx/core/errors.hpp"
#include "adx/core/rng.hpp"
#include "adx/dual/types.hpp"
#include "adx/exchange/revenue_curve.hpp"
#include "adx/market/model.hpp"

namespace adx::dual {

class SampleEvaluator {
public:
    // qualities: raw per-advertiser vectors (penalties already applied for
    // out-of-type entries); weights need not be normalized.
    SampleEvaluator(std::vector<std::vector<double>> qualities, std::vector<double> weights,
                    std::vector<double> rho, const exchange::RevenueCurve& curve,
                    SolveOptions opts = {})
        : qualities_(std::move(qualities)),
          weights_(std::move(weights)),
          rho_(std::move(rho)),
          curve_(&curve),
          opts_(opts),
          scales_(rho_.size(), 1.0) {
        if (qualities_.empty()) throw ConfigError("sample evaluator needs >= 1 sample");
        if (weights_.size() != qualities_.size())
            throw ConfigError("weights/samples size mismatch");
        double total = 0.0;
        for (double w : weights_) {
            if (w < 0.0) throw ConfigError("sample weights must be >= 0");
            total += w;
        }
        if (total <= 0.0) throw ConfigError("sample weights must have positive mass");
        for (double& w : weights_) w /= total;
        for (const auto& q : qualities_)
            if (q.size() != rho_.size()) throw ConfigError("sample dimension mismatch");
    }

    static SampleEvaluator equal_weight(std::vector<std::vector<double>> qualities,
                                        std::vector<double> rho,
                                        const exchange::RevenueCurve& curve,
                                        SolveOptions opts = {}) {
        std::vector<double> w(qualities.size(), 1.0);
        return SampleEvaluator(std::move(qualities), std::move(w), std::move(rho), curve, opts);
    }

    // Monte Carlo oracle: draws from the mixture model with the model's gamma
    // as the common quality scale.
    static SampleEvaluator from_model(const market::MarketModel& model,
                                      const exchange::RevenueCurve& curve, int samples,
                                      std::uint64_t seed, SolveOptions opts = {}) {
        Rng rng(seed);
        std::vector<std::vector<double>> qs;
        qs.reserve(samples);
        for (int i = 0; i < samples; ++i)
            qs.push_back(market::sample_impression(model, rng).values);
        SampleEvaluator ev =
            equal_weight(std::move(qs), model.rho(), curve, opts);
        ev.set_scales(std::vector<double>(model.advertiser_count(), model.gamma()));
        return ev;
    }

    std::size_t advertiser_count() const { return rho_.size(); }
    const std::vector<double>& rho() const { return rho_; }
    const std::vector<double>& scales() const { return scales_; }
    const SolveOptions& options() const { return opts_; }
    const std::vector<std::vector<double>>& samples() const { return qualities_; }
    const std::vector<double>& weights() const { return weights_; }
    const exchange::RevenueCurve& curve() const { return *curve_; }

    void set_scales(std::vector<double> scales) {
        if (scales.size() != rho_.size()) throw ConfigError("scale vector size mismatch");
        scales_ = std::move(scales);
    }

    Evaluation evaluate(const DualVector& v, const EvalContext& ctx) const {
        if (v.size() != rho_.size()) throw ConfigError("dual vector size mismatch");
        const int A = static_cast<int>(rho_.size());
        Evaluation out;
        out.forward.assign(rho_.size(), 0.0);
        out.backward.assign(rho_.size(), 0.0);
        out.assign_rate.assign(rho_.size(), 0.0);
        out.quality_rate.assign(rho_.size(), 0.0);
        out.ties.advertiser_count = A;

        std::vector<double> strict(rho_.size(), 0.0), weak(rho_.size(), 0.0);
        std::vector<int> winners;
        std::vector<double> shares;
        const double tol = opts_.tie_tolerance;

        for (std::size_t s = 0; s < qualities_.size(); ++s) {
            double w = weights_[s];
            if (w <= 0.0) continue;
            const auto& q = qualities_[s];
            double level = ctx.outside_active ? 0.0 : -INFINITY;
            for (int a = 0; a < A; ++a) {
                if (!ctx.active(a)) continue;
                level = std::max(level, scales_[a] * q[a] - v[a]);
            }
            if (level == -INFINITY) continue; // nothing active
            winners.clear();
            tiebreak::SubsetMask mask = 0;
            if (ctx.outside_active && 0.0 >= level - tol) {
                winners.push_back(-1);
                mask |= tiebreak::outside_bit(A);
            }
            for (int a = 0; a < A; ++a) {
                if (!ctx.active(a)) continue;
                if (scales_[a] * q[a] - v[a] >= level - tol) {
                    winners.push_back(a);
                    mask |= tiebreak::advertiser_bit(a);
                }
            }
            exchange::ExchangeResponse resp;
            if (ctx.identity_response) {
                resp.survival = 0.0;
                resp.value = level;
                resp.spot_revenue = 0.0;
            } else {
                resp = curve_->oracle().query(level);
            }
            out.objective += w * resp.value;
            out.accept_rate += w * resp.survival;
            out.adx_rate += w * resp.spot_revenue;
            double rej = w * (1.0 - resp.survival);
            if (rej <= 0.0) continue;
            if (ctx.want_ties) out.ties.add(mask, rej);
            // Derivative masses.
            for (int a : winners) {
                if (a < 0) continue;
                weak[a] += rej;
                if (winners.size() == 1) strict[a] += rej;
            }
            // Tie-resolved rates.
            shares.assign(winners.size(), 0.0);
            double share_total = 0.0;
            if (ctx.rule != nullptr && ctx.rule->has(mask)) {
                for (std::size_t i = 0; i < winners.size(); ++i) {
                    int slot = winners[i] < 0 ? A : winners[i];
                    shares[i] = ctx.rule->routing(mask, slot);
                    share_total += shares[i];
                }
            }
            if (share_total <= 1e-15)
                shares.assign(winners.size(), 1.0 / static_cast<double>(winners.size()));
            else
                for (auto& sh : shares) sh /= share_total;
            for (std::size_t i = 0; i < winners.size(); ++i) {
                int a = winners[i];
                if (a < 0) {
                    out.outside_rate += rej * shares[i];
                } else {
                    out.assign_rate[a] += rej * shares[i];
                    out.quality_rate[a] += rej * shares[i] * q[a];
                }
            }
        }
        for (int a = 0; a < A; ++a) {
            if (!ctx.active(a)) continue;
            out.objective += v[a] * rho_[a];
            out.forward[a] = rho_[a] - strict[a];
            out.backward[a] = weak[a] - rho_[a];
        }
        out.ties.empty_tie = out.accept_rate;
        return out;
    }

private:
    std::vector<std::vector<double>> qualities_;
    std::vector<double> weights_;
    std::vector<double> rho_;
    const exchange::RevenueCurve* curve_;
    SolveOptions opts_;
    std::vector<double> scales_;
};

} // namespace adx::dual

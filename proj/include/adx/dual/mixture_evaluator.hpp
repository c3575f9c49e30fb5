#pragma once

// Analytic evaluation of the dual objective, its directional derivatives, and
// per-advertiser service/quality rates for the log-normal mixture model.
//
// Per type the quality space splits into: (a) events where a continuous
// member attains the adjusted-quality maximum, handled by a 1-D integral over
// that member's log-quality against the conditional multivariate-normal cdf
// of the remaining members; (b) the event that no member beats the best
// constant (out-of-type penalties, degenerate members, the outside option),
// whose winner set is the argmax over those constants. All quantities needed
// downstream (objective, derivative masses, assignment and quality rates,
// exchange revenue, tie masses) come from the same pass.
//
// Scaled qualities: member log-means carry ln(scale); a zero scale or zero
// variance turns a member into a constant that keeps its raw mean for
// quality accounting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "adx/core/errors.hpp"
#include "adx/core/quadrature.hpp"
#include "adx/core/stats.hpp"
#include "adx/dual/types.hpp"
#include "adx/exchange/revenue_curve.hpp"
#include "adx/market/model.hpp"

namespace adx::dual {

class MixtureEvaluator {
public:
    MixtureEvaluator(const market::MarketModel& model, const exchange::RevenueCurve& curve,
                     SolveOptions opts = {})
        : MixtureEvaluator(model, curve, std::vector<double>(model.advertiser_count(),
                                                             model.gamma()),
                           opts) {}

    MixtureEvaluator(const market::MarketModel& model, const exchange::RevenueCurve& curve,
                     std::vector<double> scales, SolveOptions opts = {})
        : model_(&model), curve_(&curve), opts_(opts) {
        rho_ = model.rho();
        penalties_.resize(model.advertiser_count());
        for (std::size_t a = 0; a < penalties_.size(); ++a)
            penalties_[a] = model.advertisers()[a].penalty;
        set_scales(std::move(scales));
    }

    std::size_t advertiser_count() const { return rho_.size(); }
    const std::vector<double>& rho() const { return rho_; }
    const std::vector<double>& scales() const { return scales_; }
    const SolveOptions& options() const { return opts_; }
    const market::MarketModel& model() const { return *model_; }
    const exchange::RevenueCurve& curve() const { return *curve_; }

    // Per-advertiser quality scales (gamma, or the quality-constraint
    // multipliers); rebuilds the per-type decomposition.
    void set_scales(std::vector<double> scales) {
        if (scales.size() != rho_.size())
            throw ConfigError("scale vector size mismatch");
        scales_ = std::move(scales);
        for (double s : scales_)
            if (s < 0.0) throw ConfigError("quality scales must be >= 0");
        prepare();
    }

    Evaluation evaluate(const DualVector& v, const EvalContext& ctx) const {
        if (v.size() != rho_.size()) throw ConfigError("dual vector size mismatch");
        const std::size_t A = rho_.size();
        Evaluation out;
        out.forward.assign(A, 0.0);
        out.backward.assign(A, 0.0);
        out.assign_rate.assign(A, 0.0);
        out.quality_rate.assign(A, 0.0);
        out.ties.advertiser_count = static_cast<int>(A);
        out.degenerate = degenerate_;
        std::fill(strict_mass_.begin(), strict_mass_.end(), 0.0);
        std::fill(weak_mass_.begin(), weak_mass_.end(), 0.0);

        for (const TypeData& td : types_) {
            if (td.pi <= 0.0) continue;
            eval_type(td, v, ctx, out);
        }
        out.ties.empty_tie = out.accept_rate;
        for (std::size_t a = 0; a < A; ++a)
            if (ctx.active(static_cast<int>(a))) out.objective += v[a] * rho_[a];
        // Directional derivative assembly: forward subtracts strict-win mass,
        // backward adds weak-win mass.
        for (std::size_t a = 0; a < A; ++a) {
            if (!ctx.active(static_cast<int>(a))) {
                out.forward[a] = 0.0;
                out.backward[a] = 0.0;
                continue;
            }
            double strict = strict_mass_[a], weak = weak_mass_[a];
            out.forward[a] = rho_[a] - strict;
            out.backward[a] = weak - rho_[a];
        }
        return out;
    }

private:
    struct Member {
        int adv = -1;
        double mu = 0.0;  // effective log-mean (includes ln scale)
        double sd = 1.0;
        double scale = 1.0;
    };
    struct ConstMember {
        int adv = -1;
        double base = 0.0; // scaled constant quality
        double raw = 0.0;  // raw value for quality accounting
    };
    struct TypeData {
        double pi = 0.0;
        std::vector<Member> members;
        std::vector<ConstMember> const_members;
        std::vector<double> corr;                   // m x m
        std::vector<std::vector<double>> cond_corr; // [i] -> (m-1)^2 corr of others | i
        std::vector<std::vector<double>> r_col;     // [i] -> R_{j,i} for others j
        std::vector<char> in_type;                  // per advertiser
        std::vector<char> is_cont;                  // per advertiser
    };

    void prepare() {
        types_.clear();
        degenerate_ = false;
        const auto& mtypes = model_->types();
        const std::size_t A = rho_.size();
        double hint = 1.0;
        std::size_t integral_count = 0;
        for (const auto& t : mtypes) {
            TypeData td;
            td.pi = t.probability;
            td.in_type.assign(A, 0);
            td.is_cont.assign(A, 0);
            std::size_t n = t.members.size();
            std::vector<int> cont_pos;
            for (std::size_t i = 0; i < n; ++i) {
                int a = t.members[i];
                td.in_type[a] = 1;
                double var = t.log_cov[i * n + i];
                double sc = scales_[a];
                if (sc > 0.0 && var > 1e-24) {
                    Member m;
                    m.adv = a;
                    m.mu = t.log_mean[i] + std::log(sc);
                    m.sd = std::sqrt(var);
                    m.scale = sc;
                    td.members.push_back(m);
                    td.is_cont[a] = 1;
                    cont_pos.push_back(static_cast<int>(i));
                    hint = std::max(hint, std::exp(m.mu + 0.5 * var));
                } else {
                    ConstMember c;
                    c.adv = a;
                    c.raw = var > 1e-24 ? lognorm_mean(t.log_mean[i], var)
                                        : std::exp(t.log_mean[i]);
                    c.base = sc > 0.0 && var <= 1e-24 ? sc * std::exp(t.log_mean[i]) : 0.0;
                    td.const_members.push_back(c);
                    hint = std::max(hint, std::abs(c.base));
                }
            }
            std::size_t m = td.members.size();
            td.corr.assign(m * m, 0.0);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    double cij = t.log_cov[cont_pos[i] * n + cont_pos[j]];
                    double d = td.members[i].sd * td.members[j].sd;
                    double r = i == j ? 1.0 : cij / d;
                    if (i != j && std::abs(r) >= 1.0 - 1e-12) degenerate_ = true;
                    td.corr[i * m + j] = std::clamp(r, -1.0 + 1e-13, 1.0 - 1e-13);
                    if (i == j) td.corr[i * m + j] = 1.0;
                }
            }
            td.cond_corr.resize(m);
            td.r_col.resize(m);
            for (std::size_t i = 0; i < m; ++i) {
                std::size_t k = m - 1;
                td.r_col[i].resize(k);
                td.cond_corr[i].assign(k * k, 0.0);
                std::vector<std::size_t> others;
                for (std::size_t j = 0; j < m; ++j)
                    if (j != i) others.push_back(j);
                for (std::size_t j = 0; j < k; ++j) td.r_col[i][j] = td.corr[others[j] * m + i];
                for (std::size_t ja = 0; ja < k; ++ja) {
                    for (std::size_t jb = 0; jb < k; ++jb) {
                        double num = td.corr[others[ja] * m + others[jb]] -
                                     td.r_col[i][ja] * td.r_col[i][jb];
                        double den = std::sqrt((1.0 - td.r_col[i][ja] * td.r_col[i][ja]) *
                                               (1.0 - td.r_col[i][jb] * td.r_col[i][jb]));
                        double r = ja == jb ? 1.0 : num / std::max(den, 1e-14);
                        td.cond_corr[i][ja * k + jb] = std::clamp(r, -1.0, 1.0);
                    }
                }
            }
            integral_count += m;
            types_.push_back(std::move(td));
        }
        for (std::size_t a = 0; a < A; ++a)
            hint = std::max(hint, std::abs(scales_[a] * penalties_[a]));
        scale_hint_ = hint;
        per_integral_tol_ = opts_.integration_tolerance * scale_hint_ /
                            std::sqrt(std::max<double>(1.0, static_cast<double>(integral_count)));
        strict_mass_.assign(A, 0.0);
        weak_mass_.assign(A, 0.0);
    }

    exchange::ExchangeResponse respond(double c, const EvalContext& ctx) const {
        if (ctx.identity_response) {
            exchange::ExchangeResponse r;
            r.survival = 0.0;
            r.reserve = exchange::Price::null_price();
            r.value = c;
            r.spot_revenue = 0.0;
            return r;
        }
        return curve_->oracle().query(c);
    }

    // Shares of a tie among `slots` (advertiser index, or -1 for outside):
    // provided rule's routing if available, else uniform.
    static void tie_shares(const tiebreak::TieBreakRule* rule, tiebreak::SubsetMask mask,
                           const std::vector<int>& slots, int A, std::vector<double>& out) {
        out.assign(slots.size(), 0.0);
        double total = 0.0;
        if (rule != nullptr && rule->has(mask)) {
            for (std::size_t i = 0; i < slots.size(); ++i) {
                int slot = slots[i] < 0 ? A : slots[i];
                out[i] = rule->routing(mask, slot);
                total += out[i];
            }
        }
        if (total <= 1e-15) {
            for (auto& s : out) s = 1.0 / static_cast<double>(slots.size());
        } else {
            for (auto& s : out) s /= total;
        }
    }

    void eval_type(const TypeData& td, const DualVector& v, const EvalContext& ctx,
                   Evaluation& out) const {
        const int A = static_cast<int>(rho_.size());
        // Constants present under this context: out-of-type actives,
        // degenerate members, outside option.
        std::vector<int> cslots;
        std::vector<double> cvals, craw;
        for (int a = 0; a < A; ++a) {
            if (!ctx.active(a) || td.is_cont[a]) continue;
            if (td.in_type[a]) continue; // handled below from const_members
            cslots.push_back(a);
            cvals.push_back(-scales_[a] * penalties_[a] - v[a]);
            craw.push_back(-penalties_[a]);
        }
        for (const auto& c : td.const_members) {
            if (!ctx.active(c.adv)) continue;
            cslots.push_back(c.adv);
            cvals.push_back(c.base - v[c.adv]);
            craw.push_back(c.raw);
        }
        if (ctx.outside_active) {
            cslots.push_back(-1);
            cvals.push_back(0.0);
            craw.push_back(0.0);
        }
        double level = -INFINITY;
        for (double k : cvals) level = std::max(level, k);
        std::vector<int> alpha; // indices into cslots attaining the level
        for (std::size_t i = 0; i < cvals.size(); ++i)
            if (cvals[i] >= level - opts_.tie_tolerance) alpha.push_back(static_cast<int>(i));

        // Active continuous members of this type.
        std::vector<std::size_t> act;
        for (std::size_t i = 0; i < td.members.size(); ++i)
            if (ctx.active(td.members[i].adv)) act.push_back(i);

        // --- bucket where no active member exceeds the constant level ---
        double g_out = 1.0;
        if (!cslots.empty()) {
            if (!act.empty()) {
                std::vector<double> bounds(act.size());
                std::vector<double> corr(act.size() * act.size());
                bool zero = false;
                for (std::size_t i = 0; i < act.size(); ++i) {
                    const Member& mi = td.members[act[i]];
                    double thr = level + v[mi.adv];
                    if (thr <= 0.0) {
                        zero = true;
                        break;
                    }
                    bounds[i] = (std::log(thr) - mi.mu) / mi.sd;
                    for (std::size_t j = 0; j < act.size(); ++j)
                        corr[i * act.size() + j] =
                            td.corr[act[i] * td.members.size() + act[j]];
                }
                g_out = zero ? 0.0
                             : mvn_cdf(bounds.data(), corr.data(),
                                       static_cast<int>(act.size()));
            }
            if (g_out > 0.0) {
                exchange::ExchangeResponse resp = respond(level, ctx);
                out.objective += td.pi * resp.value * g_out;
                out.adx_rate += td.pi * resp.spot_revenue * g_out;
                out.accept_rate += td.pi * resp.survival * g_out;
                double rej = (1.0 - resp.survival) * g_out;
                if (rej > 0.0) {
                    tiebreak::SubsetMask mask = 0;
                    std::vector<int> winner_slots;
                    for (int idx : alpha) {
                        int slot = cslots[static_cast<std::size_t>(idx)];
                        winner_slots.push_back(slot);
                        mask |= slot < 0 ? tiebreak::outside_bit(A)
                                         : tiebreak::advertiser_bit(slot);
                    }
                    if (ctx.want_ties) out.ties.add(mask, td.pi * rej);
                    std::vector<double> shares;
                    tie_shares(ctx.rule, mask, winner_slots, A, shares);
                    for (std::size_t wi = 0; wi < winner_slots.size(); ++wi) {
                        int slot = winner_slots[wi];
                        double massed = td.pi * rej * shares[wi];
                        if (slot < 0) {
                            out.outside_rate += massed;
                        } else {
                            out.assign_rate[slot] += massed;
                            out.quality_rate[slot] +=
                                massed * craw[static_cast<std::size_t>(alpha[wi])];
                        }
                    }
                    // Derivative masses: weak for every tied advertiser,
                    // strict only for an exclusive advertiser winner.
                    for (int idx : alpha) {
                        int slot = cslots[static_cast<std::size_t>(idx)];
                        if (slot >= 0) {
                            weak_mass_[slot] += td.pi * rej;
                            if (alpha.size() == 1) strict_mass_[slot] += td.pi * rej;
                        }
                    }
                }
            }
        }

        // --- continuous-member win integrals ---
        const std::size_t m = td.members.size();
        for (std::size_t ii = 0; ii < act.size(); ++ii) {
            std::size_t i = act[ii];
            const Member& mi = td.members[i];
            double lo = mi.mu - 12.0 * mi.sd;
            double lower_q = level + v[mi.adv]; // member must beat the constants
            if (std::isfinite(lower_q) && lower_q > 0.0)
                lo = std::max(lo, std::log(lower_q));
            double hi = mi.mu + 12.0 * mi.sd;
            if (lo >= hi) continue;

            // Active others and their conditional structure given member i.
            std::vector<std::size_t> others;
            std::vector<double> rji, csd, cmu_base;
            for (std::size_t j2 = 0; j2 < m; ++j2) {
                if (j2 == i || !ctx.active(td.members[j2].adv)) continue;
                others.push_back(j2);
            }
            std::size_t K = others.size();
            std::vector<double> ccorr(K * K, 0.0);
            {
                // positions of `others` within the full others-list of i
                std::vector<std::size_t> full;
                for (std::size_t j2 = 0; j2 < m; ++j2)
                    if (j2 != i) full.push_back(j2);
                std::vector<std::size_t> pos(K);
                for (std::size_t u = 0; u < K; ++u)
                    pos[u] = static_cast<std::size_t>(
                        std::find(full.begin(), full.end(), others[u]) - full.begin());
                rji.resize(K);
                csd.resize(K);
                for (std::size_t u = 0; u < K; ++u) {
                    rji[u] = td.r_col[i][pos[u]];
                    csd[u] = std::sqrt(std::max(1e-28, 1.0 - rji[u] * rji[u]));
                    for (std::size_t u2 = 0; u2 < K; ++u2)
                        ccorr[u * K + u2] = td.cond_corr[i][pos[u] * (m - 1) + pos[u2]];
                }
            }

            std::vector<double> zb(K);
            double vi = v[mi.adv];
            auto integrand = [&](double x, double* w) {
                double zi = (x - mi.mu) / mi.sd;
                double t = std::exp(x);
                double c = t - vi;
                double cond = 1.0;
                for (std::size_t u = 0; u < K; ++u) {
                    const Member& mj = td.members[others[u]];
                    double thr = c + v[mj.adv];
                    if (thr <= 0.0) {
                        cond = 0.0;
                        break;
                    }
                    zb[u] = ((std::log(thr) - mj.mu) / mj.sd - rji[u] * zi) / csd[u];
                }
                if (cond > 0.0 && K > 0)
                    cond = mvn_cdf(zb.data(), ccorr.data(), static_cast<int>(K));
                if (cond <= 0.0) return;
                double dens = norm_pdf(zi) / mi.sd;
                double base = cond * dens;
                exchange::ExchangeResponse resp = respond(c, ctx);
                double rej = 1.0 - resp.survival;
                w[0] = resp.value * base;        // objective
                w[1] = base;                     // argmax probability
                w[2] = rej * base;               // rejected-and-wins
                w[3] = rej * t * base;           // scaled quality collected
                w[4] = resp.spot_revenue * base; // exchange revenue
            };
            double acc[5] = {0, 0, 0, 0, 0};
            double resid = integrate_weights(integrand, 5, lo, hi, per_integral_tol_, acc);
            out.quad_error = std::max(out.quad_error, resid);

            out.objective += td.pi * acc[0];
            out.accept_rate += td.pi * (acc[1] - acc[2]);
            out.adx_rate += td.pi * acc[4];
            int a = mi.adv;
            out.assign_rate[a] += td.pi * acc[2];
            out.quality_rate[a] += td.pi * acc[3] / mi.scale;
            strict_mass_[a] += td.pi * acc[2];
            weak_mass_[a] += td.pi * acc[2];
            if (ctx.want_ties)
                out.ties.add(tiebreak::advertiser_bit(a), td.pi * acc[2]);
        }
    }

    const market::MarketModel* model_;
    const exchange::RevenueCurve* curve_;
    SolveOptions opts_;
    std::vector<double> rho_;
    std::vector<double> penalties_;
    std::vector<double> scales_;
    std::vector<TypeData> types_;
    bool degenerate_ = false;
    double scale_hint_ = 1.0;
    double per_integral_tol_ = 1e-8;
    mutable std::vector<double> strict_mass_, weak_mass_;
};

} // namespace adx::dual

#pragma once

// Winning-bid models for the exchange: parametric single-bidder, second-price
// with K iid bidders, empirical top-two-bid logs, and the degenerate
// no-exchange model (winning bid identically zero).

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "adx/core/errors.hpp"
#include "adx/core/rng.hpp"
#include "adx/core/stats.hpp"

namespace adx::exchange {

// Reserve price with a distinguished reject-all sentinel.
struct Price {
    double value = 0.0;
    bool is_null = false;

    static Price null_price() { return Price{0.0, true}; }
    static Price of(double v) { return Price{v, false}; }
};

inline bool operator==(const Price& a, const Price& b) {
    return a.is_null == b.is_null && (a.is_null || a.value == b.value);
}

struct BidSample {
    double highest = 0.0;
    double second_highest = 0.0;
};

// Parametric bid value distribution; strictly monotone cdf on its support.
class CdfFamily {
public:
    enum class Kind { Uniform, Exponential, LogNormal };

    static CdfFamily uniform(double lo, double hi) {
        if (!(hi > lo)) throw ConfigError("uniform family requires high > low");
        CdfFamily f;
        f.kind_ = Kind::Uniform;
        f.a_ = lo;
        f.b_ = hi;
        return f;
    }
    static CdfFamily exponential(double rate) {
        if (!(rate > 0.0)) throw ConfigError("exponential family requires rate > 0");
        CdfFamily f;
        f.kind_ = Kind::Exponential;
        f.a_ = rate;
        return f;
    }
    static CdfFamily lognormal(double log_mean, double log_sd) {
        if (!(log_sd > 0.0)) throw ConfigError("lognormal family requires log_sd > 0");
        CdfFamily f;
        f.kind_ = Kind::LogNormal;
        f.a_ = log_mean;
        f.b_ = log_sd;
        return f;
    }

    Kind kind() const { return kind_; }

    double cdf(double x) const {
        switch (kind_) {
            case Kind::Uniform:
                return std::clamp((x - a_) / (b_ - a_), 0.0, 1.0);
            case Kind::Exponential:
                return x <= 0.0 ? 0.0 : -std::expm1(-a_ * x);
            case Kind::LogNormal:
                return lognorm_cdf(x, a_, b_);
        }
        return 0.0;
    }

    double sf(double x) const { return 1.0 - cdf(x); }

    double pdf(double x) const {
        switch (kind_) {
            case Kind::Uniform:
                return (x < a_ || x > b_) ? 0.0 : 1.0 / (b_ - a_);
            case Kind::Exponential:
                return x < 0.0 ? 0.0 : a_ * std::exp(-a_ * x);
            case Kind::LogNormal:
                return lognorm_pdf(x, a_, b_);
        }
        return 0.0;
    }

    // Lower quantile; u in [0, 1].
    double quantile(double u) const {
        u = std::clamp(u, 0.0, 1.0);
        switch (kind_) {
            case Kind::Uniform:
                return a_ + u * (b_ - a_);
            case Kind::Exponential:
                return u >= 1.0 ? INFINITY : -std::log1p(-u) / a_;
            case Kind::LogNormal:
                if (u <= 0.0) return 0.0;
                if (u >= 1.0) return INFINITY;
                return lognorm_quantile(u, a_, b_);
        }
        return 0.0;
    }

    double sf_inv(double s) const { return quantile(1.0 - s); }

    double support_lo() const {
        switch (kind_) {
            case Kind::Uniform: return a_;
            case Kind::Exponential: return 0.0;
            case Kind::LogNormal: return 0.0;
        }
        return 0.0;
    }

    double support_hi() const {
        return kind_ == Kind::Uniform ? b_ : INFINITY;
    }

    double mean() const {
        switch (kind_) {
            case Kind::Uniform: return 0.5 * (a_ + b_);
            case Kind::Exponential: return 1.0 / a_;
            case Kind::LogNormal: return std::exp(a_ + 0.5 * b_ * b_);
        }
        return 0.0;
    }

    // Increasing failure rate; required by the hazard-equation reserve solver.
    bool is_ifr() const { return kind_ == Kind::Uniform || kind_ == Kind::Exponential; }

    std::string name() const {
        switch (kind_) {
            case Kind::Uniform: return "uniform";
            case Kind::Exponential: return "exponential";
            case Kind::LogNormal: return "lognormal";
        }
        return "?";
    }

    double param_a() const { return a_; }
    double param_b() const { return b_; }

private:
    Kind kind_ = Kind::Uniform;
    double a_ = 0.0, b_ = 1.0;
};

class BidModel {
public:
    enum class Kind { NullExchange, SingleBidder, SecondPrice, Empirical };

    static BidModel null_exchange() {
        BidModel m;
        m.kind_ = Kind::NullExchange;
        return m;
    }
    static BidModel single_bidder(CdfFamily family) {
        BidModel m;
        m.kind_ = Kind::SingleBidder;
        m.family_ = family;
        return m;
    }
    static BidModel second_price(CdfFamily family, int bidders) {
        if (bidders < 1) throw ConfigError("second_price requires bidder_count >= 1");
        BidModel m;
        m.kind_ = Kind::SecondPrice;
        m.family_ = family;
        m.bidders_ = bidders;
        return m;
    }
    static BidModel empirical(std::vector<BidSample> samples) {
        if (samples.empty()) throw ConfigError("empirical bid model requires >= 1 sample");
        for (const auto& s : samples)
            if (!(s.highest >= s.second_highest && s.second_highest >= 0.0))
                throw ConfigError("empirical bid sample must satisfy b1 >= b2 >= 0");
        BidModel m;
        m.kind_ = Kind::Empirical;
        m.samples_ = std::move(samples);
        return m;
    }

    Kind kind() const { return kind_; }
    const CdfFamily& family() const { return family_; }
    int bidders() const { return kind_ == Kind::SecondPrice ? bidders_ : 1; }
    const std::vector<BidSample>& samples() const { return samples_; }

    bool parametric() const {
        return kind_ == Kind::SingleBidder || kind_ == Kind::SecondPrice;
    }

    // Checks strict monotonicity on the support and a finite mean.
    void validate() const {
        if (!parametric()) return;
        const CdfFamily& f = family_;
        if (!(f.mean() < INFINITY)) throw ConfigError("bid model mean not finite");
        double lo = f.support_lo();
        double hi = std::isinf(f.support_hi()) ? f.quantile(1.0 - 1e-9) : f.support_hi();
        double prev = f.cdf(lo);
        for (int i = 1; i <= 8; ++i) {
            double x = lo + (hi - lo) * i / 8.0;
            double c = f.cdf(x);
            if (!(c > prev)) throw ConfigError("bid cdf not strictly monotone on support");
            prev = c;
        }
    }

    // Top-two bid draw for one auction.
    BidSample draw(Rng& rng) const {
        switch (kind_) {
            case Kind::NullExchange:
                return {0.0, 0.0};
            case Kind::SingleBidder:
                return {family_.quantile(rng.uniform01()), 0.0};
            case Kind::SecondPrice: {
                int k = bidders_;
                double b1 = family_.quantile(std::pow(rng.uniform01(), 1.0 / k));
                if (k == 1) return {b1, 0.0};
                double fb = family_.cdf(b1);
                double b2 = family_.quantile(fb * std::pow(rng.uniform01(), 1.0 / (k - 1)));
                return {b1, std::min(b2, b1)};
            }
            case Kind::Empirical: {
                std::size_t i = static_cast<std::size_t>(rng.uniform01() *
                                                         static_cast<double>(samples_.size()));
                if (i >= samples_.size()) i = samples_.size() - 1;
                return samples_[i];
            }
        }
        return {0.0, 0.0};
    }

private:
    Kind kind_ = Kind::NullExchange;
    CdfFamily family_ = CdfFamily::uniform(0.0, 1.0);
    int bidders_ = 1;
    std::vector<BidSample> samples_;
};

} // namespace adx::exchange

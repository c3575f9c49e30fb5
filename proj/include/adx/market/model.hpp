#pragma once

// Advertisers, user types and the log-normal mixture quality model:
// sampling, maximum-likelihood mixture fitting, and the type-advertiser
// feasibility check.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adx/core/errors.hpp"
#include "adx/core/linalg.hpp"
#include "adx/core/maxflow.hpp"
#include "adx/core/rng.hpp"
#include "adx/exchange/bid_model.hpp"

namespace adx::market {

struct Advertiser {
    std::string id;
    double rho = 0.0;     // capacity-to-impression ratio
    double penalty = 0.0; // goodwill penalty tau_a for off-criteria assignment
    std::optional<double> quality_floor;
};

struct UserType {
    std::vector<int> members;     // advertiser indices, sorted ascending
    double probability = 0.0;
    std::vector<double> log_mean; // one per member
    Matrix log_cov;               // members x members, row-major
};

struct QualityVector {
    std::vector<double> values; // per advertiser; -tau_a outside the type
    int type_index = -1;
};

class MarketModel {
public:
    MarketModel() = default;

    MarketModel(std::vector<Advertiser> advertisers, std::vector<UserType> types,
                double gamma, exchange::BidModel bids)
        : advertisers_(std::move(advertisers)),
          types_(std::move(types)),
          gamma_(gamma),
          bids_(std::move(bids)) {
        validate();
        prepare_sampling();
    }

    const std::vector<Advertiser>& advertisers() const { return advertisers_; }
    const std::vector<UserType>& types() const { return types_; }
    double gamma() const { return gamma_; }
    const exchange::BidModel& bids() const { return bids_; }

    std::size_t advertiser_count() const { return advertisers_.size(); }

    int advertiser_index(const std::string& id) const {
        for (std::size_t i = 0; i < advertisers_.size(); ++i)
            if (advertisers_[i].id == id) return static_cast<int>(i);
        throw ConfigError("unknown advertiser id: " + id);
    }

    double rho_outside() const {
        double s = 0.0;
        for (const auto& a : advertisers_) s += a.rho;
        return 1.0 - s;
    }

    std::vector<double> rho() const {
        std::vector<double> r(advertisers_.size());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = advertisers_[i].rho;
        return r;
    }

    const Matrix& sampling_transform(std::size_t type_index) const {
        return transforms_[type_index];
    }

private:
    void validate() const {
        if (advertisers_.empty()) throw ConfigError("model needs >= 1 advertiser");
        double rho_sum = 0.0;
        for (const auto& a : advertisers_) {
            if (a.id == "0") throw ConfigError("advertiser id \"0\" is reserved for the outside option");
            if (!(a.rho > 0.0 && a.rho <= 1.0)) throw ConfigError("rho must lie in (0, 1]: " + a.id);
            if (a.penalty < 0.0) throw ConfigError("penalty must be >= 0: " + a.id);
            rho_sum += a.rho;
        }
        if (rho_sum > 1.0 + 1e-9) throw ConfigError("sum of rho exceeds 1");
        for (std::size_t i = 0; i < advertisers_.size(); ++i)
            for (std::size_t j = i + 1; j < advertisers_.size(); ++j)
                if (advertisers_[i].id == advertisers_[j].id)
                    throw ConfigError("duplicate advertiser id: " + advertisers_[i].id);

        if (types_.empty()) throw ConfigError("model needs >= 1 user type");
        double pi_sum = 0.0;
        std::map<std::vector<int>, int> seen;
        for (const auto& t : types_) {
            if (t.members.empty()) throw ConfigError("user type must have non-empty members");
            if (!std::is_sorted(t.members.begin(), t.members.end()))
                throw ConfigError("type members must be sorted");
            for (int m : t.members)
                if (m < 0 || m >= static_cast<int>(advertisers_.size()))
                    throw ConfigError("type member index out of range");
            if (seen.count(t.members))
                throw ConfigError("two types share the same member set; merge them in the config");
            seen[t.members] = 1;
            if (t.probability < 0.0) throw ConfigError("type probability must be >= 0");
            pi_sum += t.probability;
            std::size_t n = t.members.size();
            if (t.log_mean.size() != n || t.log_cov.size() != n * n)
                throw ConfigError("type moment dimensions do not match members");
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (std::abs(t.log_cov[i * n + j] - t.log_cov[j * n + i]) > 1e-9)
                        throw ConfigError("type covariance must be symmetric");
        }
        if (std::abs(pi_sum - 1.0) > 1e-6) throw ConfigError("type probabilities must sum to 1");
        if (gamma_ < 0.0) throw ConfigError("gamma must be >= 0");
    }

    void prepare_sampling() {
        transforms_.clear();
        transforms_.reserve(types_.size());
        for (const auto& t : types_) {
            std::size_t n = t.members.size();
            PsdRepair rep = psd_repair(t.log_cov, n, 1e-12);
            transforms_.push_back(rep.transform);
        }
    }

    std::vector<Advertiser> advertisers_;
    std::vector<UserType> types_;
    double gamma_ = 1.0;
    exchange::BidModel bids_;
    std::vector<Matrix> transforms_;
};

// Draws one impression: type by mixing probability, member qualities from the
// multivariate log-normal (via the PSD-repaired transform), -tau elsewhere.
inline QualityVector sample_impression(const MarketModel& model, Rng& rng) {
    const auto& types = model.types();
    std::vector<double> weights(types.size());
    for (std::size_t i = 0; i < types.size(); ++i) weights[i] = types[i].probability;
    std::size_t ti = rng.categorical(weights);
    const UserType& t = types[ti];

    QualityVector out;
    out.type_index = static_cast<int>(ti);
    out.values.resize(model.advertiser_count());
    for (std::size_t a = 0; a < out.values.size(); ++a)
        out.values[a] = -model.advertisers()[a].penalty;

    std::size_t n = t.members.size();
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = rng.normal();
    const Matrix& tr = model.sampling_transform(ti);
    for (std::size_t i = 0; i < n; ++i) {
        double lq = t.log_mean[i];
        for (std::size_t j = 0; j < n; ++j) lq += tr[i * n + j] * z[j];
        out.values[static_cast<std::size_t>(t.members[i])] = std::exp(lq);
    }
    return out;
}

// --- mixture estimation --------------------------------------------------

struct MixtureSample {
    std::vector<int> members;      // sorted advertiser indices present
    std::vector<double> qualities; // positive qualities, parallel to members
};

struct MixtureFit {
    std::vector<UserType> types;
    std::vector<std::string> warnings;
};

// Relative type frequencies and per-type log-moment MLEs (covariance
// denominator = count; singleton types get zero covariance with a warning).
inline MixtureFit fit_mixture(const std::vector<MixtureSample>& samples) {
    if (samples.empty()) throw ConfigError("fit_mixture needs >= 1 sample");
    std::map<std::vector<int>, std::vector<const MixtureSample*>> buckets;
    for (const auto& s : samples) {
        if (s.members.empty()) throw ConfigError("sample with empty membership pattern");
        if (s.members.size() != s.qualities.size())
            throw ConfigError("sample members/qualities mismatch");
        for (double q : s.qualities)
            if (!(q > 0.0)) throw ConfigError("sample qualities must be positive");
        buckets[s.members].push_back(&s);
    }
    MixtureFit fit;
    double total = static_cast<double>(samples.size());
    for (const auto& [members, rows] : buckets) {
        UserType t;
        t.members = members;
        t.probability = static_cast<double>(rows.size()) / total;
        std::size_t n = members.size();
        std::size_t m = rows.size();
        t.log_mean.assign(n, 0.0);
        t.log_cov.assign(n * n, 0.0);
        std::vector<std::vector<double>> logs(m, std::vector<double>(n));
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t i = 0; i < n; ++i) {
                logs[r][i] = std::log(rows[r]->qualities[i]);
                t.log_mean[i] += logs[r][i];
            }
        for (std::size_t i = 0; i < n; ++i) t.log_mean[i] /= static_cast<double>(m);
        if (m == 1) {
            fit.warnings.push_back("type with a single sample: zero covariance");
        } else {
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        t.log_cov[i * n + j] += (logs[r][i] - t.log_mean[i]) *
                                                (logs[r][j] - t.log_mean[j]);
            for (auto& v : t.log_cov) v /= static_cast<double>(m);
        }
        fit.types.push_back(std::move(t));
    }
    return fit;
}

// Pattern = positive entries of a full quality vector.
inline std::vector<MixtureSample> to_mixture_samples(const std::vector<QualityVector>& qs) {
    std::vector<MixtureSample> out;
    out.reserve(qs.size());
    for (const auto& q : qs) {
        MixtureSample s;
        for (std::size_t a = 0; a < q.values.size(); ++a) {
            if (q.values[a] > 0.0) {
                s.members.push_back(static_cast<int>(a));
                s.qualities.push_back(q.values[a]);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

// --- type-advertiser feasibility (bipartite flow) ------------------------

struct FeasibilityReport {
    bool feasible = false;
    double max_flow = 0.0;
    double demand = 0.0; // sum of rho_a
    // Quality bound under which correct-targeting is guaranteed: (1/A) min tau.
    double penalty_bound = 0.0;
};

// Core graph routine: type nodes supply pi(T), advertiser nodes demand rho_a,
// membership arcs; the outside option absorbs slack implicitly. Feasible iff
// the flow saturates every advertiser demand.
inline FeasibilityReport check_type_feasibility(const std::vector<UserType>& types,
                                                const std::vector<double>& rho) {
    int n_nodes = 2 + static_cast<int>(types.size()) + static_cast<int>(rho.size());
    MaxFlow g(n_nodes);
    int s = 0, t = 1;
    auto type_node = [&](std::size_t i) { return 2 + static_cast<int>(i); };
    auto adv_node = [&](std::size_t a) {
        return 2 + static_cast<int>(types.size()) + static_cast<int>(a);
    };
    for (std::size_t i = 0; i < types.size(); ++i) {
        g.add_edge(s, type_node(i), types[i].probability);
        for (int m : types[i].members)
            g.add_edge(type_node(i), adv_node(static_cast<std::size_t>(m)),
                       types[i].probability);
    }
    FeasibilityReport rep;
    for (std::size_t a = 0; a < rho.size(); ++a) {
        g.add_edge(adv_node(a), t, rho[a]);
        rep.demand += rho[a];
    }
    rep.max_flow = g.run(s, t);
    rep.feasible = rep.max_flow >= rep.demand - 1e-11;
    return rep;
}

inline FeasibilityReport check_type_feasibility(const MarketModel& model) {
    FeasibilityReport rep = check_type_feasibility(model.types(), model.rho());
    double min_tau = INFINITY;
    for (const auto& a : model.advertisers()) min_tau = std::min(min_tau, a.penalty);
    rep.penalty_bound = min_tau / static_cast<double>(model.advertiser_count());
    return rep;
}

inline bool penalty_bound_holds(const MarketModel& model, double quality_bound) {
    return quality_bound <= check_type_feasibility(model).penalty_bound;
}

} // namespace adx::market

#pragma once

// Tie events and the randomized tie-breaking rule.
//
// A subset of A_0 is encoded as a bitmask: bit a (a < A) for advertiser a,
// bit A for the outside option. The empty tie (impression accepted by the
// exchange) is tracked separately.

#include <cstdint>
#include <map>
#include <vector>

namespace adx::tiebreak {

using SubsetMask = std::uint64_t;

inline constexpr SubsetMask advertiser_bit(int a) { return SubsetMask{1} << a; }
inline constexpr SubsetMask outside_bit(int advertiser_count) {
    return SubsetMask{1} << advertiser_count;
}

struct TieTable {
    int advertiser_count = 0;
    std::map<SubsetMask, double> entries; // subsets with positive mass
    double empty_tie = 0.0;               // accepted by the exchange
    bool monte_carlo = false;             // filled by the sampling fallback

    void add(SubsetMask mask, double p) {
        if (p <= 0.0) return;
        entries[mask] += p;
    }

    double total() const {
        double t = empty_tie;
        for (const auto& [m, p] : entries) t += p;
        return t;
    }
};

// Flows y_a(S) >= 0 over tie subsets; routing I_a(S) = y_a(S) / P(S-tie).
struct TieBreakRule {
    int advertiser_count = 0;
    // Per subset: flow vector indexed 0..A-1 for advertisers, A for outside.
    std::map<SubsetMask, std::vector<double>> flows;

    double routing(SubsetMask mask, int slot) const {
        auto it = flows.find(mask);
        if (it == flows.end()) return 0.0;
        double total = 0.0;
        for (double y : it->second) total += y;
        if (total <= 0.0) return 0.0;
        return it->second[static_cast<std::size_t>(slot)] / total;
    }

    bool has(SubsetMask mask) const { return flows.count(mask) > 0; }
};

} // namespace adx::tiebreak

#pragma once

// Shared types for the dual of the deterministic approximation.

#include <cstdint>
#include <vector>

#include "adx/tiebreak/types.hpp"

namespace adx::dual {

// Bid prices v_a, one per advertiser; the outside option has v_0 = 0 implicitly.
using DualVector = std::vector<double>;

struct SolveOptions {
    int max_iters = 400;
    double armijo_c = 1e-4;       // sufficient-decrease constant for line search
    double backtrack = 0.5;
    double init_step = 1.0;
    double gradient_tolerance = 1e-6;
    double integration_tolerance = 1e-8; // absolute, scaled by the quality magnitude
    int mc_samples = 200000;             // Monte Carlo fallback sample size
    std::uint64_t seed = 12345;
    double tie_tolerance = 1e-9; // equality tolerance in adjusted-quality units
};

// Which advertisers still compete, and how the exchange responds. The
// identity response (R(c) = c, never accepted) models the forced regime where
// the outside option is exhausted and the exchange is bypassed.
struct EvalContext {
    std::uint64_t active_mask = ~0ull;
    bool outside_active = true;
    bool identity_response = false;
    const tiebreak::TieBreakRule* rule = nullptr; // tie routing for rates
    bool want_ties = false;

    static EvalContext all(std::size_t advertiser_count) {
        EvalContext c;
        c.active_mask = advertiser_count >= 64 ? ~0ull : ((1ull << advertiser_count) - 1ull);
        return c;
    }

    bool active(int a) const { return (active_mask >> a) & 1ull; }
};

struct Evaluation {
    double objective = 0.0;             // psi(v) over the active restriction
    std::vector<double> forward;        // directional derivative along +e_a
    std::vector<double> backward;       // along -e_a
    std::vector<double> assign_rate;    // P{rejected and a takes the impression}
    std::vector<double> quality_rate;   // E[(1 - s*) Q_a^raw 1{a takes it}]
    double outside_rate = 0.0;          // rejected and discarded
    double accept_rate = 0.0;           // accepted by the exchange
    double adx_rate = 0.0;              // E r(s*(lambda))
    tiebreak::TieTable ties;
    double quad_error = 0.0;
    bool degenerate = false; // continuous in-type ties possible (perfect correlation)
};

} // namespace adx::dual

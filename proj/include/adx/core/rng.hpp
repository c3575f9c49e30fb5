#pragma once

// Deterministic random streams for simulation replications.
//
// splitmix64 core with counter-based substreams: substream(seed, k) yields a
// stream that is independent of thread scheduling, so parallel replications
// reduce to the same numbers as a serial run.

#include <cmath>
#include <cstdint>
#include <vector>

namespace adx {

inline uint64_t splitmix64_step(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0x853C49E6748FEA9Bull) : state_(seed) {
        // Warm up so that small seeds diverge immediately.
        splitmix64_step(state_);
        splitmix64_step(state_);
    }

    static Rng substream(uint64_t seed, uint64_t index) {
        uint64_t s = seed;
        uint64_t h = splitmix64_step(s);
        s = h ^ (index * 0xD1342543DE82EF95ull + 0x9E3779B97F4A7C15ull);
        splitmix64_step(s);
        return Rng(s);
    }

    uint64_t next_u64() { return splitmix64_step(state_); }

    // Uniform on [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller; the spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    double exponential(double rate) {
        double u = uniform01();
        return -std::log1p(-u) / rate;
    }

    // Index in [0, n) drawn proportionally to weights (need not be normalized).
    std::size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform01() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace adx

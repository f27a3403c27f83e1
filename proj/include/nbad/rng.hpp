#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace nbad {

// Deterministic 64-bit generator (splitmix64, Steele et al. 2014). The whole
// state is a single u64, which makes streams trivially portable and cheap to
// embed in checkpoints. Derived streams (per sample, per iteration) come from
// Rng::derive so results do not depend on scheduling or call order.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1), 53 mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t v;
        do { v = next_u64(); } while (v >= limit);
        return v % n;
    }

    // Box-Muller, no cached spare so the draw count per call is fixed.
    double normal() {
        double u1;
        do { u1 = uniform(); } while (u1 == 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t state() const noexcept { return state_; }
    void set_state(std::uint64_t s) noexcept { state_ = s; }

    // Stream derivation: mix two words through one splitmix64 round each.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        Rng r(a);
        r.next_u64();
        r.state_ ^= b * 0x2545f4914f6cdd1dULL;
        return r.next_u64();
    }

    static Rng derive(std::uint64_t seed, std::uint64_t stream) { return Rng(mix(seed, stream)); }
    static Rng derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t sub) {
        return Rng(mix(mix(seed, stream), sub));
    }

private:
    std::uint64_t state_;
};

} // namespace nbad

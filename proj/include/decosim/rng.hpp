#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace decosim {

/// Deterministic random source. All draw algorithms are implemented here
/// rather than delegated to std distributions, so a given seed produces the
/// same stream on every standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Unbiased integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n)
    {
        // rejection sampling over the top of the 64-bit range
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t x = engine_();
            if (x >= threshold) {
                return x % n;
            }
        }
    }

    /// Uniform integer in [lo, hi], inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi)
    {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    /// Uniform real in [0, 1).
    double real01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return real01() < p; }

    /// Box-Muller draw. No spare caching: one engine-state-deterministic
    /// value per call.
    double normal(double mu, double sigma)
    {
        const double u1 = 1.0 - real01(); // (0, 1]
        const double u2 = real01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mu + sigma * r * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace decosim

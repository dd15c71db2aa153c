#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "cotgate/errors.hpp"

namespace cotgate {

// splitmix64 finalizer, used to derive per-stream seeds from a master seed.
constexpr uint64_t mix64(uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Deterministic draws built on raw mt19937_64 words. The std::* distributions
// are implementation-defined, so everything here derives from engine output
// directly and reproduces bit-for-bit on any conforming standard library.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // Stable seed-splitting contract: stream i of a master seed is always
    // derive(master, i), independent of how many draws other streams made.
    static constexpr uint64_t derive(uint64_t master, uint64_t stream) {
        return mix64(master ^ mix64(stream + 0x632BE59BD9B4E019ull));
    }

    uint64_t bits() { return engine_(); }

    // [0,1) with 53-bit resolution
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller; the second value of each pair is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Unbiased integer in [0, n), rejection sampled.
    uint64_t below(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = bits();
        while (x >= limit) x = bits();
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[static_cast<size_t>(below(i))]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

// Probit by bisection; plenty fast for the few calls per data-set build.
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InputError("inverse_normal_cdf: p must be in (0,1)");
    }
    double lo = -12.0, hi = 12.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace cotgate

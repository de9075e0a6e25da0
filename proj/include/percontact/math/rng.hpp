#pragma once
// Deterministic random streams. Every draw is built from uniform bits of a
// xoshiro256++ engine, so chains are bit-reproducible across platforms and
// independent of any library distribution internals.

#include <cstdint>
#include <cmath>
#include <stdexcept>

#include "percontact/math/special.hpp"

namespace percontact {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

/// Seedable deterministic generator; one independent stream per chain and
/// per subject. Identical seeds give identical draw sequences regardless of
/// scheduling.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 1) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = detail::splitmix64(sm);
    }

    /// Derive an independent substream (e.g. per subject) from this seed base.
    static RngStream derive(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                            std::uint64_t c = 0) {
        std::uint64_t sm = base;
        std::uint64_t h = detail::splitmix64(sm);
        sm = h ^ (a * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
        h = detail::splitmix64(sm);
        sm = h ^ (b * 0xda942042e4dd58b5ULL + 0x452821e638d01377ULL);
        h = detail::splitmix64(sm);
        sm = h ^ (c * 0xa24baed4963ee407ULL);
        return RngStream(detail::splitmix64(sm));
    }

    std::uint64_t next_u64() {
        auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on (0, 1); never returns 0 or 1 exactly.
    double uniform() {
        double u = (next_u64() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal by inverse CDF.
    double normal() { return normal_cdf_inv(uniform()); }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Gamma(shape, scale) via Marsaglia-Tsang, shape boost below 1.
    double gamma(double shape, double scale) {
        if (!(shape > 0.0 && scale > 0.0))
            throw std::domain_error("RngStream::gamma: bad parameters");
        if (shape < 1.0) {
            double u = uniform();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * scale;
        }
    }

    double beta(double a, double b) {
        double x = gamma(a, 1.0);
        double y = gamma(b, 1.0);
        double z = x / (x + y);
        if (z <= 0.0) z = 1e-300;
        if (z >= 1.0) z = 1.0 - 1e-16;
        return z;
    }

    /// Poisson: inversion walk for small means, PTRS transformed rejection
    /// otherwise.
    long long poisson(double mean) {
        if (!(mean >= 0.0)) throw std::domain_error("RngStream::poisson: bad mean");
        if (mean == 0.0) return 0;
        if (mean < 30.0) {
            double L = std::exp(-mean);
            double p = 1.0;
            long long k = -1;
            do {
                ++k;
                p *= uniform();
            } while (p > L);
            return k;
        }
        return poisson_ptrs(mean);
    }

    /// Binomial(n, p), exact: Bernoulli count for small n, otherwise
    /// beta-median recursion (Devroye).
    long long binomial(long long n, double p) {
        if (n < 0 || !(p >= 0.0 && p <= 1.0))
            throw std::domain_error("RngStream::binomial: bad parameters");
        if (n == 0 || p <= 0.0) return 0;
        if (p >= 1.0) return n;
        long long count = 0;
        double pp = p;
        long long nn = n;
        while (nn > 48) {
            long long i = nn / 2 + 1;
            double x = beta(static_cast<double>(i), static_cast<double>(nn - i + 1));
            if (x <= pp) {
                count += i;
                nn -= i;
                pp = (pp - x) / (1.0 - x);
            } else {
                nn = i - 1;
                pp = pp / x;
            }
            if (pp <= 0.0) return count;
            if (pp >= 1.0) return count + nn;
        }
        for (long long j = 0; j < nn; ++j)
            if (uniform() < pp) ++count;
        return count;
    }

private:
    long long poisson_ptrs(double mean) {
        // Hoermann's PTRS transformed rejection, exact for mean >= ~10
        double slam = std::sqrt(mean);
        double loglam = std::log(mean);
        double b = 0.931 + 2.53 * slam;
        double a = -0.059 + 0.02483 * b;
        double invalpha = 1.1239 + 1.1328 / (b - 3.4);
        double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            double u = uniform() - 0.5;
            double v = uniform();
            double us = 0.5 - std::fabs(u);
            double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= vr) return static_cast<long long>(k);
            if (k < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
                k * loglam - mean - log_gamma(k + 1.0))
                return static_cast<long long>(k);
        }
    }

    std::uint64_t s_[4];
};

} // namespace percontact

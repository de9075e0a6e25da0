#pragma once
// Log densities / log PMFs shared by the likelihood and the samplers.

#include "percontact/math/special.hpp"

namespace percontact {

inline double normal_logpdf(double x, double mean, double var) {
    double d = x - mean;
    return -0.5 * std::log(2.0 * kPi * var) - 0.5 * d * d / var;
}

inline double std_normal_logpdf(double z) {
    return -0.5 * std::log(2.0 * kPi) - 0.5 * z * z;
}

/// Gamma(shape, scale), density on x > 0.
inline double gamma_logpdf(double x, double shape, double scale) {
    if (!(x > 0.0)) return kNegInf;
    return (shape - 1.0) * std::log(x) - x / scale - log_gamma(shape) -
           shape * std::log(scale);
}

/// Inverse gamma with density proportional to x^{-shape-1} exp(-1/(scale*x)).
inline double inv_gamma_logpdf(double x, double shape, double scale) {
    if (!(x > 0.0)) return kNegInf;
    return -(shape + 1.0) * std::log(x) - 1.0 / (scale * x) - log_gamma(shape) -
           shape * std::log(scale);
}

inline double beta_logpdf(double x, double a, double b) {
    if (!(x > 0.0 && x < 1.0)) return kNegInf;
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) +
           log_gamma(a + b) - log_gamma(a) - log_gamma(b);
}

inline double poisson_logpmf(long long k, double mean) {
    if (k < 0) return kNegInf;
    if (mean <= 0.0) return k == 0 ? 0.0 : kNegInf;
    return k * std::log(mean) - mean - log_gamma(static_cast<double>(k) + 1.0);
}

inline double log_choose(long long n, long long k) {
    if (k < 0 || k > n) return kNegInf;
    return log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0);
}

inline double binomial_logpmf(long long k, long long n, double p) {
    if (k < 0 || k > n) return kNegInf;
    if (p <= 0.0) return k == 0 ? 0.0 : kNegInf;
    if (p >= 1.0) return k == n ? 0.0 : kNegInf;
    return log_choose(n, k) + k * std::log(p) + (n - k) * std::log1p(-p);
}

} // namespace percontact

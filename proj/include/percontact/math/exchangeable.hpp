#pragma once
// Exchangeable-covariance Gaussian utilities. Covariance sigma2*(rho*J+(1-rho)*I)
// admits O(T) inverse and determinant via Sherman-Morrison:
//   (aI + bJ)^-1 = (1/a) I - (b / (a(a+Tb))) J,  det = a^(T-1) (a + Tb).

#include <span>
#include <vector>

#include "percontact/math/rng.hpp"
#include "percontact/math/special.hpp"

namespace percontact {

struct ExchangeableGaussianSpec {
    int dim = 1;
    double mean = 0.0;
    double variance = 1.0;
    double correlation = 0.0; // in [0, 1)
};

/// Quadratic form d' (aI + bJ)^-1 d given sums of d and d^2.
inline double exch_quad_form(double sum_d, double sum_d2, int t, double a, double b) {
    return (sum_d2 - b * sum_d * sum_d / (a + t * b)) / a;
}

inline double exch_log_det(int t, double a, double b) {
    return (t - 1) * std::log(a) + std::log(a + t * b);
}

inline double exch_gaussian_logpdf(std::span<const double> z,
                                   const ExchangeableGaussianSpec& spec) {
    if (!(spec.correlation >= 0.0 && spec.correlation < 1.0))
        throw std::domain_error("exch_gaussian_logpdf: correlation must be in [0,1)");
    if (!(spec.variance > 0.0))
        throw std::domain_error("exch_gaussian_logpdf: variance must be > 0");
    const int t = static_cast<int>(z.size());
    const double a = spec.variance * (1.0 - spec.correlation);
    const double b = spec.variance * spec.correlation;
    double sum = 0.0, sum2 = 0.0;
    for (double v : z) {
        double d = v - spec.mean;
        sum += d;
        sum2 += d * d;
    }
    return -0.5 * t * std::log(2.0 * kPi) - 0.5 * exch_log_det(t, a, b) -
           0.5 * exch_quad_form(sum, sum2, t, a, b);
}

/// One-factor sampler: z = mean + sd*(sqrt(rho)*g*1 + sqrt(1-rho)*e).
inline void exch_gaussian_sample(const ExchangeableGaussianSpec& spec, RngStream& rng,
                                 std::span<double> out) {
    if (!(spec.correlation >= 0.0 && spec.correlation < 1.0))
        throw std::domain_error("exch_gaussian_sample: correlation must be in [0,1)");
    const double sd = std::sqrt(spec.variance);
    const double w_shared = std::sqrt(spec.correlation);
    const double w_own = std::sqrt(1.0 - spec.correlation);
    const double g = rng.normal();
    for (double& v : out)
        v = spec.mean + sd * (w_shared * g + w_own * rng.normal());
}

inline std::vector<double> exch_gaussian_sample(const ExchangeableGaussianSpec& spec,
                                                RngStream& rng) {
    std::vector<double> out(static_cast<std::size_t>(spec.dim));
    exch_gaussian_sample(spec, rng, out);
    return out;
}

} // namespace percontact

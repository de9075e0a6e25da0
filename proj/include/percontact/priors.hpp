#pragma once
// Log-prior densities, including the Jeffreys forms that need trigamma.

#include <utility>

#include "percontact/config.hpp"
#include "percontact/math/densities.hpp"

namespace percontact {

inline double log_prior_mu(double) { return 0.0; } // flat

inline double log_prior_sigma2(double v, const PriorConfig& cfg) {
    if (!(v > 0.0)) return kNegInf;
    if (cfg.sigma2_truncate && (v < cfg.sigma2_lo || v > cfg.sigma2_hi)) return kNegInf;
    return -std::log(v);
}

/// rho and gamma: Uniform(0, 1), flat on [0, 1).
inline double log_prior_unit(double x) {
    return (x >= 0.0 && x < 1.0) ? 0.0 : kNegInf;
}

/// Jeffreys prior for the over-dispersion shape: [trigamma(phi) - 1/phi]^(1/2).
inline double log_prior_phi(double phi) {
    if (!(phi > 0.0)) return kNegInf;
    double t = trigamma(phi) - 1.0 / phi;
    if (!(t > 0.0)) return kNegInf;
    return 0.5 * std::log(t);
}

/// Joint Jeffreys prior for beta shapes:
/// [tri(a) tri(b) - tri(a+b) (tri(a) + tri(b))]^(1/2).
inline double log_prior_alpha_beta(double a, double b) {
    if (!(a > 0.0 && b > 0.0)) return kNegInf;
    double ta = trigamma(a), tb = trigamma(b), tab = trigamma(a + b);
    double det = ta * tb - tab * (ta + tb);
    if (!(det > 0.0)) return kNegInf;
    return 0.5 * std::log(det);
}

inline double log_prior_theta(double t, double d) {
    return normal_logpdf(t, 0.0, d * d);
}

/// Moment inversion for the beta sensitivity prior on p0.
inline std::pair<double, double> beta_prior_from_moments(double mean, double sd) {
    if (!(mean > 0.0 && mean < 1.0)) throw std::domain_error("beta_prior_from_moments: bad mean");
    double var = sd * sd;
    if (!(var > 0.0 && var < mean * (1.0 - mean)))
        throw std::domain_error("beta_prior_from_moments: infeasible moments");
    double nu = mean * (1.0 - mean) / var - 1.0;
    return {mean * nu, (1.0 - mean) * nu};
}

inline double log_prior_p0(double p, const P0Prior& prior) {
    if (prior.type == P0Prior::Type::uniform) {
        if (!(p > prior.a && p < prior.b)) return kNegInf;
        return -std::log(prior.b - prior.a);
    }
    auto [a, b] = beta_prior_from_moments(prior.mean, prior.sd);
    return beta_logpdf(p, a, b);
}

/// Gamma-marginal rate hyperparameters (no form is given for these in the
/// source model): shape gets the same Jeffreys form as phi, scale gets 1/x.
inline double log_prior_rate_shape(double a) { return log_prior_phi(a); }

inline double log_prior_rate_scale(double s) {
    if (!(s > 0.0)) return kNegInf;
    return -std::log(s);
}

enum class PriorParam { mu, sigma2, rho, gamma_corr, phi, theta_v, theta_x, p0,
                        rate_shape, rate_scale };

/// Scalar dispatch; the (alpha, beta) pair uses log_prior_alpha_beta directly.
inline double log_prior(PriorParam which, double value, const PriorConfig& cfg) {
    switch (which) {
        case PriorParam::mu: return log_prior_mu(value);
        case PriorParam::sigma2: return log_prior_sigma2(value, cfg);
        case PriorParam::rho:
        case PriorParam::gamma_corr: return log_prior_unit(value);
        case PriorParam::phi: return log_prior_phi(value);
        case PriorParam::theta_v: return log_prior_theta(value, cfg.d_theta_v);
        case PriorParam::theta_x: return log_prior_theta(value, cfg.d_theta_x);
        case PriorParam::p0: return log_prior_p0(value, cfg.p0);
        case PriorParam::rate_shape: return log_prior_rate_shape(value);
        case PriorParam::rate_scale: return log_prior_rate_scale(value);
    }
    return kNegInf;
}

} // namespace percontact

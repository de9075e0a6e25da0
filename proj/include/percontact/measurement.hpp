#pragma once
// Measurement-error submodel: rate-vector priors (log-normal or gamma with a
// normal copula), Poisson / over-dispersed Poisson count layers, binomial
// proportion layers and the copula link between eps and xi.

#include <span>
#include <vector>

#include "percontact/config.hpp"
#include "percontact/math/densities.hpp"
#include "percontact/math/exchangeable.hpp"

namespace percontact {

struct RateHyper {
    RateMarginal marginal = RateMarginal::lognormal;
    double mu = 0.0;
    double sigma2 = 1.0;
    double alpha_lam = 1.0, beta_lam = 1.0; // gamma marginal shape/scale
    double rho = 0.0;
    double phi = 1.0; // over-dispersion, used by the count layer

    void validate() const {
        if (!(rho >= 0.0 && rho < 1.0)) throw std::domain_error("RateHyper: rho must be in [0,1)");
        if (marginal == RateMarginal::lognormal) {
            if (!(sigma2 > 0.0)) throw std::domain_error("RateHyper: sigma2 must be > 0");
        } else if (!(alpha_lam > 0.0 && beta_lam > 0.0)) {
            throw std::domain_error("RateHyper: gamma shape/scale must be > 0");
        }
    }
};

struct ProportionHyper {
    double alpha = 1.0, beta = 1.0;
    double gamma_corr = 0.0;

    void validate() const {
        if (!(alpha > 0.0 && beta > 0.0))
            throw std::domain_error("ProportionHyper: shapes must be > 0");
        if (!(gamma_corr >= 0.0 && gamma_corr < 1.0))
            throw std::domain_error("ProportionHyper: gamma must be in [0,1)");
    }
};

inline constexpr double kCopulaUClamp = 1e-15;

inline double clamp_unit(double u) {
    return std::min(std::max(u, kCopulaUClamp), 1.0 - kCopulaUClamp);
}

/// xi = Psi^-1(Phi(eps) | alpha, beta). hint warm-starts the beta inverse.
inline double copula_forward(double eps, double alpha, double beta, double hint = -1.0) {
    return beta_cdf_inv(clamp_unit(normal_cdf(eps)), alpha, beta, hint);
}

/// eps = Phi^-1(Psi(xi | alpha, beta)).
inline double copula_inverse(double xi, double alpha, double beta) {
    if (!(xi > 0.0 && xi < 1.0)) throw std::domain_error("copula_inverse: xi must be in (0,1)");
    return normal_cdf_inv(clamp_unit(beta_cdf(xi, alpha, beta)));
}

/// Copula coordinate of one rate under the gamma marginal.
inline double rate_to_z(double lambda, double alpha_lam, double beta_lam) {
    return normal_cdf_inv(clamp_unit(gamma_cdf(lambda, alpha_lam, beta_lam)));
}

inline double rate_from_z(double z, double alpha_lam, double beta_lam, double hint = -1.0) {
    (void)hint;
    return gamma_cdf_inv(clamp_unit(normal_cdf(z)), alpha_lam, beta_lam);
}

/// Log density of a subject's rate vector under the configured marginal,
/// with exchangeable within-subject correlation rho. The gamma branch uses
/// the normal-copula density: per-coordinate gamma terms plus the
/// exchangeable-normal correction on the transformed coordinates.
inline double rate_vector_logpdf(std::span<const double> lambda, const RateHyper& hyper,
                                 std::span<const double> z_cache = {}) {
    hyper.validate();
    const int t = static_cast<int>(lambda.size());
    for (double l : lambda)
        if (!(l > 0.0)) return kNegInf;
    if (hyper.marginal == RateMarginal::lognormal) {
        double lp = 0.0, sum = 0.0, sum2 = 0.0;
        const double a = hyper.sigma2 * (1.0 - hyper.rho), b = hyper.sigma2 * hyper.rho;
        for (double l : lambda) {
            double d = std::log(l) - hyper.mu;
            sum += d;
            sum2 += d * d;
            lp -= std::log(l); // Jacobian of log
        }
        lp += -0.5 * t * std::log(2.0 * kPi) - 0.5 * exch_log_det(t, a, b) -
              0.5 * exch_quad_form(sum, sum2, t, a, b);
        return lp;
    }
    double lp = 0.0, sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < t; ++i) {
        lp += gamma_logpdf(lambda[i], hyper.alpha_lam, hyper.beta_lam);
        double z = z_cache.empty() ? rate_to_z(lambda[i], hyper.alpha_lam, hyper.beta_lam)
                                   : z_cache[i];
        sum += z;
        sum2 += z * z;
        lp -= std_normal_logpdf(z);
    }
    const double a = 1.0 - hyper.rho, b = hyper.rho;
    lp += -0.5 * t * std::log(2.0 * kPi) - 0.5 * exch_log_det(t, a, b) -
          0.5 * exch_quad_form(sum, sum2, t, a, b);
    return lp;
}

/// Count-layer log likelihood for one interval.
/// With over-dispersion: Pois(n | lam*l) + Gamma(delta | phi, lam*l/phi) + Pois(n~ | delta).
/// Without: Pois(n | lam*l) + Pois(n~ | lam*l).
inline double counts_loglik(long long n, long long n_tilde, double delta, double lambda,
                            double l, double phi, bool overdispersion) {
    if (n < 0 || n_tilde < 0) throw std::invalid_argument("counts_loglik: negative counts");
    if (!(lambda > 0.0 && l > 0.0)) throw std::domain_error("counts_loglik: need lambda, l > 0");
    const double rate = lambda * l;
    double lp = poisson_logpmf(n, rate);
    if (overdispersion) {
        if (!(phi > 0.0 && delta > 0.0))
            throw std::domain_error("counts_loglik: need phi, delta > 0");
        lp += gamma_logpdf(delta, phi, rate / phi);
        lp += poisson_logpmf(n_tilde, delta);
    } else {
        lp += poisson_logpmf(n_tilde, rate);
    }
    return lp;
}

/// Proportion-layer log likelihood: Binom(m | n, xi) + Binom(m~ | n~, xi).
inline double proportions_loglik(long long m, long long m_tilde, long long n,
                                 long long n_tilde, double xi) {
    if (m < 0 || m > n || m_tilde < 0 || m_tilde > n_tilde)
        throw std::invalid_argument("proportions_loglik: count inconsistency");
    if (!(xi > 0.0 && xi < 1.0)) throw std::domain_error("proportions_loglik: xi must be in (0,1)");
    return binomial_logpmf(m, n, xi) + binomial_logpmf(m_tilde, n_tilde, xi);
}

} // namespace percontact

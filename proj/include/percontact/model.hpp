#pragma once
// Regression submodel: per-contact transmission probabilities, interval
// escape probabilities, outcome likelihoods (single-strain and two-subtype)
// and the vaccine-efficacy transform.

#include <span>
#include <vector>

#include "percontact/math/densities.hpp"
#include "percontact/math/special.hpp"

namespace percontact {

enum class Design { vax004, vax003 };

/// HIV-1 subtype label for infected intervals. 'u' = untypeable.
enum class Subtype { none, e, b, u };

struct OutcomeRecord {
    int infected = 0;
    Subtype subtype = Subtype::none;
};

struct PrevalenceSpec {
    double pi = 0.0;                  // single-strain prevalence
    double pi_e = 0.0, pi_b = 0.0;    // subtype prevalences
    bool subtype = false;

    void validate() const {
        if (subtype) {
            if (!(pi_e > 0.0 && pi_e < 1.0 && pi_b > 0.0 && pi_b < 1.0))
                throw std::domain_error("PrevalenceSpec: subtype prevalences must be in (0,1)");
            if (pi_e + pi_b > 1.0)
                throw std::domain_error("PrevalenceSpec: pi_e + pi_b must be <= 1");
        } else if (!(pi > 0.0 && pi < 1.0)) {
            throw std::domain_error("PrevalenceSpec: pi must be in (0,1)");
        }
    }
};

struct RegressionParams {
    double p0 = 0.01;
    std::vector<double> theta;

    void validate() const {
        if (!(p0 > 0.0 && p0 < 1.0))
            throw std::domain_error("RegressionParams: p0 must be in (0,1)");
        for (double t : theta)
            if (!std::isfinite(t))
                throw std::domain_error("RegressionParams: theta must be finite");
    }
};

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double inv_logit(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

/// Per-contact transmission probability, logit^-1(logit(p0) + x'theta).
/// Result kept strictly inside (0, 1).
inline double transmission_prob(std::span<const double> x, double p0,
                                std::span<const double> theta) {
    if (x.size() != theta.size())
        throw std::invalid_argument("transmission_prob: covariate/coefficient size mismatch");
    double eta = logit(p0);
    for (std::size_t k = 0; k < x.size(); ++k) eta += x[k] * theta[k];
    if (!std::isfinite(eta))
        throw std::overflow_error("transmission_prob: non-finite linear predictor");
    double p = inv_logit(eta);
    if (p <= 0.0) p = 1e-300;
    if (p >= 1.0) p = 1.0 - 1e-16;
    return p;
}

inline double transmission_prob(std::span<const double> x, const RegressionParams& params) {
    params.validate();
    return transmission_prob(x, params.p0, params.theta);
}

/// log of the single-contact escape factor 1 - p*pi.
inline double log_contact_escape(double p, double pi) { return std::log1p(-p * pi); }

/// log escape probability over an interval with m contacts in the protected /
/// shared subset and n-m outside it. log_q1 and log_q0 are per-contact log
/// escape factors for the two groups (log_q0 = 0 encodes non-infectious
/// out-of-subset contacts, the VAX003 case).
inline double log_escape_prob(long long n, long long m, double log_q1, double log_q0) {
    if (m < 0 || m > n)
        throw std::invalid_argument("log_escape_prob: need 0 <= m <= n");
    return m * log_q1 + (n - m) * log_q0;
}

/// Interval escape probability per design. For VAX004, p_in / p_out are the
/// transmission probabilities with and without condom; for VAX003 p_in is
/// the shared-needle transmission probability and contacts outside the
/// subset are not infectious.
inline double escape_prob(long long n, long long m, double p_in, double p_out, double pi,
                          Design design) {
    double lq1 = log_contact_escape(p_in, pi);
    double lq0 = design == Design::vax004 ? log_contact_escape(p_out, pi) : 0.0;
    return std::exp(log_escape_prob(n, m, lq1, lq0));
}

/// Bernoulli outcome log likelihood given escape probability Q.
inline double outcome_loglik(int y, double q) {
    if (!(q > 0.0 && q <= 1.0))
        throw std::domain_error("outcome_loglik: Q must be in (0,1]");
    if (y == 0) return std::log(q);
    if (q >= 1.0) return kNegInf; // infection with no infectious-capable contact
    return std::log1p(-q);
}

/// Same likelihood evaluated from log Q; this is the path the samplers use.
inline double outcome_loglik_logq(int y, double log_q) {
    if (log_q > 0.0) throw std::domain_error("outcome_loglik_logq: log Q must be <= 0");
    return y == 0 ? log_q : log1mexp(log_q);
}

/// Two-subtype competing-risks outcome log likelihood, log-space escape inputs.
inline double subtype_outcome_loglik_logq(const OutcomeRecord& out, double log_qe,
                                          double log_qb) {
    if (out.infected == 0) return log_qe + log_qb;
    switch (out.subtype) {
        case Subtype::e: return log_qb + log1mexp(log_qe);
        case Subtype::b: return log_qe + log1mexp(log_qb);
        case Subtype::u: return log1mexp(log_qe + log_qb);
        default:
            throw std::invalid_argument("subtype_outcome_loglik: infected record needs a subtype");
    }
}

inline double subtype_outcome_loglik(const OutcomeRecord& out, double qe, double qb) {
    if (!(qe > 0.0 && qe <= 1.0 && qb > 0.0 && qb <= 1.0))
        throw std::domain_error("subtype_outcome_loglik: escape probabilities must be in (0,1]");
    return subtype_outcome_loglik_logq(out, std::log(qe), std::log(qb));
}

/// VE per infectious contact, 1 - OR_vac.
inline double vaccine_efficacy(double theta_v) {
    if (!std::isfinite(theta_v))
        throw std::domain_error("vaccine_efficacy: theta_v must be finite");
    return -std::expm1(theta_v);
}

} // namespace percontact

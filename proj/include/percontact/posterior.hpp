#pragma once
// Joint log posterior of all latents and parameters given the observed data,
// up to an additive constant. Every sampler's conditional is tested against
// this function.

#include "percontact/config.hpp"
#include "percontact/measurement.hpp"
#include "percontact/model.hpp"
#include "percontact/priors.hpp"

namespace percontact {

inline RateHyper make_rate_hyper(const Params& par, int group, const ModelConfig& cfg) {
    RateHyper h;
    h.marginal = cfg.marginal;
    if (cfg.marginal == RateMarginal::lognormal) {
        h.mu = par.mu[group];
        h.sigma2 = par.sigma2[group];
    } else {
        h.alpha_lam = par.alpha_lam[group];
        h.beta_lam = par.beta_lam[group];
    }
    h.rho = par.rho;
    h.phi = par.phi;
    return h;
}

inline ProportionHyper make_prop_hyper(const Params& par, int group) {
    return ProportionHyper{par.alpha[group], par.beta[group], par.gamma_corr};
}

/// Per-contact log escape factors for one subject under the current
/// regression parameters. log_q1 applies to subset contacts (condom-protected
/// or shared-needle), log_q0 to the rest; subtype runs carry the two
/// per-subtype factors with log_q1 = log_q1_e + log_q1_b.
struct ContactEscape {
    double log_q1 = 0.0, log_q0 = 0.0;
    double log_q1_e = 0.0, log_q1_b = 0.0;
};

inline ContactEscape contact_escape(const SubjectObs& s, const Params& par,
                                    const ModelConfig& cfg) {
    ContactEscape q;
    const int ns = cfg.n_subtypes();
    const int st = cfg.risk_stratified ? s.stratum : 0;
    if (cfg.design == Design::vax004) {
        const int j = par.reg_index(st, 0, ns);
        double eta = logit(par.p0[j]) + par.theta_v[j] * s.vaccine;
        double p_out = inv_logit(eta);
        double p_in = inv_logit(eta + par.theta_x);
        q.log_q1 = log_contact_escape(p_in, cfg.prevalence.pi);
        q.log_q0 = log_contact_escape(p_out, cfg.prevalence.pi);
        return q;
    }
    if (!cfg.subtype) {
        const int j = par.reg_index(st, 0, ns);
        double p = inv_logit(logit(par.p0[j]) + par.theta_v[j] * s.vaccine +
                             par.theta_x * s.incarceration);
        q.log_q1 = log_contact_escape(p, cfg.prevalence.pi);
        q.log_q0 = 0.0;
        return q;
    }
    const int je = par.reg_index(st, 0, ns);
    const int jb = par.reg_index(st, 1, ns);
    double pe = inv_logit(logit(par.p0[je]) + par.theta_v[je] * s.vaccine +
                          par.theta_x * s.incarceration);
    double pb = inv_logit(logit(par.p0[jb]) + par.theta_v[jb] * s.vaccine +
                          par.theta_x * s.incarceration);
    q.log_q1_e = log_contact_escape(pe, cfg.prevalence.pi_e);
    q.log_q1_b = log_contact_escape(pb, cfg.prevalence.pi_b);
    q.log_q1 = q.log_q1_e + q.log_q1_b;
    q.log_q0 = 0.0;
    return q;
}

/// Outcome log likelihood for one interval given the subject's escape factors.
inline double interval_outcome_loglik(const IntervalObs& iv, long long n, long long m,
                                      const ContactEscape& q, const ModelConfig& cfg) {
    if (cfg.subtype) {
        OutcomeRecord out{iv.infected, iv.subtype};
        return subtype_outcome_loglik_logq(out, m * q.log_q1_e, m * q.log_q1_b);
    }
    double log_escape = log_escape_prob(n, m, q.log_q1, q.log_q0);
    return outcome_loglik_logq(iv.infected, log_escape);
}

inline double log_prior_all(const Params& par, const ModelConfig& cfg) {
    double lp = 0.0;
    const auto& pc = cfg.priors;
    const int groups = cfg.n_hyper_groups();
    for (int g = 0; g < groups; ++g) {
        if (cfg.marginal == RateMarginal::lognormal) {
            lp += log_prior_mu(par.mu[g]);
            lp += log_prior_sigma2(par.sigma2[g], pc);
        } else {
            lp += log_prior_rate_shape(par.alpha_lam[g]);
            lp += log_prior_rate_scale(par.beta_lam[g]);
        }
        lp += log_prior_alpha_beta(par.alpha[g], par.beta[g]);
    }
    lp += log_prior_unit(par.rho);
    lp += log_prior_unit(par.gamma_corr);
    if (cfg.overdispersion) lp += log_prior_phi(par.phi);
    for (double p : par.p0) lp += log_prior_p0(p, pc.p0);
    for (double t : par.theta_v) lp += log_prior_theta(t, pc.d_theta_v);
    lp += log_prior_theta(par.theta_x, pc.d_theta_x);
    return lp;
}

/// Full joint log posterior. Latent invariant violations yield -inf rather
/// than an exception so Metropolis steps can reject such proposals. xi is
/// recomputed from eps, which is the primitive copula coordinate.
inline double joint_log_posterior(const Dataset& data, const LatentState& state,
                                  const Params& par, const ModelConfig& cfg) {
    if (state.subj.size() != data.subjects.size())
        throw std::invalid_argument("joint_log_posterior: state/data size mismatch");
    double lp = log_prior_all(par, cfg);
    if (!std::isfinite(lp)) return kNegInf;

    for (std::size_t i = 0; i < data.subjects.size(); ++i) {
        const auto& s = data.subjects[i];
        const auto& lat = state.subj[i];
        const int t_len = static_cast<int>(s.intervals.size());
        const int g = cfg.incarceration_stratified ? s.incarceration : 0;
        const RateHyper rh = make_rate_hyper(par, g, cfg);
        const ProportionHyper ph = make_prop_hyper(par, g);
        const ContactEscape q = contact_escape(s, par, cfg);

        for (int t = 0; t < t_len; ++t) {
            if (lat.m[t] < 0 || lat.m[t] > lat.n[t]) return kNegInf;
            if (!(lat.lambda[t] > 0.0)) return kNegInf;
            if (cfg.overdispersion && !(lat.delta[t] > 0.0)) return kNegInf;
        }

        lp += rate_vector_logpdf(lat.lambda, rh,
                                 cfg.marginal == RateMarginal::gamma ? lat.rate_z
                                                                     : std::span<const double>{});
        lp += exch_gaussian_logpdf(lat.eps, {t_len, 0.0, 1.0, par.gamma_corr});

        for (int t = 0; t < t_len; ++t) {
            const auto& iv = s.intervals[t];
            lp += counts_loglik(lat.n[t], iv.n_rep,
                                cfg.overdispersion ? lat.delta[t] : 1.0, lat.lambda[t],
                                iv.days, par.phi, cfg.overdispersion);
            double xi = copula_forward(lat.eps[t], ph.alpha, ph.beta, lat.xi[t]);
            lp += proportions_loglik(lat.m[t], iv.m_rep, lat.n[t], iv.n_rep, xi);
            lp += interval_outcome_loglik(iv, lat.n[t], lat.m[t], q, cfg);
            if (!std::isfinite(lp)) return kNegInf;
        }
    }
    return lp;
}

} // namespace percontact

#pragma once
// Generative sampler of complete synthetic trials (observed data plus latent
// truth) under either design; the ground-truth oracle for the recovery tests.

#include <string>
#include <vector>

#include "percontact/config.hpp"
#include "percontact/posterior.hpp"

namespace percontact {

struct SimConfig {
    Design design = Design::vax004;
    bool subtype = false;
    bool overdispersion = true;
    RateMarginal marginal = RateMarginal::lognormal;
    bool incarceration_stratified = false;

    int n_subjects = 1000;
    int n_intervals = 6;
    double interval_days = 182.5;
    double vaccine_frac = 2.0 / 3.0; // randomization ratio 2:1
    double incarceration_frac = 0.0;
    std::vector<double> stratum_mix{1.0};
    std::vector<std::string> stratum_labels{"all"};
    PrevalenceSpec prevalence;
    bool coarsen = false;
    Params truth;

    static SimConfig defaults_for(Design d) {
        SimConfig c;
        c.design = d;
        if (d == Design::vax004) {
            c.overdispersion = true;
            c.marginal = RateMarginal::lognormal;
            c.prevalence.pi = 0.06;
            c.vaccine_frac = 2.0 / 3.0;
        } else {
            c.overdispersion = false;
            c.marginal = RateMarginal::gamma;
            c.prevalence.pi = 0.3;
            c.vaccine_frac = 0.5;
            c.coarsen = true;
        }
        return c;
    }

    /// The model configuration a fit of this simulated trial should use.
    ModelConfig model_config() const {
        ModelConfig m;
        m.design = design;
        m.subtype = subtype;
        m.overdispersion = overdispersion;
        m.marginal = marginal;
        m.prevalence = prevalence;
        m.risk_stratified = stratum_mix.size() > 1;
        m.incarceration_stratified = incarceration_stratified;
        return m;
    }
};

struct SimResult {
    Dataset data;
    LatentState latents;
    Params truth;
};

/// Draw one complete trial: covariates, rate vectors through the configured
/// marginal and copula, counts with optional over-dispersion, proportions
/// through the normal copula, then outcomes. A subject's records stop at the
/// first infected interval. VAX003-style output optionally coarsens reported
/// counts into the frequency / sharing categories.
inline SimResult simulate_trial(const SimConfig& cfg, std::uint64_t seed) {
    if (cfg.n_subjects <= 0 || cfg.n_intervals <= 0 || !(cfg.interval_days > 0.0))
        throw std::invalid_argument("simulate_trial: bad sizes");
    if (cfg.stratum_mix.size() != cfg.stratum_labels.size())
        throw std::invalid_argument("simulate_trial: stratum mix/label size mismatch");
    cfg.prevalence.validate();

    const ModelConfig mcfg = cfg.model_config();
    const Params& tp = cfg.truth;

    SimResult out;
    out.truth = tp;
    out.data.stratum_labels = cfg.stratum_labels;
    out.data.subjects.reserve(static_cast<std::size_t>(cfg.n_subjects));
    out.latents.subj.reserve(static_cast<std::size_t>(cfg.n_subjects));

    for (int i = 0; i < cfg.n_subjects; ++i) {
        RngStream rng = RngStream::derive(seed, 0x51e1dULL, static_cast<std::uint64_t>(i) + 1);
        SubjectObs s;
        s.id = "s" + std::to_string(i + 1);
        double u_strat = rng.uniform();
        double acc = 0.0;
        s.stratum = static_cast<int>(cfg.stratum_mix.size()) - 1;
        for (std::size_t k = 0; k < cfg.stratum_mix.size(); ++k) {
            acc += cfg.stratum_mix[k];
            if (u_strat < acc) {
                s.stratum = static_cast<int>(k);
                break;
            }
        }
        s.vaccine = rng.uniform() < cfg.vaccine_frac ? 1 : 0;
        s.incarceration = rng.uniform() < cfg.incarceration_frac ? 1 : 0;
        const int g = cfg.incarceration_stratified ? s.incarceration : 0;

        const int t_cap = cfg.n_intervals;
        SubjectLatents lat;
        lat.lambda.resize(static_cast<std::size_t>(t_cap));
        lat.eps.resize(static_cast<std::size_t>(t_cap));
        lat.xi.resize(static_cast<std::size_t>(t_cap));
        if (cfg.marginal == RateMarginal::gamma) {
            lat.rate_z.resize(static_cast<std::size_t>(t_cap));
            exch_gaussian_sample({t_cap, 0.0, 1.0, tp.rho}, rng, lat.rate_z);
            for (int t = 0; t < t_cap; ++t)
                lat.lambda[static_cast<std::size_t>(t)] =
                    rate_from_z(lat.rate_z[static_cast<std::size_t>(t)], tp.alpha_lam[g],
                                tp.beta_lam[g]);
        } else {
            exch_gaussian_sample({t_cap, tp.mu[g], tp.sigma2[g], tp.rho}, rng, lat.lambda);
            for (auto& v : lat.lambda) v = std::exp(v);
        }
        exch_gaussian_sample({t_cap, 0.0, 1.0, tp.gamma_corr}, rng, lat.eps);
        for (int t = 0; t < t_cap; ++t)
            lat.xi[static_cast<std::size_t>(t)] =
                copula_forward(lat.eps[static_cast<std::size_t>(t)], tp.alpha[g], tp.beta[g]);

        const ContactEscape q = contact_escape(s, tp, mcfg);
        int kept = 0;
        for (int t = 0; t < t_cap; ++t) {
            const std::size_t ti = static_cast<std::size_t>(t);
            IntervalObs iv;
            iv.days = cfg.interval_days;
            const double rate = lat.lambda[ti] * iv.days;
            long long n = rng.poisson(rate);
            long long n_tilde;
            double delta = 0.0;
            if (cfg.overdispersion) {
                delta = rng.gamma(tp.phi, rate / tp.phi);
                n_tilde = rng.poisson(delta);
            } else {
                n_tilde = rng.poisson(rate);
            }
            long long m = rng.binomial(n, lat.xi[ti]);
            long long m_tilde = rng.binomial(n_tilde, lat.xi[ti]);

            if (mcfg.subtype) {
                bool hit_e = rng.uniform() < -std::expm1(m * q.log_q1_e);
                bool hit_b = rng.uniform() < -std::expm1(m * q.log_q1_b);
                if (hit_e || hit_b) {
                    iv.infected = 1;
                    iv.subtype = hit_e && hit_b ? Subtype::u : (hit_e ? Subtype::e : Subtype::b);
                }
            } else {
                double log_esc = log_escape_prob(n, m, q.log_q1, q.log_q0);
                iv.infected = rng.uniform() < -std::expm1(log_esc) ? 1 : 0;
            }

            iv.n_rep = n_tilde;
            iv.m_rep = m_tilde;
            if (cfg.coarsen) {
                iv.freq_cat = CategoryMaps::coarsen_rate(static_cast<double>(n_tilde) / iv.days);
                iv.n_rep = std::llround(CategoryMaps::freq_rate(iv.freq_cat) * iv.days);
                double frac = n_tilde > 0 ? static_cast<double>(m_tilde) /
                                                static_cast<double>(n_tilde)
                                          : 0.0;
                iv.share_cat = CategoryMaps::coarsen_frac(frac);
                iv.m_rep = std::min(iv.n_rep,
                                    std::llround(CategoryMaps::share_frac(iv.share_cat) *
                                                 static_cast<double>(iv.n_rep)));
            }

            lat.n.push_back(n);
            lat.m.push_back(m);
            if (cfg.overdispersion) lat.delta.push_back(delta);
            s.intervals.push_back(iv);
            ++kept;
            if (iv.infected) break; // visits after first positive detection are excluded
        }
        lat.lambda.resize(static_cast<std::size_t>(kept));
        lat.eps.resize(static_cast<std::size_t>(kept));
        lat.xi.resize(static_cast<std::size_t>(kept));
        if (!lat.rate_z.empty()) lat.rate_z.resize(static_cast<std::size_t>(kept));

        out.data.subjects.push_back(std::move(s));
        out.latents.subj.push_back(std::move(lat));
    }
    return out;
}

} // namespace percontact

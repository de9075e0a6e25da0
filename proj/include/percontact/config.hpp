#pragma once
// Run and model configuration plus the parameter / latent-state containers.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "percontact/data.hpp"
#include "percontact/model.hpp"

namespace percontact {

enum class RateMarginal { lognormal, gamma };

struct P0Prior {
    enum class Type { uniform, beta };
    Type type = Type::uniform;
    double a = 0.0001, b = 0.1; // uniform bounds
    double mean = 0.0073, sd = 0.001; // beta alternative, by moments
};

struct PriorConfig {
    double d_theta_v = 2.0;
    double d_theta_x = 2.0;
    P0Prior p0;
    bool sigma2_truncate = false;
    double sigma2_lo = 1e-6, sigma2_hi = 1e6;
};

struct ModelConfig {
    Design design = Design::vax004;
    bool subtype = false;
    bool overdispersion = true;
    RateMarginal marginal = RateMarginal::lognormal;
    PrevalenceSpec prevalence;
    bool risk_stratified = false;
    bool incarceration_stratified = false;
    PriorConfig priors;

    static ModelConfig defaults_for(Design d) {
        ModelConfig c;
        c.design = d;
        if (d == Design::vax004) {
            c.overdispersion = true;
            c.marginal = RateMarginal::lognormal;
            c.prevalence.pi = 0.06;
        } else {
            c.overdispersion = false;
            c.marginal = RateMarginal::gamma;
            c.prevalence.pi = 0.3;
        }
        return c;
    }

    int n_subtypes() const { return subtype ? 2 : 1; }
    int n_hyper_groups() const { return incarceration_stratified ? 2 : 1; }

    void validate(const Dataset& data) const {
        prevalence.validate();
        if (subtype && design != Design::vax003)
            throw std::invalid_argument("ModelConfig: subtype model requires the vax003 design");
        if (prevalence.subtype != subtype)
            throw std::invalid_argument("ModelConfig: prevalence spec does not match subtype flag");
        if (priors.p0.type == P0Prior::Type::uniform &&
            !(priors.p0.a > 0.0 && priors.p0.a < priors.p0.b && priors.p0.b < 1.0))
            throw std::invalid_argument("ModelConfig: need 0 < a_p < b_p < 1");
        if (risk_stratified && data.stratum_labels.size() < 2)
            throw std::invalid_argument("ModelConfig: risk stratification needs stratum labels");
    }
};

struct RunConfig {
    int chains = 3;
    long long adapt_iters = 2000;
    long long burnin = 5000;       // post-adaptation burn-in
    long long check_interval = 5000;
    double rhat_threshold = 1.2;   // <= 0 disables the stopping rule
    long long max_iters = 100000;  // cap on post-burn-in iterations
    std::uint64_t seed = 20080101;
    int threads = 0;               // 0 = one per chain
    int monitor_lambda = 5;        // latent rate coordinates added to diagnostics
    bool fix_latents = false;      // pin n, m, delta, lambda, eps at initial values
    std::map<std::string, double> fixed_params; // pinned global parameters

    void validate() const {
        if (chains < 2) throw std::invalid_argument("RunConfig: need >= 2 chains for diagnostics");
        if (!(rhat_threshold > 1.0) && rhat_threshold > 0.0)
            throw std::invalid_argument("RunConfig: rhat threshold must exceed 1");
        if (burnin < 0 || adapt_iters < 0 || check_interval <= 0 || max_iters <= 0)
            throw std::invalid_argument("RunConfig: bad iteration settings");
    }
};

/// All sampled global parameters. Regression blocks are stored flattened as
/// [stratum][subtype]; hyperparameter groups follow the incarceration
/// stratification (size 1 when off).
struct Params {
    std::vector<double> p0{0.01};
    std::vector<double> theta_v{0.0};
    double theta_x = 0.0; // condom effect (vax004) or incarceration effect (vax003)

    std::vector<double> mu{0.0};          // log-normal marginal, per group
    std::vector<double> sigma2{1.0};      // log-normal marginal, per group
    std::vector<double> alpha_lam{1.0};   // gamma marginal, per group
    std::vector<double> beta_lam{1.0};    // gamma marginal, per group
    double rho = 0.3;

    std::vector<double> alpha{1.0}, beta{1.0}; // proportion shapes, per group
    double gamma_corr = 0.3;

    double phi = 1.0; // over-dispersion

    int reg_index(int stratum, int subtype_idx, int n_subtypes) const {
        return stratum * n_subtypes + subtype_idx;
    }
};

/// Latent quantities for one subject: true counts, over-dispersion rates,
/// contact rates and the copula coordinates. eps and xi are two views of one
/// latent linked by Phi(eps) = Psi(xi | alpha, beta).
struct SubjectLatents {
    std::vector<long long> n, m;
    std::vector<double> delta;  // empty when over-dispersion is off
    std::vector<double> lambda;
    std::vector<double> rate_z; // copula coordinates of lambda (gamma marginal)
    std::vector<double> eps, xi;
};

struct LatentState {
    std::vector<SubjectLatents> subj;
};

} // namespace percontact

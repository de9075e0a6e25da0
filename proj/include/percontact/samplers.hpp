#pragma once
// MCMC updates: exact conditional draws for the latent counts via inverse-CDF
// binary search, conjugate draws for delta / mu / sigma2, Metropolized
// independence cross-sampling for the rate vectors and the copula
// coordinates, and adaptive random-walk Metropolis-Hastings for everything
// else.

#include <array>
#include <tuple>
#include <utility>
#include <vector>

#include "percontact/math/densities.hpp"
#include "percontact/math/exchangeable.hpp"
#include "percontact/math/rng.hpp"
#include "percontact/measurement.hpp"
#include "percontact/model.hpp"

namespace percontact {

// ---------------------------------------------------------------------------
// Latent count n

/// Conditional draw of the true contact count n given m, the outcome and the
/// per-contact log escape factors (pi folded in; log_q0 = 0 encodes
/// non-infectious out-of-subset contacts). For y = 1 the conditional CDF is
/// inverted by bracket doubling plus binary search on the survival form,
///   S(k) = [P(k+1, a) - c P(k+1, a q0)] / (1 - c),  a = lambda*l*(1-xi),
/// with c = q1^m exp(a (q0 - 1)) evaluated through expm1 for stability.
inline long long sample_n(int y, long long m, double lambda, double l, double xi,
                          double log_q0, double log_q1, RngStream& rng) {
    if (m < 0) throw std::invalid_argument("sample_n: m must be >= 0");
    if (!(lambda > 0.0 && l > 0.0)) throw std::domain_error("sample_n: need lambda, l > 0");
    if (!(xi >= 0.0 && xi < 1.0)) throw std::domain_error("sample_n: xi must be in [0,1)");
    const double a = lambda * l * (1.0 - xi);
    if (y == 0) return m + rng.poisson(a * std::exp(log_q0));

    const double log_c = m * log_q1 + a * std::expm1(log_q0);
    const double denom = -std::expm1(log_c);
    if (!(denom > 0.0))
        throw std::domain_error("sample_n: infection impossible under current state");
    const double c = std::exp(log_c);
    const double aq0 = a * std::exp(log_q0);

    const double v = 1.0 - rng.uniform(); // find smallest k with survival <= v
    auto survival = [&](long long k) {
        double s = (gamma_p(k + 1.0, a) - c * gamma_p(k + 1.0, aq0)) / denom;
        return std::min(std::max(s, 0.0), 1.0);
    };
    if (survival(0) <= v) return m; // k = 0; zero mass there when m = 0
    const double cap_d = a + 40.0 * std::sqrt(a) + 1e6;
    const long long cap = static_cast<long long>(cap_d) + 2;
    long long lo = 0, hi = 1;
    while (survival(hi) > v) {
        lo = hi;
        hi *= 2;
        if (hi > cap)
            throw std::runtime_error("sample_n: conditional CDF did not reach the target "
                                     "within the overflow bracket");
    }
    while (hi - lo > 1) {
        long long mid = lo + (hi - lo) / 2;
        if (survival(mid) <= v) hi = mid; else lo = mid;
    }
    return m + hi;
}

// ---------------------------------------------------------------------------
// Latent count m

/// Conditional draw of the subset count m given n. y = 0 is an exact binomial
/// thinning; y = 1 inverts the two-binomial-CDF mixture by binary search.
inline long long sample_m(int y, long long n, double xi, double log_q0, double log_q1,
                          RngStream& rng) {
    if (n < 0) throw std::invalid_argument("sample_m: n must be >= 0");
    if (!(xi >= 0.0 && xi < 1.0)) throw std::domain_error("sample_m: xi must be in [0,1)");
    const double s1 = xi * std::exp(log_q1);
    const double s0 = (1.0 - xi) * std::exp(log_q0);
    const double s = s1 + s0;
    const double p_thin = s1 / s;
    if (y == 0) return rng.binomial(n, p_thin);

    if (n == 0) throw std::domain_error("sample_m: infected interval requires n >= 1");
    const double log_sn = n * std::log(s);
    const double denom = -std::expm1(log_sn);
    if (!(denom > 0.0))
        throw std::domain_error("sample_m: infection impossible under current state");
    const double sn = std::exp(log_sn);

    auto sf_bin = [](long long k, long long nn, double p) {
        if (k >= nn) return 0.0;
        if (k < 0) return 1.0;
        return beta_cdf(p, k + 1.0, static_cast<double>(nn - k)); // P(X > k)
    };
    const double v = 1.0 - rng.uniform();
    auto survival = [&](long long k) {
        double val = (sf_bin(k, n, xi) - sn * sf_bin(k, n, p_thin)) / denom;
        return std::min(std::max(val, 0.0), 1.0);
    };
    long long lo = -1, hi = n; // survival(n) = 0 <= v
    while (hi - lo > 1) {
        long long mid = lo + (hi - lo + 1) / 2;
        if (survival(mid) <= v) hi = mid; else lo = mid;
    }
    return hi;
}

/// Conditional draw of m for a typed infection in the two-subtype model:
/// PMF proportional to Binom(m | n, xi) times the subtype outcome factor with
/// escape probabilities entering as per-contact powers. Normalize-then-search
/// with log-space accumulation over m in {0..n}.
inline long long sample_m_subtype(Subtype st, long long n, double xi, double log_qe,
                                  double log_qb, RngStream& rng) {
    if (n <= 0) throw std::domain_error("sample_m_subtype: typed infection requires n >= 1");
    if (!(xi > 0.0 && xi < 1.0)) throw std::domain_error("sample_m_subtype: xi must be in (0,1)");
    const double lxi = std::log(xi), l1mxi = std::log1p(-xi);
    std::vector<double> logw(static_cast<std::size_t>(n) + 1, kNegInf);
    double lc = 0.0; // log C(n, m), updated incrementally
    double best = kNegInf;
    for (long long m = 0; m <= n; ++m) {
        double g;
        switch (st) {
            case Subtype::e: g = m == 0 ? kNegInf : m * log_qb + log1mexp(m * log_qe); break;
            case Subtype::b: g = m == 0 ? kNegInf : m * log_qe + log1mexp(m * log_qb); break;
            case Subtype::u: g = m == 0 ? kNegInf : log1mexp(m * (log_qe + log_qb)); break;
            default: throw std::invalid_argument("sample_m_subtype: outcome must be typed");
        }
        double lw = lc + m * lxi + (n - m) * l1mxi + g;
        logw[static_cast<std::size_t>(m)] = lw;
        if (lw > best) best = lw;
        lc += std::log(static_cast<double>(n - m)) - std::log(static_cast<double>(m + 1));
    }
    if (!(best > kNegInf))
        throw std::domain_error("sample_m_subtype: infection impossible under current state");
    double total = 0.0;
    for (double lw : logw) total += std::exp(lw - best);
    double target = rng.uniform() * total;
    double acc = 0.0;
    for (long long m = 0; m <= n; ++m) {
        acc += std::exp(logw[static_cast<std::size_t>(m)] - best);
        if (acc >= target) return m;
    }
    return n;
}

// ---------------------------------------------------------------------------
// Conjugate draws

/// delta | . ~ Gamma(n~ + phi, (1 + phi/(lambda l))^-1).
inline double sample_delta(long long n_tilde, double lambda, double l, double phi,
                           RngStream& rng) {
    if (!(phi > 0.0 && lambda > 0.0 && l > 0.0))
        throw std::domain_error("sample_delta: bad parameters");
    return rng.gamma(n_tilde + phi, 1.0 / (1.0 + phi / (lambda * l)));
}

/// Sufficient statistics for one subject: interval count and sum of log rates.
using MuStat = std::pair<int, double>;

/// mu | . ~ Normal(sum_i 1'S_i^-1 log lam_i / sum_i 1'S_i^-1 1, (sum_i 1'S_i^-1 1)^-1).
inline double sample_mu(const std::vector<MuStat>& stats, double sigma2, double rho,
                        RngStream& rng) {
    if (!(sigma2 > 0.0 && rho >= 0.0 && rho < 1.0))
        throw std::domain_error("sample_mu: bad hyperparameters");
    double num = 0.0, den = 0.0;
    for (const auto& [t, sum_log] : stats) {
        double w = 1.0 / (sigma2 * (1.0 - rho + t * rho));
        num += w * sum_log;
        den += w * t;
    }
    if (!(den > 0.0)) throw std::domain_error("sample_mu: no data");
    return rng.normal(num / den, std::sqrt(1.0 / den));
}

/// Per-subject statistics for the sigma2 draw: interval count, sum and sum of
/// squares of centered log rates.
using Sigma2Stat = std::tuple<int, double, double>;

/// sigma2 | . ~ InverseGamma((1/2) sum T_i, [ (1/2) sum quad_i ]^-1 ), the
/// quadratic forms taken against R_i = rho J + (1-rho) I.
inline double sample_sigma2(const std::vector<Sigma2Stat>& stats, double rho,
                            RngStream& rng, bool truncate = false, double lo = 1e-6,
                            double hi = 1e6) {
    if (!(rho >= 0.0 && rho < 1.0)) throw std::domain_error("sample_sigma2: bad rho");
    double shape = 0.0, rate = 0.0;
    for (const auto& [t, sum_d, sum_d2] : stats) {
        shape += 0.5 * t;
        rate += 0.5 * exch_quad_form(sum_d, sum_d2, t, 1.0 - rho, rho);
    }
    if (!(shape > 0.0)) throw std::domain_error("sample_sigma2: no data");
    for (int attempt = 0; attempt < 1000; ++attempt) {
        double draw = 1.0 / rng.gamma(shape, 1.0 / rate);
        if (!truncate || (draw >= lo && draw <= hi)) return draw;
    }
    throw std::runtime_error("sample_sigma2: truncation rejection failed");
}

// ---------------------------------------------------------------------------
// Rate vector: Metropolized independence cross-sampling

/// Per-interval data the lambda update conditions on.
struct LambdaSubjectData {
    std::span<const long long> n;
    std::span<const long long> n_tilde;
    std::span<const double> delta; // empty when over-dispersion is off
    std::span<const double> days;
};

namespace detail {

// Unnormalized log factors of the full conditional of lambda.
// A: gamma-shaped Poisson-count part; B: the delta layer rewritten as
// inverse-gamma times lambda (over-dispersion only).
inline double lambda_lik_A(std::span<const double> lam, const LambdaSubjectData& d,
                           bool overdispersion) {
    double s = 0.0;
    for (std::size_t t = 0; t < lam.size(); ++t) {
        double ll = std::log(lam[t]);
        if (overdispersion)
            s += d.n[t] * ll - lam[t] * d.days[t];
        else
            s += (d.n[t] + d.n_tilde[t]) * ll - 2.0 * lam[t] * d.days[t];
    }
    return s;
}

inline double lambda_lik_B(std::span<const double> lam, const LambdaSubjectData& d,
                           double phi, bool overdispersion) {
    if (!overdispersion) return 0.0;
    double s = 0.0;
    for (std::size_t t = 0; t < lam.size(); ++t)
        s += -phi * std::log(lam[t]) - phi * d.delta[t] / (d.days[t] * lam[t]);
    return s;
}

} // namespace detail

/// Three sequential Metropolized-independence steps, each factor of the full
/// conditional serving as the proposal in turn: (i) the exchangeable rate
/// prior, (ii) the gamma count factor, (iii) the inverse-gamma delta factor.
/// Without over-dispersion step (iii) is skipped and the two Poisson count
/// factors fold into step (ii)'s Gamma(n + n~ + 1, (2 l)^-1) proposal, so its
/// ratio keeps only the prior. Updates lambda (and the copula coordinates
/// z_cache under the gamma marginal) in place; returns accept flags.
inline std::array<bool, 3> sample_lambda_vec(std::vector<double>& lambda,
                                             std::vector<double>& z_cache,
                                             const LambdaSubjectData& d,
                                             const RateHyper& hyper, bool overdispersion,
                                             RngStream& rng) {
    const int t_len = static_cast<int>(lambda.size());
    const bool gamma_marg = hyper.marginal == RateMarginal::gamma;
    std::array<bool, 3> accepted{false, false, false};
    std::vector<double> prop(lambda.size()), prop_z;
    if (gamma_marg) prop_z.resize(lambda.size());

    auto prior_logpdf = [&](std::span<const double> lam, std::span<const double> z) {
        return rate_vector_logpdf(lam, hyper, gamma_marg ? z : std::span<const double>{});
    };
    auto commit = [&](int step) {
        lambda.swap(prop);
        if (gamma_marg) z_cache.swap(prop_z);
        accepted[static_cast<std::size_t>(step)] = true;
    };

    // step 1: propose from the rate prior
    if (gamma_marg) {
        exch_gaussian_sample({t_len, 0.0, 1.0, hyper.rho}, rng, prop_z);
        for (int t = 0; t < t_len; ++t)
            prop[t] = rate_from_z(prop_z[t], hyper.alpha_lam, hyper.beta_lam);
    } else {
        exch_gaussian_sample({t_len, hyper.mu, hyper.sigma2, hyper.rho}, rng, prop);
        for (double& v : prop) v = std::exp(v);
    }
    {
        double logr = detail::lambda_lik_A(prop, d, overdispersion) +
                      detail::lambda_lik_B(prop, d, hyper.phi, overdispersion) -
                      detail::lambda_lik_A(lambda, d, overdispersion) -
                      detail::lambda_lik_B(lambda, d, hyper.phi, overdispersion);
        if (logr >= 0.0 || rng.uniform() < std::exp(logr)) commit(0);
    }

    // step 2: propose from the gamma count factor
    for (int t = 0; t < t_len; ++t) {
        double shape = overdispersion ? d.n[t] + 1.0 : d.n[t] + d.n_tilde[t] + 1.0;
        double scale = overdispersion ? 1.0 / d.days[t] : 1.0 / (2.0 * d.days[t]);
        prop[t] = rng.gamma(shape, scale);
        if (gamma_marg) prop_z[t] = rate_to_z(prop[t], hyper.alpha_lam, hyper.beta_lam);
    }
    {
        double logr = prior_logpdf(prop, prop_z) +
                      detail::lambda_lik_B(prop, d, hyper.phi, overdispersion) -
                      prior_logpdf(lambda, z_cache) -
                      detail::lambda_lik_B(lambda, d, hyper.phi, overdispersion);
        if (logr >= 0.0 || rng.uniform() < std::exp(logr)) commit(1);
    }

    // step 3: propose from the inverse-gamma delta factor. The target keeps
    // the lone lambda factor of the delta-layer rewrite, so the ratio carries
    // prod(lambda) on top of the prior and the gamma count part.
    if (overdispersion) {
        for (int t = 0; t < t_len; ++t) {
            prop[t] = 1.0 / rng.gamma(hyper.phi, d.days[t] / (hyper.phi * d.delta[t]));
            if (gamma_marg) prop_z[t] = rate_to_z(prop[t], hyper.alpha_lam, hyper.beta_lam);
        }
        double sum_log_prop = 0.0, sum_log_cur = 0.0;
        for (int t = 0; t < t_len; ++t) {
            sum_log_prop += std::log(prop[t]);
            sum_log_cur += std::log(lambda[t]);
        }
        double logr = prior_logpdf(prop, prop_z) + detail::lambda_lik_A(prop, d, true) +
                      sum_log_prop - prior_logpdf(lambda, z_cache) -
                      detail::lambda_lik_A(lambda, d, true) - sum_log_cur;
        if (logr >= 0.0 || rng.uniform() < std::exp(logr)) commit(2);
    }
    return accepted;
}

// ---------------------------------------------------------------------------
// Copula coordinates (eps, xi)

/// Two Metropolized-independence steps for one subject's (eps, xi):
/// step 1 proposes eps* from N(0, Ups) and accepts on the binomial-likelihood
/// ratio; step 2 proposes xi* from the conjugate beta products and accepts on
/// the exchangeability correction exp(-eps'Ups^-1 eps / 2 + eps'eps / 2)
/// ratio. mm[t] = m + m~, nn[t] = (n - m) + (n~ - m~). The copula identity
/// Phi(eps) = Psi(xi | alpha, beta) holds on exit.
inline std::array<bool, 2> sample_epsilon_xi(std::vector<double>& eps,
                                             std::vector<double>& xi,
                                             std::span<const long long> mm,
                                             std::span<const long long> nn,
                                             const ProportionHyper& hyper, RngStream& rng) {
    const int t_len = static_cast<int>(eps.size());
    std::array<bool, 2> accepted{false, false};
    std::vector<double> prop_eps(eps.size()), prop_xi(eps.size());

    auto binom_part = [&](std::span<const double> x) {
        double s = 0.0;
        for (int t = 0; t < t_len; ++t)
            s += mm[t] * std::log(x[t]) + nn[t] * std::log1p(-x[t]);
        return s;
    };

    // step 1: independence proposal from the exchangeable normal prior
    exch_gaussian_sample({t_len, 0.0, 1.0, hyper.gamma_corr}, rng, prop_eps);
    for (int t = 0; t < t_len; ++t)
        prop_xi[t] = copula_forward(prop_eps[t], hyper.alpha, hyper.beta);
    {
        double logr = binom_part(prop_xi) - binom_part(xi);
        if (logr >= 0.0 || rng.uniform() < std::exp(logr)) {
            eps.swap(prop_eps);
            xi.swap(prop_xi);
            accepted[0] = true;
        }
    }

    // step 2: conjugate beta proposal, exchangeability-correction acceptance
    auto correction = [&](std::span<const double> e) {
        double sum = 0.0, sum2 = 0.0;
        for (double v : e) {
            sum += v;
            sum2 += v * v;
        }
        return -0.5 * exch_quad_form(sum, sum2, t_len, 1.0 - hyper.gamma_corr,
                                     hyper.gamma_corr) +
               0.5 * sum2;
    };
    for (int t = 0; t < t_len; ++t) {
        double x = rng.beta(hyper.alpha + mm[t], hyper.beta + nn[t]);
        prop_xi[t] = std::min(std::max(x, 1e-300), 1.0 - 1e-16);
        prop_eps[t] = copula_inverse(prop_xi[t], hyper.alpha, hyper.beta);
    }
    {
        double logr = correction(prop_eps) - correction(eps);
        if (logr >= 0.0 || rng.uniform() < std::exp(logr)) {
            eps.swap(prop_eps);
            xi.swap(prop_xi);
            accepted[1] = true;
        }
    }
    return accepted;
}

// ---------------------------------------------------------------------------
// Random-walk Metropolis-Hastings with adaptive scaling

struct Transform {
    enum class Kind { identity, log_scale, logit_unit, logit_range };
    Kind kind = Kind::identity;
    double a = 0.0, b = 1.0;

    static Transform identity() { return {}; }
    static Transform log() { return {Kind::log_scale, 0.0, 1.0}; }
    static Transform logit() { return {Kind::logit_unit, 0.0, 1.0}; }
    static Transform logit_in(double a, double b) { return {Kind::logit_range, a, b}; }

    double forward(double x) const {
        switch (kind) {
            case Kind::identity: return x;
            case Kind::log_scale: return std::log(x);
            case Kind::logit_unit: return percontact::logit(x);
            case Kind::logit_range: return percontact::logit((x - a) / (b - a));
        }
        return x;
    }
    double inverse(double z) const {
        switch (kind) {
            case Kind::identity: return z;
            case Kind::log_scale: return std::exp(z);
            case Kind::logit_unit: return inv_logit(z);
            case Kind::logit_range: return a + (b - a) * inv_logit(z);
        }
        return z;
    }
    /// log |dx/dz| at x.
    double log_jacobian(double x) const {
        switch (kind) {
            case Kind::identity: return 0.0;
            case Kind::log_scale: return std::log(x);
            case Kind::logit_unit: return std::log(x) + std::log1p(-x);
            case Kind::logit_range: {
                double u = (x - a) / (b - a);
                return std::log(b - a) + std::log(u) + std::log1p(-u);
            }
        }
        return 0.0;
    }
};

/// Proposal step-size state. Robbins-Monro on the log scale with gain c/t
/// over batches of proposals, toward the target acceptance rate; adaptation
/// stops once frozen.
struct RwScale {
    double log_step = std::log(0.5);
    double target = 0.35;
    double gain = 3.0;
    int batch_size = 50;
    bool frozen = false;
    long long batch_count = 0;
    int in_batch = 0;
    double batch_acc = 0.0;
    long long proposals = 0, accepts = 0;

    double step() const { return std::exp(log_step); }
    double acceptance_rate() const {
        return proposals > 0 ? static_cast<double>(accepts) / proposals : 0.0;
    }
    void adapt(double acc_prob) {
        if (frozen) return;
        batch_acc += acc_prob;
        if (++in_batch < batch_size) return;
        ++batch_count;
        log_step += gain * (batch_acc / batch_size - target) / static_cast<double>(batch_count);
        log_step = std::min(std::max(log_step, -12.0), 6.0);
        in_batch = 0;
        batch_acc = 0.0;
    }
};

/// One random-walk MH update on a transformed unconstrained scale with the
/// transform Jacobian in the acceptance ratio.
template <typename F>
inline std::pair<double, bool> rw_mh_update(double current, F&& log_target,
                                            const Transform& tr, RwScale& scale,
                                            RngStream& rng) {
    double z = tr.forward(current);
    double zp = z + scale.step() * rng.normal();
    double xp = tr.inverse(zp);
    double lp_prop = log_target(xp);
    double acc_prob;
    if (!std::isfinite(lp_prop)) {
        acc_prob = 0.0;
    } else {
        double lp_cur = log_target(current);
        double la = (lp_prop + tr.log_jacobian(xp)) - (lp_cur + tr.log_jacobian(current));
        acc_prob = std::isfinite(lp_cur) ? std::min(1.0, std::exp(std::min(la, 0.0))) : 1.0;
    }
    bool accepted = acc_prob >= 1.0 || rng.uniform() < acc_prob;
    ++scale.proposals;
    if (accepted) ++scale.accepts;
    scale.adapt(acc_prob);
    return {accepted ? xp : current, accepted};
}

} // namespace percontact

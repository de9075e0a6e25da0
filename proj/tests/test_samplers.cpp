#include <catch2/catch_amalgamated.hpp>

#include "percontact/samplers.hpp"
#include "support/oracles.hpp"

using namespace percontact;
using Catch::Approx;

namespace {

// Empirical CDF vs a grid-quadrature CDF of an unnormalized log density over
// a log-spaced grid; returns the Kolmogorov distance.
double ks_against_grid(const std::vector<double>& draws,
                       const std::function<double(double)>& logdens, double lo, double hi,
                       int cells = 40000) {
    std::vector<double> x(static_cast<std::size_t>(cells) + 1);
    double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i <= cells; ++i)
        x[static_cast<std::size_t>(i)] = std::exp(llo + (lhi - llo) * i / cells);
    std::vector<double> logw(static_cast<std::size_t>(cells));
    double best = kNegInf;
    for (int i = 0; i < cells; ++i) {
        std::size_t si = static_cast<std::size_t>(i);
        double mid = std::sqrt(x[si] * x[si + 1]);
        logw[si] = logdens(mid) + std::log(x[si + 1] - x[si]);
        best = std::max(best, logw[si]);
    }
    std::vector<double> cum(static_cast<std::size_t>(cells));
    double total = 0.0;
    for (int i = 0; i < cells; ++i) {
        total += std::exp(logw[static_cast<std::size_t>(i)] - best);
        cum[static_cast<std::size_t>(i)] = total;
    }
    for (auto& c : cum) c /= total;
    auto cdf = [&](double v) {
        if (v <= x.front()) return 0.0;
        if (v >= x.back()) return 1.0;
        auto it = std::upper_bound(x.begin(), x.end(), v);
        std::size_t idx = static_cast<std::size_t>(it - x.begin()) - 1;
        return cum[std::min(idx, cum.size() - 1)];
    };
    return oracle::ks_statistic(draws, cdf);
}

} // namespace

// ---------------------------------------------------------------------------
// sample_n

TEST_CASE("sample_n without infection is a shifted thinned Poisson") {
    RngStream rng(101);
    const double lambda = 0.4, l = 10.0, xi = 0.3;
    const long long m = 4;
    std::vector<double> draws(100000);
    for (auto& v : draws)
        v = static_cast<double>(sample_n(0, m, lambda, l, xi, 0.0, std::log(0.9), rng));
    auto mv = oracle::mean_var(draws);
    double want = m + lambda * l * (1.0 - xi); // log_q0 = 0: no thinning
    REQUIRE(std::fabs(mv.mean - want) < 3.0 * mv.se_mean);
}

TEST_CASE("sample_n with infection matches brute-force enumeration") {
    // a = lambda*l*(1-xi) = 2, m = 0, q0 = 0.9
    RngStream rng(103);
    const double a = 2.0, q0 = 0.9;
    std::vector<double> pmf(51, 0.0);
    double norm = 0.0, lf = 1.0;
    for (int n = 0; n <= 50; ++n) {
        if (n > 0) lf *= n;
        double w = std::pow(a, n) / lf * (1.0 - std::pow(q0, n));
        pmf[static_cast<std::size_t>(n)] = w;
        norm += w;
    }
    for (auto& p : pmf) p /= norm;
    std::vector<long long> draws(100000);
    for (auto& v : draws)
        v = sample_n(1, 0, 2.0, 1.0, 0.0, std::log(q0), std::log(0.5), rng);
    REQUIRE(oracle::chi2_pvalue_pmf(draws, pmf) > 0.001);
}

TEST_CASE("sample_n y=1 never returns zero when m is zero") {
    RngStream rng(104);
    for (int i = 0; i < 1000000; ++i)
        if (sample_n(1, 0, 2.0, 1.0, 0.0, std::log(0.9), std::log(0.5), rng) == 0)
            FAIL("drew n = 0 for an infected interval with m = 0");
    SUCCEED();
}

TEST_CASE("sample_n with infection, nonzero m fixture") {
    RngStream rng(107);
    const double a = 5.0, q0 = 0.95, q1 = 0.8;
    const long long m = 3;
    // enumeration of w_k proportional to a^k/k! (1 - q1^m q0^k), n = m + k
    std::vector<double> pmf_k(120, 0.0);
    double norm = 0.0, lf = 1.0;
    for (int k = 0; k < 120; ++k) {
        if (k > 0) lf *= k;
        double w = std::pow(a, k) / lf * (1.0 - std::pow(q1, m) * std::pow(q0, k));
        pmf_k[static_cast<std::size_t>(k)] = w;
        norm += w;
    }
    for (auto& p : pmf_k) p /= norm;
    std::vector<long long> draws(100000);
    for (auto& v : draws)
        v = sample_n(1, m, 1.0, 5.0, 0.0, std::log(q0), std::log(q1), rng) - m;
    REQUIRE(oracle::chi2_pvalue_pmf(draws, pmf_k) > 0.001);
}

TEST_CASE("sample_n with infection and non-infectious outside contacts") {
    // log_q0 = 0 with m >= 1 reduces to the plain shifted Poisson
    RngStream rng(109);
    const double a = 3.0;
    const long long m = 2;
    std::vector<double> pmf(80);
    for (int k = 0; k < 80; ++k)
        pmf[static_cast<std::size_t>(k)] = std::exp(poisson_logpmf(k, a));
    std::vector<long long> draws(100000);
    for (auto& v : draws)
        v = sample_n(1, m, 0.5, 6.0, 0.0, 0.0, std::log(0.9), rng) - m;
    REQUIRE(oracle::chi2_pvalue_pmf(draws, pmf) > 0.001);
}

TEST_CASE("sample_n rejects impossible configurations") {
    RngStream rng(113);
    REQUIRE_THROWS_AS(sample_n(1, 0, 1.0, 1.0, 0.0, 0.0, 0.0, rng), std::domain_error);
}

// ---------------------------------------------------------------------------
// sample_m

TEST_CASE("sample_m basics") {
    RngStream rng(127);
    // xi at the clamp floor: m = 0 almost surely
    for (int i = 0; i < 2000; ++i)
        REQUIRE(sample_m(0, 50, 1e-14, std::log(0.9), std::log(0.8), rng) == 0);
    // y = 0 with q0 = q1: thinning cancels, exact Binomial(n, xi)
    const long long n = 12;
    const double xi = 0.3;
    std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
    for (long long k = 0; k <= n; ++k)
        pmf[static_cast<std::size_t>(k)] = std::exp(binomial_logpmf(k, n, xi));
    std::vector<long long> draws(100000);
    for (auto& v : draws) v = sample_m(0, n, xi, std::log(0.7), std::log(0.7), rng);
    REQUIRE(oracle::chi2_pvalue_pmf(draws, pmf) > 0.001);
}

TEST_CASE("sample_m with infection matches the 6-point enumeration") {
    RngStream rng(131);
    const long long n = 5;
    const double xi = 0.4, q1 = 0.99, q0 = 0.95;
    std::vector<double> pmf(6);
    double norm = 0.0;
    for (long long m = 0; m <= n; ++m) {
        double w = std::exp(binomial_logpmf(m, n, xi)) *
                   (1.0 - std::pow(q1, static_cast<double>(m)) *
                              std::pow(q0, static_cast<double>(n - m)));
        pmf[static_cast<std::size_t>(m)] = w;
        norm += w;
    }
    for (auto& p : pmf) p /= norm;
    std::vector<long long> draws(100000);
    for (auto& v : draws) v = sample_m(1, n, xi, std::log(q0), std::log(q1), rng);
    REQUIRE(oracle::chi2_pvalue_pmf(draws, pmf) > 0.001);
    REQUIRE_THROWS_AS(sample_m(1, 0, 0.3, std::log(0.9), std::log(0.9), rng),
                      std::domain_error);
}

TEST_CASE("sample_m subtype generalization matches enumeration for each outcome") {
    RngStream rng(137);
    const long long n = 6;
    const double xi = 0.35, lqe = std::log(0.96), lqb = std::log(0.98);
    for (Subtype st : {Subtype::e, Subtype::b, Subtype::u}) {
        std::vector<double> pmf(static_cast<std::size_t>(n) + 1, 0.0);
        double norm = 0.0;
        for (long long m = 0; m <= n; ++m) {
            double qe_m = std::exp(m * lqe), qb_m = std::exp(m * lqb);
            double g;
            switch (st) {
                case Subtype::e: g = qb_m * (1.0 - qe_m); break;
                case Subtype::b: g = qe_m * (1.0 - qb_m); break;
                default: g = 1.0 - qe_m * qb_m; break;
            }
            double w = std::exp(binomial_logpmf(m, n, xi)) * g;
            pmf[static_cast<std::size_t>(m)] = w;
            norm += w;
        }
        for (auto& p : pmf) p /= norm;
        std::vector<long long> draws(100000);
        for (auto& v : draws) v = sample_m_subtype(st, n, xi, lqe, lqb, rng);
        REQUIRE(oracle::chi2_pvalue_pmf(draws, pmf) > 0.001);
        for (long long v : draws) {
            REQUIRE(v >= 1);
            REQUIRE(v <= n);
        }
    }
}

// ---------------------------------------------------------------------------
// conjugate draws

TEST_CASE("sample_delta draws the stated gamma") {
    RngStream rng(139);
    { // n~ = 0: mean is phi * (1 + phi/(lambda l))^-1
        const double phi = 1.66, lam = 0.4, l = 5.0;
        std::vector<double> d(100000);
        for (auto& v : d) v = sample_delta(0, lam, l, phi, rng);
        auto mv = oracle::mean_var(d);
        double want = phi / (1.0 + phi / (lam * l));
        REQUIRE(std::fabs(mv.mean - want) < 3.0 * mv.se_mean);
    }
    { // KS against the gamma CDF at (n~, phi, lambda l) = (3, 1.66, 2)
        const double phi = 1.66;
        std::vector<double> d(100000);
        for (auto& v : d) v = sample_delta(3, 0.4, 5.0, phi, rng);
        double shape = 3.0 + phi, scale = 1.0 / (1.0 + phi / 2.0);
        double ks = oracle::ks_statistic(
            d, [&](double t) { return gamma_cdf(t, shape, scale); });
        REQUIRE(ks < oracle::ks_critical(d.size(), 0.001));
    }
    { // phi -> infinity collapses the layer toward the Poisson-consistent mean
        const double phi = 1e6, lam = 0.4, l = 5.0;
        std::vector<double> d(20000);
        for (auto& v : d) v = sample_delta(3, lam, l, phi, rng);
        auto mv = oracle::mean_var(d);
        double want = (3.0 + phi) / (1.0 + phi / (lam * l)); // tends to lambda*l
        REQUIRE(std::fabs(want - lam * l) < 0.02);
        REQUIRE(std::fabs(mv.mean - want) < 3.0 * mv.se_mean);
    }
}

TEST_CASE("sample_mu single subject reduces to the plain normal") {
    RngStream rng(149);
    const double sigma2 = 0.8, loglam = -1.3;
    std::vector<MuStat> stats{{1, loglam}};
    std::vector<double> d(100000);
    for (auto& v : d) v = sample_mu(stats, sigma2, 0.0, rng);
    double ks = oracle::ks_statistic(d, [&](double t) {
        return normal_cdf((t - loglam) / std::sqrt(sigma2));
    });
    REQUIRE(ks < oracle::ks_critical(d.size(), 0.001));
}

TEST_CASE("sample_mu matches the weighted-average formula on a random fixture") {
    RngStream rng(151);
    std::vector<MuStat> stats;
    double num = 0.0, den = 0.0;
    const double sigma2 = 1.95, rho = 0.92;
    for (int i = 0; i < 12; ++i) {
        int t = 1 + static_cast<int>(rng.uniform() * 6.0);
        double sum = 0.0;
        for (int k = 0; k < t; ++k) sum += rng.normal(-2.5, 1.2);
        stats.emplace_back(t, sum);
        double w = 1.0 / (sigma2 * (1.0 - rho + t * rho));
        num += w * sum;
        den += w * t;
    }
    std::vector<double> d(100000);
    for (auto& v : d) v = sample_mu(stats, sigma2, rho, rng);
    auto mv = oracle::mean_var(d);
    REQUIRE(std::fabs(mv.mean - num / den) < 3.0 * mv.se_mean);
    REQUIRE(mv.var == Approx(1.0 / den).epsilon(0.05));
}

TEST_CASE("sample_sigma2 draws the stated inverse gamma") {
    RngStream rng(157);
    const double rho = 0.5, mu = -2.0;
    std::vector<Sigma2Stat> stats;
    double shape = 0.0, rate = 0.0;
    for (int i = 0; i < 8; ++i) {
        int t = 2 + static_cast<int>(rng.uniform() * 4.0);
        double sd = 0.0, sd2 = 0.0;
        for (int k = 0; k < t; ++k) {
            double d = rng.normal(mu, 1.0) - mu;
            sd += d;
            sd2 += d * d;
        }
        stats.emplace_back(t, sd, sd2);
        shape += 0.5 * t;
        rate += 0.5 * exch_quad_form(sd, sd2, t, 1.0 - rho, rho);
    }
    std::vector<double> d(100000);
    for (auto& v : d) v = sample_sigma2(stats, rho, rng);
    // CDF of 1/Gamma(shape, rate): P(X <= x) = Q(shape, rate/x)
    double ks = oracle::ks_statistic(d, [&](double t) { return gamma_q(shape, rate / t); });
    REQUIRE(ks < oracle::ks_critical(d.size(), 0.001));
    // truncation option clips the support
    for (int i = 0; i < 1000; ++i) {
        double v = sample_sigma2(stats, rho, rng, true, 0.5, 2.0);
        REQUIRE(v >= 0.5);
        REQUIRE(v <= 2.0);
    }
}

// ---------------------------------------------------------------------------
// lambda cross-proposal Metropolized independence sampling

TEST_CASE("lambda sampler is stationary for the T=1 over-dispersed conditional") {
    RngStream rng(163);
    RateHyper h;
    h.marginal = RateMarginal::lognormal;
    h.mu = -1.0;
    h.sigma2 = 0.8;
    h.rho = 0.0;
    h.phi = 1.66;
    std::vector<long long> n{3}, ntilde{2};
    std::vector<double> delta{2.5}, days{5.0};
    LambdaSubjectData d{n, ntilde, delta, days};

    std::vector<double> lam{0.5}, z;
    std::vector<double> draws;
    draws.reserve(100000);
    for (int it = 0; it < 100000; ++it) {
        sample_lambda_vec(lam, z, d, h, true, rng);
        draws.push_back(lam[0]);
    }
    auto logdens = [&](double v) {
        return normal_logpdf(std::log(v), h.mu, h.sigma2) - std::log(v) +
               3.0 * std::log(v) - v * 5.0 - h.phi * std::log(v) -
               h.phi * 2.5 / (5.0 * v);
    };
    REQUIRE(ks_against_grid(draws, logdens, 1e-6, 50.0) < 0.02);
}

TEST_CASE("lambda sampler is stationary without over-dispersion") {
    RngStream rng(167);
    RateHyper h;
    h.marginal = RateMarginal::lognormal;
    h.mu = -1.5;
    h.sigma2 = 1.2;
    h.rho = 0.0;
    std::vector<long long> n{3}, ntilde{2};
    std::vector<double> delta, days{5.0};
    LambdaSubjectData d{n, ntilde, delta, days};
    std::vector<double> lam{0.3}, z;
    std::vector<double> draws;
    draws.reserve(100000);
    for (int it = 0; it < 100000; ++it) {
        sample_lambda_vec(lam, z, d, h, false, rng);
        draws.push_back(lam[0]);
    }
    // conditional: log-normal prior times both Poisson count factors
    auto logdens = [&](double v) {
        return normal_logpdf(std::log(v), h.mu, h.sigma2) - std::log(v) +
               (3.0 + 2.0) * std::log(v) - 2.0 * v * 5.0;
    };
    REQUIRE(ks_against_grid(draws, logdens, 1e-6, 50.0) < 0.02);
}

TEST_CASE("lambda sampler is stationary under the gamma-copula marginal") {
    RngStream rng(173);
    RateHyper h;
    h.marginal = RateMarginal::gamma;
    h.alpha_lam = 0.24;
    h.beta_lam = 1.87;
    h.rho = 0.5; // must be irrelevant at T = 1
    std::vector<long long> n{4}, ntilde{3};
    std::vector<double> delta, days{6.0};
    LambdaSubjectData d{n, ntilde, delta, days};
    std::vector<double> lam{0.3}, z{rate_to_z(0.3, h.alpha_lam, h.beta_lam)};
    std::vector<double> draws;
    draws.reserve(100000);
    for (int it = 0; it < 100000; ++it) {
        sample_lambda_vec(lam, z, d, h, false, rng);
        draws.push_back(lam[0]);
    }
    auto logdens = [&](double v) {
        return gamma_logpdf(v, h.alpha_lam, h.beta_lam) + 7.0 * std::log(v) - 2.0 * v * 6.0;
    };
    REQUIRE(ks_against_grid(draws, logdens, 1e-8, 30.0) < 0.02);
}

TEST_CASE("lambda sampler matches a T=2 correlated conditional") {
    RngStream rng(179);
    RateHyper h;
    h.marginal = RateMarginal::lognormal;
    h.mu = -1.0;
    h.sigma2 = 0.7;
    h.rho = 0.8;
    std::vector<long long> n{2, 5}, ntilde{1, 4};
    std::vector<double> delta, days{4.0, 4.0};
    LambdaSubjectData d{n, ntilde, delta, days};
    std::vector<double> lam{0.4, 0.4}, z;
    std::vector<double> draws1;
    draws1.reserve(200000);
    for (int it = 0; it < 200000; ++it) {
        sample_lambda_vec(lam, z, d, h, false, rng);
        draws1.push_back(lam[0]);
    }
    // marginal of coordinate 1 from a 2-D grid of the joint conditional
    const int cells = 2000;
    std::vector<double> grid(cells + 1), mass1(static_cast<std::size_t>(cells), 0.0);
    double llo = std::log(1e-5), lhi = std::log(20.0);
    for (int i = 0; i <= cells; ++i)
        grid[static_cast<std::size_t>(i)] = std::exp(llo + (lhi - llo) * i / cells);
    auto joint = [&](double v1, double v2) {
        std::vector<double> vv{v1, v2};
        double lp = rate_vector_logpdf(vv, h);
        lp += (2.0 + 1.0) * std::log(v1) - 2.0 * v1 * 4.0;
        lp += (5.0 + 4.0) * std::log(v2) - 2.0 * v2 * 4.0;
        return lp;
    };
    double best = kNegInf;
    std::vector<std::vector<double>> cell(static_cast<std::size_t>(cells),
                                          std::vector<double>(static_cast<std::size_t>(cells)));
    for (int i = 0; i < cells; ++i)
        for (int j = 0; j < cells; ++j) {
            std::size_t si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
            double v1 = std::sqrt(grid[si] * grid[si + 1]);
            double v2 = std::sqrt(grid[sj] * grid[sj + 1]);
            cell[si][sj] = joint(v1, v2) + std::log(grid[si + 1] - grid[si]) +
                           std::log(grid[sj + 1] - grid[sj]);
            best = std::max(best, cell[si][sj]);
        }
    double total = 0.0;
    for (int i = 0; i < cells; ++i)
        for (int j = 0; j < cells; ++j) {
            double w = std::exp(cell[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] - best);
            mass1[static_cast<std::size_t>(i)] += w;
            total += w;
        }
    std::vector<double> cum(static_cast<std::size_t>(cells));
    double acc = 0.0;
    for (int i = 0; i < cells; ++i) {
        acc += mass1[static_cast<std::size_t>(i)];
        cum[static_cast<std::size_t>(i)] = acc / total;
    }
    auto cdf1 = [&](double v) {
        if (v <= grid.front()) return 0.0;
        if (v >= grid.back()) return 1.0;
        auto it = std::upper_bound(grid.begin(), grid.end(), v);
        std::size_t idx = static_cast<std::size_t>(it - grid.begin()) - 1;
        return cum[std::min(idx, cum.size() - 1)];
    };
    REQUIRE(oracle::ks_statistic(draws1, cdf1) < 0.03);
}

// ---------------------------------------------------------------------------
// (eps, xi) sampler

TEST_CASE("xi step accepts with probability one when gamma is zero") {
    RngStream rng(181);
    ProportionHyper h{0.4, 1.3, 0.0};
    std::vector<double> eps(3), xi(3);
    for (std::size_t t = 0; t < 3; ++t) {
        eps[t] = rng.normal();
        xi[t] = copula_forward(eps[t], h.alpha, h.beta);
    }
    std::vector<long long> mm{3, 0, 5}, nn{4, 6, 1};
    int accepted = 0;
    const int iters = 5000;
    for (int it = 0; it < iters; ++it) accepted += sample_epsilon_xi(eps, xi, mm, nn, h, rng)[1];
    REQUIRE(accepted == iters);
}

TEST_CASE("eps/xi sampler is conjugate-stationary at T = 1") {
    RngStream rng(191);
    ProportionHyper h{0.30, 0.29, 0.5}; // the correction vanishes at T = 1
    std::vector<double> eps{0.0}, xi{copula_forward(0.0, h.alpha, h.beta)};
    std::vector<long long> mm{4}, nn{9};
    std::vector<double> draws;
    draws.reserve(100000);
    for (int it = 0; it < 100000; ++it) {
        sample_epsilon_xi(eps, xi, mm, nn, h, rng);
        draws.push_back(xi[0]);
        // copula identity holds after every sweep
        if (it % 5000 == 0)
            REQUIRE(normal_cdf(eps[0]) == Approx(beta_cdf(xi[0], h.alpha, h.beta)).margin(1e-8));
    }
    double a_post = h.alpha + 4.0, b_post = h.beta + 9.0;
    double ks =
        oracle::ks_statistic(draws, [&](double t) { return beta_cdf(t, a_post, b_post); });
    REQUIRE(ks < 0.01);
}

TEST_CASE("eps/xi sampler matches a 2-D grid marginal with correlation") {
    RngStream rng(193);
    ProportionHyper h{0.8, 1.1, 0.6};
    std::vector<double> eps{0.0, 0.0};
    std::vector<double> xi{copula_forward(0.0, h.alpha, h.beta),
                           copula_forward(0.0, h.alpha, h.beta)};
    std::vector<long long> mm{3, 1}, nn{2, 6};
    std::vector<double> draws;
    draws.reserve(200000);
    for (int it = 0; it < 200000; ++it) {
        sample_epsilon_xi(eps, xi, mm, nn, h, rng);
        draws.push_back(eps[0]); // KS is invariant under the monotone map to xi
    }
    const int cells = 500;
    std::vector<double> grid(static_cast<std::size_t>(cells) + 1);
    for (int i = 0; i <= cells; ++i)
        grid[static_cast<std::size_t>(i)] = -7.0 + 14.0 * i / cells;
    auto logjoint = [&](double e1, double e2) {
        std::vector<double> ev{e1, e2};
        double lp = exch_gaussian_logpdf(ev, {2, 0.0, 1.0, h.gamma_corr});
        double x1 = copula_forward(e1, h.alpha, h.beta);
        double x2 = copula_forward(e2, h.alpha, h.beta);
        lp += mm[0] * std::log(x1) + nn[0] * std::log1p(-x1);
        lp += mm[1] * std::log(x2) + nn[1] * std::log1p(-x2);
        return lp;
    };
    std::vector<double> mass1(static_cast<std::size_t>(cells), 0.0);
    double best = kNegInf;
    std::vector<std::vector<double>> cell(static_cast<std::size_t>(cells),
                                          std::vector<double>(static_cast<std::size_t>(cells)));
    for (int i = 0; i < cells; ++i)
        for (int j = 0; j < cells; ++j) {
            std::size_t si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
            double e1 = 0.5 * (grid[si] + grid[si + 1]);
            double e2 = 0.5 * (grid[sj] + grid[sj + 1]);
            cell[si][sj] = logjoint(e1, e2);
            best = std::max(best, cell[si][sj]);
        }
    double total = 0.0;
    for (int i = 0; i < cells; ++i)
        for (int j = 0; j < cells; ++j) {
            double w = std::exp(cell[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] - best);
            mass1[static_cast<std::size_t>(i)] += w;
            total += w;
        }
    std::vector<double> cum(static_cast<std::size_t>(cells));
    double acc = 0.0;
    for (int i = 0; i < cells; ++i) {
        acc += mass1[static_cast<std::size_t>(i)];
        cum[static_cast<std::size_t>(i)] = acc / total;
    }
    auto cdf1 = [&](double v) {
        if (v <= grid.front()) return 0.0;
        if (v >= grid.back()) return 1.0;
        auto it = std::upper_bound(grid.begin(), grid.end(), v);
        std::size_t idx = static_cast<std::size_t>(it - grid.begin()) - 1;
        return cum[std::min(idx, cum.size() - 1)];
    };
    REQUIRE(oracle::ks_statistic(draws, cdf1) < 0.03);
}

// ---------------------------------------------------------------------------
// random-walk MH

TEST_CASE("rw update accepts everything on a flat target") {
    RngStream rng(197);
    RwScale sc;
    sc.frozen = true;
    double x = 0.0;
    int acc = 0;
    for (int i = 0; i < 10000; ++i) {
        auto [v, a] =
            rw_mh_update(x, [](double) { return 0.0; }, Transform::identity(), sc, rng);
        x = v;
        acc += a;
    }
    REQUIRE(acc == 10000);
}

TEST_CASE("rw update samples a standard normal") {
    RngStream rng(199);
    RwScale sc;
    Transform tr = Transform::identity();
    auto target = [](double v) { return -0.5 * v * v; };
    double x = 0.0;
    // one million updates; KS on a thinned subsequence to break autocorrelation
    std::vector<double> thinned;
    thinned.reserve(50000);
    for (int i = 0; i < 1000000; ++i) {
        x = rw_mh_update(x, target, tr, sc, rng).first;
        if (i >= 2000 && i % 20 == 0) thinned.push_back(x);
    }
    double ks = oracle::ks_statistic(thinned, [](double t) { return normal_cdf(t); });
    REQUIRE(ks < 1.2 * oracle::ks_critical(thinned.size(), 0.001));
}

TEST_CASE("rw update on transformed scales includes the jacobian") {
    RngStream rng(211);
    { // log scale, Gamma(1.66, 2) target
        RwScale sc;
        auto target = [](double v) { return gamma_logpdf(v, 1.66, 2.0); };
        double x = 1.0;
        std::vector<double> thinned;
        for (int i = 0; i < 400000; ++i) {
            x = rw_mh_update(x, target, Transform::log(), sc, rng).first;
            if (i >= 4000 && i % 10 == 0) thinned.push_back(x);
        }
        double ks =
            oracle::ks_statistic(thinned, [](double t) { return gamma_cdf(t, 1.66, 2.0); });
        REQUIRE(ks < 1.5 * oracle::ks_critical(thinned.size(), 0.001));
    }
    { // generalized logit on (a, b), beta target truncated to the window
        RwScale sc;
        const double a = 0.1, b = 0.8;
        auto target = [&](double v) {
            if (v <= a || v >= b) return kNegInf;
            return beta_logpdf(v, 2.0, 3.0);
        };
        double x = 0.4;
        std::vector<double> thinned;
        for (int i = 0; i < 400000; ++i) {
            x = rw_mh_update(x, target, Transform::logit_in(a, b), sc, rng).first;
            if (i >= 4000 && i % 10 == 0) thinned.push_back(x);
        }
        double z_a = beta_cdf(a, 2.0, 3.0), z_b = beta_cdf(b, 2.0, 3.0);
        double ks = oracle::ks_statistic(thinned, [&](double t) {
            return (beta_cdf(std::min(std::max(t, a), b), 2.0, 3.0) - z_a) / (z_b - z_a);
        });
        REQUIRE(ks < 1.5 * oracle::ks_critical(thinned.size(), 0.001));
    }
}

TEST_CASE("adaptation reaches the target acceptance window and then freezes") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        RngStream rng(seed * 7919);
        RwScale sc;
        sc.log_step = std::log(0.05); // deliberately poor start
        auto target = [](double v) { return -0.5 * v * v; };
        double x = 0.0;
        for (int i = 0; i < 5000; ++i)
            x = rw_mh_update(x, target, Transform::identity(), sc, rng).first;
        sc.frozen = true;
        long long p0 = sc.proposals, a0 = sc.accepts;
        for (int i = 0; i < 5000; ++i)
            x = rw_mh_update(x, target, Transform::identity(), sc, rng).first;
        double post_rate =
            static_cast<double>(sc.accepts - a0) / static_cast<double>(sc.proposals - p0);
        REQUIRE(post_rate > 0.25);
        REQUIRE(post_rate < 0.45);
    }
}

TEST_CASE("samplers are deterministic given the stream seed") {
    auto run = [] {
        RngStream rng(8888);
        std::vector<double> out;
        for (int i = 0; i < 50; ++i)
            out.push_back(static_cast<double>(
                sample_n(1, 2, 0.9, 4.0, 0.2, std::log(0.97), std::log(0.9), rng)));
        std::vector<double> lam{0.5}, z;
        std::vector<long long> n{3}, ntilde{2};
        std::vector<double> delta{2.5}, days{5.0};
        RateHyper h;
        h.mu = -1.0;
        h.sigma2 = 0.8;
        h.phi = 1.66;
        for (int i = 0; i < 50; ++i) {
            sample_lambda_vec(lam, z, {n, ntilde, delta, days}, h, true, rng);
            out.push_back(lam[0]);
        }
        return out;
    };
    REQUIRE(run() == run());
}

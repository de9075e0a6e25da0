#pragma once
// Multi-chain orchestration: per-chain Gibbs-within-Metropolis sweeps in the
// fixed order (latents subject-by-subject, then globals), burn-in after the
// proposal scales freeze, scale-reduction checks every block, and the
// random-chain summary mixing protocol.

#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "percontact/config.hpp"
#include "percontact/data.hpp"
#include "percontact/diagnostics.hpp"
#include "percontact/posterior.hpp"
#include "percontact/samplers.hpp"

namespace percontact {

namespace detail {
inline std::string fmt_double(double v, const char* spec = "%.17g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}
} // namespace detail

// ---------------------------------------------------------------------------
// Global-parameter registry

struct GlobalParamRef {
    std::string name;
    double* ptr = nullptr;
    bool rw = false;          // updated by random-walk MH (vs conjugate draw)
    Transform transform;
    bool fixed = false;
};

/// Names and storage slots of every sampled global, in update order.
inline std::vector<GlobalParamRef> build_registry(Params& par, const ModelConfig& cfg,
                                                  const std::vector<std::string>& strata) {
    std::vector<GlobalParamRef> reg;
    const int s_count = cfg.risk_stratified ? static_cast<int>(strata.size()) : 1;
    const int y_count = cfg.n_subtypes();
    const int g_count = cfg.n_hyper_groups();
    auto gsuf = [&](int g) { return g_count == 1 ? std::string() : "_inc" + std::to_string(g); };
    auto rsuf = [&](int s, int y) {
        std::string out;
        if (y_count == 2) out += (y == 0 ? "_e" : "_b");
        if (s_count > 1) out += "_" + strata[static_cast<std::size_t>(s)];
        return out;
    };

    for (int g = 0; g < g_count; ++g) {
        if (cfg.marginal == RateMarginal::lognormal) {
            reg.push_back({"mu" + gsuf(g), &par.mu[g], false, Transform::identity(), false});
            reg.push_back({"sigma2" + gsuf(g), &par.sigma2[g], false, Transform::identity(), false});
        } else {
            reg.push_back({"alpha_lambda" + gsuf(g), &par.alpha_lam[g], true, Transform::log(), false});
            reg.push_back({"beta_lambda" + gsuf(g), &par.beta_lam[g], true, Transform::log(), false});
        }
    }
    reg.push_back({"rho", &par.rho, true, Transform::logit(), false});
    if (cfg.overdispersion)
        reg.push_back({"phi", &par.phi, true, Transform::log(), false});
    for (int g = 0; g < g_count; ++g) {
        reg.push_back({"alpha" + gsuf(g), &par.alpha[g], true, Transform::log(), false});
        reg.push_back({"beta" + gsuf(g), &par.beta[g], true, Transform::log(), false});
    }
    reg.push_back({"gamma", &par.gamma_corr, true, Transform::logit(), false});

    Transform p0_tr = cfg.priors.p0.type == P0Prior::Type::uniform
                          ? Transform::logit_in(cfg.priors.p0.a, cfg.priors.p0.b)
                          : Transform::logit();
    for (int s = 0; s < s_count; ++s)
        for (int y = 0; y < y_count; ++y)
            reg.push_back({"p0" + rsuf(s, y), &par.p0[par.reg_index(s, y, y_count)], true,
                           p0_tr, false});
    for (int s = 0; s < s_count; ++s)
        for (int y = 0; y < y_count; ++y)
            reg.push_back({"theta_v" + rsuf(s, y), &par.theta_v[par.reg_index(s, y, y_count)],
                           true, Transform::identity(), false});
    reg.push_back({cfg.design == Design::vax004 ? "theta_con" : "theta_inc", &par.theta_x,
                   true, Transform::identity(), false});
    return reg;
}

// ---------------------------------------------------------------------------
// Chain output and report

struct ChainOutput {
    std::uint64_t seed = 0;
    long long iterations = 0; // retained post-burn-in draws
    std::vector<std::string> param_names;
    std::vector<std::vector<double>> draws; // [param][iteration]
    std::vector<std::pair<std::string, double>> acceptance;
};

struct RhatCheck {
    long long at_iteration = 0;
    std::vector<double> sqrt_r_hat; // per monitored parameter
};

struct Report {
    std::vector<std::uint64_t> chain_seeds;
    std::uint64_t mix_seed = 0;
    std::vector<std::string> monitored;
    std::vector<RhatCheck> rhat_trajectory;
    std::vector<double> final_b, final_w;
    bool converged = false;
    bool rhat_rule_enabled = true;
    long long warmup_iters = 0, retained_iters = 0;
    long long dropped_post_infection = 0;

    std::string render(const std::vector<ChainOutput>& chains) const;
};

struct InferenceResult {
    std::vector<ChainOutput> chains;
    PosteriorSummary summary;
    Report report;
    bool converged = false;
    // Joint mixed sample used for the summaries: [param][position].
    std::vector<std::string> mixed_names;
    std::vector<std::vector<double>> mixed_draws;
};

// ---------------------------------------------------------------------------
// Derived summary quantities, defined over draw names so the same machinery
// serves a live run and a summarize pass over stored draw files.

struct DerivedDef {
    enum class Kind { ve, or_exp, mean_rate_lognormal, mean_rate_gamma, mean_prop, ratio_eb };
    Kind kind;
    std::string name;
    int i1 = -1, i2 = -1;

    double eval(const std::vector<double>& row) const {
        switch (kind) {
            case Kind::ve: return -std::expm1(row[i1]);
            case Kind::or_exp: return std::exp(row[i1]);
            case Kind::mean_rate_lognormal: return std::exp(row[i1] + 0.5 * row[i2]);
            case Kind::mean_rate_gamma: return row[i1] * row[i2];
            case Kind::mean_prop: return row[i1] / (row[i1] + row[i2]);
            case Kind::ratio_eb: return row[i1] / row[i2];
        }
        return 0.0;
    }
};

inline std::vector<DerivedDef> derive_definitions(const std::vector<std::string>& names) {
    auto idx = [&](const std::string& n) {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == n) return static_cast<int>(i);
        return -1;
    };
    std::vector<DerivedDef> defs;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const std::string& n = names[i];
        if (n.rfind("theta_v", 0) == 0)
            defs.push_back({DerivedDef::Kind::ve, "VE" + n.substr(7), static_cast<int>(i), -1});
        else if (n == "theta_con")
            defs.push_back({DerivedDef::Kind::or_exp, "OR_con", static_cast<int>(i), -1});
        else if (n == "theta_inc")
            defs.push_back({DerivedDef::Kind::or_exp, "OR_inc", static_cast<int>(i), -1});
        else if (n.rfind("mu", 0) == 0 && n.find("lambda") == std::string::npos) {
            int j = idx("sigma2" + n.substr(2));
            if (j >= 0)
                defs.push_back({DerivedDef::Kind::mean_rate_lognormal,
                                "mean_rate" + n.substr(2), static_cast<int>(i), j});
        } else if (n.rfind("alpha_lambda", 0) == 0) {
            int j = idx("beta_lambda" + n.substr(12));
            if (j >= 0)
                defs.push_back({DerivedDef::Kind::mean_rate_gamma, "mean_rate" + n.substr(12),
                                static_cast<int>(i), j});
        } else if (n.rfind("alpha", 0) == 0 && n.rfind("alpha_lambda", 0) != 0) {
            int j = idx("beta" + n.substr(5));
            if (j >= 0)
                defs.push_back({DerivedDef::Kind::mean_prop, "mean_prop" + n.substr(5),
                                static_cast<int>(i), j});
        } else if (n.rfind("p0_e", 0) == 0) {
            std::string suffix = n.substr(4);
            int j = idx("p0_b" + suffix);
            if (j >= 0)
                defs.push_back({DerivedDef::Kind::ratio_eb, "p0_E/B" + suffix,
                                static_cast<int>(i), j});
        }
    }
    return defs;
}

/// Posterior summary over the last `window` draws of each chain, read by
/// looping positions and picking a uniformly random chain at each loop.
/// Derived quantities are evaluated per joint draw. Also returns the mixed
/// sample (raw parameters only).
inline std::pair<PosteriorSummary, std::vector<std::vector<double>>>
summarize(const std::vector<std::string>& names,
          const std::vector<const std::vector<std::vector<double>>*>& chain_draws,
          long long window, RngStream& mix_rng) {
    const std::size_t p_count = names.size();
    const std::size_t c_count = chain_draws.size();
    if (c_count == 0 || p_count == 0) throw std::invalid_argument("summarize: empty input");
    long long len = static_cast<long long>((*chain_draws[0])[0].size());
    for (const auto* cd : chain_draws)
        for (const auto& col : *cd)
            if (static_cast<long long>(col.size()) != len)
                throw std::invalid_argument("summarize: unequal draw counts");
    const long long l_used = std::min(window, len);

    std::vector<std::vector<double>> mixed(p_count,
                                           std::vector<double>(static_cast<std::size_t>(l_used)));
    std::vector<double> row(p_count);
    auto defs = derive_definitions(names);
    std::vector<std::vector<double>> derived(defs.size(),
                                             std::vector<double>(static_cast<std::size_t>(l_used)));
    for (long long j = 0; j < l_used; ++j) {
        std::size_t c = static_cast<std::size_t>(mix_rng.uniform() * static_cast<double>(c_count));
        if (c >= c_count) c = c_count - 1;
        const long long pos = len - l_used + j;
        for (std::size_t p = 0; p < p_count; ++p) {
            row[p] = (*chain_draws[c])[p][static_cast<std::size_t>(pos)];
            mixed[p][static_cast<std::size_t>(j)] = row[p];
        }
        for (std::size_t k = 0; k < defs.size(); ++k)
            derived[k][static_cast<std::size_t>(j)] = defs[k].eval(row);
    }

    PosteriorSummary summary;
    for (std::size_t p = 0; p < p_count; ++p)
        summary.rows.push_back(summarize_draws(names[p], mixed[p]));
    for (std::size_t k = 0; k < defs.size(); ++k)
        summary.rows.push_back(summarize_draws(defs[k].name, derived[k]));
    return {std::move(summary), std::move(mixed)};
}

// ---------------------------------------------------------------------------
// Per-chain state and sweep

class ChainRunner {
public:
    ChainRunner(const Dataset& data, const ModelConfig& mcfg, const RunConfig& rcfg,
                int chain_index, const LatentState* pinned)
        : data_(data), mcfg_(mcfg), rcfg_(rcfg), chain_(chain_index) {
        const int y_count = mcfg.n_subtypes();
        const int s_count = mcfg.risk_stratified
                                ? static_cast<int>(data.stratum_labels.size()) : 1;
        const int g_count = mcfg.n_hyper_groups();
        par_.p0.assign(static_cast<std::size_t>(s_count * y_count), 0.01);
        par_.theta_v.assign(static_cast<std::size_t>(s_count * y_count), 0.0);
        par_.mu.assign(static_cast<std::size_t>(g_count), 0.0);
        par_.sigma2.assign(static_cast<std::size_t>(g_count), 1.0);
        par_.alpha_lam.assign(static_cast<std::size_t>(g_count), 1.0);
        par_.beta_lam.assign(static_cast<std::size_t>(g_count), 1.0);
        par_.alpha.assign(static_cast<std::size_t>(g_count), 1.0);
        par_.beta.assign(static_cast<std::size_t>(g_count), 1.0);
        registry_ = build_registry(par_, mcfg_, data.stratum_labels);
        scales_.assign(registry_.size(), RwScale{});
        seed_ = RngStream::derive(rcfg.seed, 0x5eedULL, static_cast<std::uint64_t>(chain_index))
                    .next_u64();
        global_rng_.reseed(seed_);
        subj_rng_.reserve(data.subjects.size());
        for (std::size_t i = 0; i < data.subjects.size(); ++i)
            subj_rng_.push_back(RngStream::derive(rcfg.seed,
                                                  static_cast<std::uint64_t>(chain_index) + 1,
                                                  i + 1));
        init_params();
        if (pinned) {
            state_ = *pinned;
            sync_copula_caches();
        } else {
            init_latents();
        }
        apply_fixed();
    }

    const std::vector<GlobalParamRef>& registry() const { return registry_; }
    const Params& params() const { return par_; }
    Params& params() { return par_; }
    const LatentState& latents() const { return state_; }
    std::uint64_t seed() const { return seed_; }

    void freeze_scales() {
        for (auto& s : scales_) s.frozen = true;
    }

    void run_block(long long iters, bool record,
                   const std::vector<std::pair<int, int>>& lambda_monitor,
                   std::vector<std::vector<double>>* out) {
        for (long long it = 0; it < iters; ++it) {
            sweep();
            if (record) {
                std::size_t col = 0;
                for (const auto& ref : registry_)
                    (*out)[col++].push_back(*ref.ptr);
                for (auto [i, t] : lambda_monitor)
                    (*out)[col++].push_back(state_.subj[static_cast<std::size_t>(i)]
                                                .lambda[static_cast<std::size_t>(t)]);
            }
        }
    }

    std::vector<std::pair<std::string, double>> acceptance_rates() const {
        std::vector<std::pair<std::string, double>> out;
        for (std::size_t k = 0; k < registry_.size(); ++k)
            if (registry_[k].rw && !registry_[k].fixed)
                out.emplace_back(registry_[k].name, scales_[k].acceptance_rate());
        auto rate = [](const std::pair<long long, long long>& c) {
            return c.second > 0 ? static_cast<double>(c.first) / c.second : 0.0;
        };
        out.emplace_back("lambda_prior_step", rate(lam_acc_[0]));
        out.emplace_back("lambda_count_step", rate(lam_acc_[1]));
        if (mcfg_.overdispersion) out.emplace_back("lambda_delta_step", rate(lam_acc_[2]));
        out.emplace_back("eps_step", rate(eps_acc_[0]));
        out.emplace_back("xi_step", rate(eps_acc_[1]));
        return out;
    }

    double joint_log_posterior_now() const {
        return joint_log_posterior(data_, state_, par_, mcfg_);
    }

private:
    void apply_fixed() {
        for (auto& ref : registry_) {
            auto it = rcfg_.fixed_params.find(ref.name);
            if (it != rcfg_.fixed_params.end()) {
                *ref.ptr = it->second;
                ref.fixed = true;
            }
        }
        sync_copula_caches();
    }

    // Keep xi and rate_z consistent with eps/lambda under current shapes.
    void sync_copula_caches() {
        for (std::size_t i = 0; i < state_.subj.size(); ++i) {
            auto& lat = state_.subj[i];
            const int g = group_of(data_.subjects[i]);
            for (std::size_t t = 0; t < lat.eps.size(); ++t)
                lat.xi[t] = copula_forward(lat.eps[t], par_.alpha[g], par_.beta[g],
                                           lat.xi.empty() ? -1.0 : lat.xi[t]);
            if (mcfg_.marginal == RateMarginal::gamma) {
                lat.rate_z.resize(lat.lambda.size());
                for (std::size_t t = 0; t < lat.lambda.size(); ++t)
                    lat.rate_z[t] = rate_to_z(lat.lambda[t], par_.alpha_lam[g],
                                              par_.beta_lam[g]);
            }
        }
    }

    int group_of(const SubjectObs& s) const {
        return mcfg_.incarceration_stratified ? s.incarceration : 0;
    }

    void init_params() {
        RngStream& rng = global_rng_;
        // crude data moments drive the starting points; per-chain jitter makes
        // the three initializations overdispersed
        double tot_n = 0.0, tot_m = 0.0, tot_days = 0.0;
        long long infections = 0;
        std::vector<double> log_rates;
        for (const auto& s : data_.subjects) {
            double sn = 0.0, sl = 0.0;
            for (const auto& iv : s.intervals) {
                sn += static_cast<double>(iv.n_rep);
                sl += iv.days;
                tot_m += static_cast<double>(iv.m_rep);
                infections += iv.infected;
            }
            tot_n += sn;
            tot_days += sl;
            log_rates.push_back(std::log((sn + 0.5) / sl));
        }
        double mean_lr = 0.0;
        for (double v : log_rates) mean_lr += v;
        mean_lr /= std::max<std::size_t>(1, log_rates.size());
        double var_lr = 0.0;
        for (double v : log_rates) var_lr += (v - mean_lr) * (v - mean_lr);
        var_lr = std::max(0.1, var_lr / std::max<std::size_t>(1, log_rates.size()));
        double mean_rate = tot_n / std::max(1.0, tot_days);
        double prop_hat = std::min(0.98, std::max(0.02, tot_m / std::max(1.0, tot_n)));

        const int g_count = mcfg_.n_hyper_groups();
        for (int g = 0; g < g_count; ++g) {
            par_.mu[g] = rng.normal(mean_lr, 0.3);
            par_.sigma2[g] = std::min(50.0, std::max(0.05, var_lr * std::exp(rng.normal(0.0, 0.6))));
            double shape = std::min(20.0, std::max(0.05, std::exp(rng.normal(std::log(0.5), 0.5))));
            par_.alpha_lam[g] = shape;
            par_.beta_lam[g] = std::max(1e-4, mean_rate / shape) * std::exp(rng.normal(0.0, 0.4));
            double a0 = std::exp(rng.uniform(std::log(0.2), std::log(2.0)));
            par_.alpha[g] = a0;
            par_.beta[g] = std::min(100.0, std::max(0.05, a0 * (1.0 - prop_hat) / prop_hat));
        }
        par_.rho = rng.uniform(0.15, 0.85);
        par_.gamma_corr = rng.uniform(0.15, 0.85);
        par_.phi = std::exp(rng.normal(std::log(2.0), 0.7));

        double pi_eff = mcfg_.subtype ? mcfg_.prevalence.pi_e + mcfg_.prevalence.pi_b
                                      : mcfg_.prevalence.pi;
        double exposure = mcfg_.design == Design::vax004 ? tot_n : std::max(tot_m, 1.0);
        double p_hat = (infections + 1.0) / (pi_eff * exposure + 1.0);
        const auto& pp = mcfg_.priors.p0;
        double lo = pp.type == P0Prior::Type::uniform ? pp.a * 1.5 : 1e-4;
        double hi = pp.type == P0Prior::Type::uniform ? pp.b * 0.7 : 0.5;
        for (auto& v : par_.p0) {
            double cand = p_hat * std::exp(rng.normal(0.0, 0.4));
            v = std::min(hi, std::max(lo, cand));
        }
        for (auto& v : par_.theta_v) v = rng.normal(0.0, 0.3);
        par_.theta_x = rng.normal(0.0, 0.3);
    }

    void init_latents() {
        state_.subj.assign(data_.subjects.size(), SubjectLatents{});
        for (std::size_t i = 0; i < data_.subjects.size(); ++i) {
            const auto& s = data_.subjects[i];
            auto& lat = state_.subj[i];
            RngStream& rng = subj_rng_[i];
            const std::size_t t_len = s.intervals.size();
            const int g = group_of(s);
            lat.n.resize(t_len);
            lat.m.resize(t_len);
            lat.lambda.resize(t_len);
            lat.eps.resize(t_len);
            lat.xi.resize(t_len);
            if (mcfg_.overdispersion) lat.delta.resize(t_len);
            const bool need_m1 = mcfg_.design == Design::vax003;
            for (std::size_t t = 0; t < t_len; ++t) {
                const auto& iv = s.intervals[t];
                lat.n[t] = std::max<long long>(iv.n_rep, iv.infected ? 1 : 0);
                if (mcfg_.overdispersion)
                    lat.delta[t] = std::max<double>(static_cast<double>(iv.n_rep), 0.5);
                lat.lambda[t] = (static_cast<double>(lat.n[t]) + 0.5) / iv.days *
                                std::exp(rng.normal(0.0, 0.2));
                double xi0 = std::min(0.98, std::max(0.02, (iv.m_rep + 0.5) / (iv.n_rep + 1.0)));
                lat.eps[t] = copula_inverse(xi0, par_.alpha[g], par_.beta[g]);
                lat.xi[t] = copula_forward(lat.eps[t], par_.alpha[g], par_.beta[g], xi0);
                long long m0 = std::llround(lat.xi[t] * static_cast<double>(lat.n[t]));
                if (iv.infected && need_m1) m0 = std::max<long long>(m0, 1);
                lat.m[t] = std::min(lat.n[t], std::max<long long>(m0, 0));
            }
            if (mcfg_.marginal == RateMarginal::gamma) {
                lat.rate_z.resize(t_len);
                for (std::size_t t = 0; t < t_len; ++t)
                    lat.rate_z[t] = rate_to_z(lat.lambda[t], par_.alpha_lam[g],
                                              par_.beta_lam[g]);
            }
        }
    }

    // ------------------------------------------------------------------
    // One full sweep: latents subject-by-subject, then globals.

    void sweep() {
        if (!rcfg_.fix_latents) sweep_latents();
        sweep_globals();
    }

    void sweep_latents() {
        std::vector<long long> mm, nn;
        for (std::size_t i = 0; i < data_.subjects.size(); ++i) {
            const auto& s = data_.subjects[i];
            auto& lat = state_.subj[i];
            RngStream& rng = subj_rng_[i];
            const int g = group_of(s);
            const ContactEscape q = contact_escape(s, par_, mcfg_);
            const std::size_t t_len = s.intervals.size();

            for (std::size_t t = 0; t < t_len; ++t) {
                const auto& iv = s.intervals[t];
                // n given m: in the subtype model the outcome factor depends
                // only on m, so both outcomes reduce to the shifted Poisson
                if (mcfg_.subtype)
                    lat.n[t] = sample_n(0, lat.m[t], lat.lambda[t], iv.days, lat.xi[t],
                                        0.0, q.log_q1, rng);
                else
                    lat.n[t] = sample_n(iv.infected, lat.m[t], lat.lambda[t], iv.days,
                                        lat.xi[t], q.log_q0, q.log_q1, rng);
                // m given n
                if (mcfg_.subtype && iv.infected)
                    lat.m[t] = sample_m_subtype(iv.subtype, lat.n[t], lat.xi[t],
                                                q.log_q1_e, q.log_q1_b, rng);
                else
                    lat.m[t] = sample_m(mcfg_.subtype ? 0 : iv.infected, lat.n[t],
                                        lat.xi[t], q.log_q0, q.log_q1, rng);
                if (mcfg_.overdispersion)
                    lat.delta[t] = sample_delta(iv.n_rep, lat.lambda[t], iv.days, par_.phi,
                                                rng);
            }

            n_scratch_.resize(t_len);
            days_scratch_.resize(t_len);
            ntilde_scratch_.resize(t_len);
            for (std::size_t t = 0; t < t_len; ++t) {
                n_scratch_[t] = lat.n[t];
                ntilde_scratch_[t] = s.intervals[t].n_rep;
                days_scratch_[t] = s.intervals[t].days;
            }
            LambdaSubjectData ld{n_scratch_, ntilde_scratch_, lat.delta, days_scratch_};
            auto lam_acc = sample_lambda_vec(lat.lambda, lat.rate_z, ld,
                                             make_rate_hyper(par_, g, mcfg_),
                                             mcfg_.overdispersion, rng);
            for (int k = 0; k < 3; ++k) {
                lam_acc_[static_cast<std::size_t>(k)].first += lam_acc[static_cast<std::size_t>(k)];
                lam_acc_[static_cast<std::size_t>(k)].second += 1;
            }

            mm.resize(t_len);
            nn.resize(t_len);
            for (std::size_t t = 0; t < t_len; ++t) {
                const auto& iv = s.intervals[t];
                mm[t] = lat.m[t] + iv.m_rep;
                nn[t] = (lat.n[t] - lat.m[t]) + (iv.n_rep - iv.m_rep);
            }
            auto e_acc = sample_epsilon_xi(lat.eps, lat.xi, mm, nn, make_prop_hyper(par_, g),
                                           rng);
            for (int k = 0; k < 2; ++k) {
                eps_acc_[static_cast<std::size_t>(k)].first += e_acc[static_cast<std::size_t>(k)];
                eps_acc_[static_cast<std::size_t>(k)].second += 1;
            }
        }
    }

    std::size_t reg_index_of(const std::string& name) const {
        for (std::size_t k = 0; k < registry_.size(); ++k)
            if (registry_[k].name == name) return k;
        throw std::logic_error("registry lookup failed: " + name);
    }

    void sweep_globals() {
        const int g_count = mcfg_.n_hyper_groups();
        // mu, sigma2 (log-normal marginal) or the gamma marginal shapes
        for (int g = 0; g < g_count; ++g) {
            if (mcfg_.marginal == RateMarginal::lognormal) {
                update_mu_sigma2(g);
            } else {
                update_rate_shape_scale(g);
            }
        }
        update_rw("rho", [&](double r) {
            if (!(r >= 0.0 && r < 1.0)) return kNegInf;
            return log_prior_unit(r) + rate_corr_loglik(r);
        });
        if (mcfg_.overdispersion)
            update_rw("phi", [&](double f) {
                if (!(f > 0.0)) return kNegInf;
                double lp = log_prior_phi(f);
                if (!std::isfinite(lp)) return kNegInf;
                for (std::size_t i = 0; i < data_.subjects.size(); ++i) {
                    const auto& lat = state_.subj[i];
                    const auto& ivs = data_.subjects[i].intervals;
                    for (std::size_t t = 0; t < ivs.size(); ++t)
                        lp += gamma_logpdf(lat.delta[t], f, lat.lambda[t] * ivs[t].days / f);
                }
                return lp;
            });
        for (int g = 0; g < g_count; ++g) update_alpha_beta(g);
        update_rw("gamma", [&](double gc) {
            if (!(gc >= 0.0 && gc < 1.0)) return kNegInf;
            double lp = 0.0;
            for (const auto& lat : state_.subj)
                lp += exch_gaussian_logpdf(lat.eps,
                                           {static_cast<int>(lat.eps.size()), 0.0, 1.0, gc});
            return lp;
        });
        // p0 entries, then theta entries
        for (const auto& ref : registry_) {
            if (ref.name.rfind("p0", 0) == 0)
                update_regression_param(ref.name, PriorParam::p0);
        }
        for (const auto& ref : registry_) {
            if (ref.name.rfind("theta_v", 0) == 0)
                update_regression_param(ref.name, PriorParam::theta_v);
        }
        update_regression_param(mcfg_.design == Design::vax004 ? "theta_con" : "theta_inc",
                                PriorParam::theta_x);
    }

    template <typename F>
    void update_rw(const std::string& name, F&& target) {
        std::size_t k = reg_index_of(name);
        auto& ref = registry_[k];
        if (ref.fixed) return;
        auto [val, acc] = rw_mh_update(*ref.ptr, target, ref.transform, scales_[k],
                                       global_rng_);
        (void)acc;
        *ref.ptr = val;
    }

    void update_mu_sigma2(int g) {
        std::vector<MuStat> mu_stats;
        for (std::size_t i = 0; i < data_.subjects.size(); ++i) {
            if (group_of(data_.subjects[i]) != g) continue;
            const auto& lam = state_.subj[i].lambda;
            double s = 0.0;
            for (double v : lam) s += std::log(v);
            mu_stats.emplace_back(static_cast<int>(lam.size()), s);
        }
        if (mu_stats.empty()) return;
        std::string suf = g_suffix(g);
        std::size_t kmu = reg_index_of("mu" + suf);
        if (!registry_[kmu].fixed)
            par_.mu[g] = sample_mu(mu_stats, par_.sigma2[g], par_.rho, global_rng_);
        std::size_t ks = reg_index_of("sigma2" + suf);
        if (!registry_[ks].fixed) {
            std::vector<Sigma2Stat> s2_stats;
            for (std::size_t i = 0; i < data_.subjects.size(); ++i) {
                if (group_of(data_.subjects[i]) != g) continue;
                const auto& lam = state_.subj[i].lambda;
                double sd = 0.0, sd2 = 0.0;
                for (double v : lam) {
                    double d = std::log(v) - par_.mu[g];
                    sd += d;
                    sd2 += d * d;
                }
                s2_stats.emplace_back(static_cast<int>(lam.size()), sd, sd2);
            }
            par_.sigma2[g] = sample_sigma2(s2_stats, par_.rho, global_rng_,
                                           mcfg_.priors.sigma2_truncate,
                                           mcfg_.priors.sigma2_lo, mcfg_.priors.sigma2_hi);
        }
    }

    std::string g_suffix(int g) const {
        return mcfg_.n_hyper_groups() == 1 ? std::string() : "_inc" + std::to_string(g);
    }

    // Gamma-marginal rate hyperparameters: RW on log scale. A proposal moves
    // the marginal, so the copula coordinates z are recomputed for the
    // affected subjects; accepted proposals commit the new coordinates.
    void update_rate_shape_scale(int g) {
        for (int which = 0; which < 2; ++which) {
            std::string name = (which == 0 ? "alpha_lambda" : "beta_lambda") + g_suffix(g);
            std::size_t k = reg_index_of(name);
            auto& ref = registry_[k];
            if (ref.fixed) continue;
            double cur = *ref.ptr;
            double z = ref.transform.forward(cur);
            double cand = ref.transform.inverse(z + scales_[k].step() * global_rng_.normal());
            double a_cur = par_.alpha_lam[g], b_cur = par_.beta_lam[g];
            double a_new = which == 0 ? cand : a_cur;
            double b_new = which == 0 ? b_cur : cand;
            double lp_prop = which == 0 ? log_prior_rate_shape(cand)
                                        : log_prior_rate_scale(cand);
            double lp_cur = which == 0 ? log_prior_rate_shape(cur) : log_prior_rate_scale(cur);
            double acc_prob = 0.0;
            if (std::isfinite(lp_prop)) {
                double lik_prop = 0.0, lik_cur = 0.0;
                z_scratch_.clear();
                RateHyper h_new{RateMarginal::gamma, 0.0, 1.0, a_new, b_new, par_.rho,
                                par_.phi};
                RateHyper h_cur{RateMarginal::gamma, 0.0, 1.0, a_cur, b_cur, par_.rho,
                                par_.phi};
                for (std::size_t i = 0; i < data_.subjects.size(); ++i) {
                    if (group_of(data_.subjects[i]) != g) continue;
                    const auto& lat = state_.subj[i];
                    std::size_t base = z_scratch_.size();
                    for (double lam : lat.lambda)
                        z_scratch_.push_back(rate_to_z(lam, a_new, b_new));
                    lik_prop += rate_vector_logpdf(
                        lat.lambda, h_new,
                        std::span<const double>(z_scratch_).subspan(base, lat.lambda.size()));
                    lik_cur += rate_vector_logpdf(lat.lambda, h_cur, lat.rate_z);
                }
                double la = (lp_prop + lik_prop + ref.transform.log_jacobian(cand)) -
                            (lp_cur + lik_cur + ref.transform.log_jacobian(cur));
                acc_prob = std::min(1.0, std::exp(std::min(la, 0.0)));
            }
            bool accepted = acc_prob >= 1.0 || global_rng_.uniform() < acc_prob;
            ++scales_[k].proposals;
            if (accepted) {
                ++scales_[k].accepts;
                *ref.ptr = cand;
                std::size_t off = 0;
                for (std::size_t i = 0; i < data_.subjects.size(); ++i) {
                    if (group_of(data_.subjects[i]) != g) continue;
                    auto& lat = state_.subj[i];
                    for (std::size_t t = 0; t < lat.lambda.size(); ++t)
                        lat.rate_z[t] = z_scratch_[off++];
                }
            }
            scales_[k].adapt(acc_prob);
        }
    }

    // Proportion shapes: a proposal moves xi for every interval in the group
    // (eps stays fixed, xi recomputed through the copula with the candidate
    // shapes); accepted proposals commit the recomputed xi.
    void update_alpha_beta(int g) {
        for (int which = 0; which < 2; ++which) {
            std::string name = (which == 0 ? "alpha" : "beta") + g_suffix(g);
            std::size_t k = reg_index_of(name);
            auto& ref = registry_[k];
            if (ref.fixed) continue;
            double cur = *ref.ptr;
            double z = ref.transform.forward(cur);
            double cand = ref.transform.inverse(z + scales_[k].step() * global_rng_.normal());
            double a_new = which == 0 ? cand : par_.alpha[g];
            double b_new = which == 0 ? par_.beta[g] : cand;
            double lp_prop = log_prior_alpha_beta(a_new, b_new);
            double lp_cur = log_prior_alpha_beta(par_.alpha[g], par_.beta[g]);
            double acc_prob = 0.0;
            if (std::isfinite(lp_prop)) {
                double lik_prop = 0.0, lik_cur = 0.0;
                xi_scratch_.clear();
                for (std::size_t i = 0; i < data_.subjects.size(); ++i) {
                    const auto& s = data_.subjects[i];
                    if (group_of(s) != g) continue;
                    const auto& lat = state_.subj[i];
                    for (std::size_t t = 0; t < s.intervals.size(); ++t) {
                        const auto& iv = s.intervals[t];
                        double mmv = static_cast<double>(lat.m[t] + iv.m_rep);
                        double nnv = static_cast<double>((lat.n[t] - lat.m[t]) +
                                                         (iv.n_rep - iv.m_rep));
                        double xi_new = copula_forward(lat.eps[t], a_new, b_new, lat.xi[t]);
                        xi_scratch_.push_back(xi_new);
                        lik_prop += mmv * std::log(xi_new) + nnv * std::log1p(-xi_new);
                        lik_cur += mmv * std::log(lat.xi[t]) + nnv * std::log1p(-lat.xi[t]);
                    }
                }
                double la = (lp_prop + lik_prop + ref.transform.log_jacobian(cand)) -
                            (lp_cur + lik_cur + ref.transform.log_jacobian(cur));
                acc_prob = std::min(1.0, std::exp(std::min(la, 0.0)));
            }
            bool accepted = acc_prob >= 1.0 || global_rng_.uniform() < acc_prob;
            ++scales_[k].proposals;
            if (accepted) {
                ++scales_[k].accepts;
                *ref.ptr = cand;
                std::size_t off = 0;
                for (std::size_t i = 0; i < data_.subjects.size(); ++i) {
                    if (group_of(data_.subjects[i]) != g) continue;
                    auto& lat = state_.subj[i];
                    for (std::size_t t = 0; t < lat.xi.size(); ++t)
                        lat.xi[t] = xi_scratch_[off++];
                }
            }
            scales_[k].adapt(acc_prob);
        }
    }

    // Exchangeable-correlation part of the rate prior, as a function of rho.
    double rate_corr_loglik(double r) const {
        double lp = 0.0;
        for (std::size_t i = 0; i < data_.subjects.size(); ++i) {
            const auto& lat = state_.subj[i];
            const int g = group_of(data_.subjects[i]);
            const int t = static_cast<int>(lat.lambda.size());
            if (mcfg_.marginal == RateMarginal::lognormal) {
                double sum = 0.0, sum2 = 0.0;
                for (double v : lat.lambda) {
                    double d = std::log(v) - par_.mu[g];
                    sum += d;
                    sum2 += d * d;
                }
                double a = par_.sigma2[g] * (1.0 - r), b = par_.sigma2[g] * r;
                lp += -0.5 * exch_log_det(t, a, b) - 0.5 * exch_quad_form(sum, sum2, t, a, b);
            } else {
                double sum = 0.0, sum2 = 0.0;
                for (double v : lat.rate_z) {
                    sum += v;
                    sum2 += v * v;
                }
                lp += -0.5 * exch_log_det(t, 1.0 - r, r) -
                      0.5 * exch_quad_form(sum, sum2, t, 1.0 - r, r);
            }
        }
        return lp;
    }

    void update_regression_param(const std::string& name, PriorParam prior_kind) {
        std::size_t k = reg_index_of(name);
        auto& ref = registry_[k];
        if (ref.fixed) return;
        const int stratum = stratum_of_param(name);
        double* slot = ref.ptr;
        auto target = [&](double v) {
            double saved = *slot;
            *slot = v;
            double lp = log_prior(prior_kind, v, mcfg_.priors);
            if (std::isfinite(lp)) lp += outcome_loglik_all(stratum);
            *slot = saved;
            return lp;
        };
        auto [val, acc] = rw_mh_update(*slot, target, ref.transform, scales_[k], global_rng_);
        (void)acc;
        *slot = val;
    }

    // Which risk stratum a regression parameter belongs to; -1 = all subjects.
    int stratum_of_param(const std::string& name) const {
        if (!mcfg_.risk_stratified) return -1;
        for (std::size_t s = 0; s < data_.stratum_labels.size(); ++s) {
            const std::string& lab = data_.stratum_labels[s];
            if (name.size() >= lab.size() &&
                name.compare(name.size() - lab.size(), lab.size(), lab) == 0 &&
                name[name.size() - lab.size() - 1] == '_')
                return static_cast<int>(s);
        }
        return -1;
    }

    double outcome_loglik_all(int stratum) const {
        double lp = 0.0;
        for (std::size_t i = 0; i < data_.subjects.size(); ++i) {
            const auto& s = data_.subjects[i];
            if (stratum >= 0 && s.stratum != stratum) continue;
            const auto& lat = state_.subj[i];
            const ContactEscape q = contact_escape(s, par_, mcfg_);
            for (std::size_t t = 0; t < s.intervals.size(); ++t)
                lp += interval_outcome_loglik(s.intervals[t], lat.n[t], lat.m[t], q, mcfg_);
        }
        return lp;
    }

    const Dataset& data_;
    ModelConfig mcfg_;
    RunConfig rcfg_;
    int chain_ = 0;
    std::uint64_t seed_ = 0;
    Params par_;
    LatentState state_;
    std::vector<GlobalParamRef> registry_;
    std::vector<RwScale> scales_;
    RngStream global_rng_;
    std::vector<RngStream> subj_rng_;
    std::vector<long long> n_scratch_, ntilde_scratch_;
    std::vector<double> days_scratch_, xi_scratch_, z_scratch_;
    std::array<std::pair<long long, long long>, 3> lam_acc_{};
    std::array<std::pair<long long, long long>, 2> eps_acc_{};
};

// ---------------------------------------------------------------------------
// Orchestrator

inline InferenceResult run_inference(const Dataset& data, const ModelConfig& mcfg,
                                     const RunConfig& rcfg,
                                     const LatentState* pinned_latents = nullptr) {
    mcfg.validate(data);
    rcfg.validate();
    if (data.subjects.empty()) throw std::invalid_argument("run_inference: empty dataset");

    std::vector<std::unique_ptr<ChainRunner>> chains;
    for (int c = 0; c < rcfg.chains; ++c)
        chains.push_back(std::make_unique<ChainRunner>(data, mcfg, rcfg, c, pinned_latents));

    // monitored parameters: non-fixed globals plus a few latent rate coordinates
    std::vector<std::string> names;
    std::vector<bool> is_fixed;
    for (const auto& ref : chains[0]->registry()) {
        names.push_back(ref.name);
        is_fixed.push_back(ref.fixed);
    }
    std::vector<std::pair<int, int>> lambda_monitor;
    if (!rcfg.fix_latents && rcfg.monitor_lambda > 0) {
        RngStream pick = RngStream::derive(rcfg.seed, 0x11abda5ULL, 7);
        std::vector<std::pair<int, int>> all;
        for (std::size_t i = 0; i < data.subjects.size(); ++i)
            for (std::size_t t = 0; t < data.subjects[i].intervals.size(); ++t)
                all.emplace_back(static_cast<int>(i), static_cast<int>(t));
        for (int k = 0; k < rcfg.monitor_lambda && !all.empty(); ++k) {
            std::size_t j = static_cast<std::size_t>(pick.uniform() * all.size());
            if (j >= all.size()) j = all.size() - 1;
            lambda_monitor.push_back(all[j]);
            all.erase(all.begin() + static_cast<std::ptrdiff_t>(j));
        }
        for (auto [i, t] : lambda_monitor) {
            names.push_back("lambda_s" + std::to_string(i) + "_t" + std::to_string(t));
            is_fixed.push_back(false);
        }
    }

    std::vector<std::vector<std::vector<double>>> draws(
        static_cast<std::size_t>(rcfg.chains),
        std::vector<std::vector<double>>(names.size()));

    const int threads = std::min(rcfg.threads > 0 ? rcfg.threads : rcfg.chains, rcfg.chains);
    auto parallel_run = [&](long long iters, bool record) {
        auto work = [&](int tid) {
            for (int c = tid; c < rcfg.chains; c += threads)
                chains[static_cast<std::size_t>(c)]->run_block(
                    iters, record, lambda_monitor, &draws[static_cast<std::size_t>(c)]);
        };
        if (threads <= 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
            for (auto& th : pool) th.join();
        }
    };

    Report report;
    report.rhat_rule_enabled = rcfg.rhat_threshold > 0.0;
    report.monitored = names;
    report.dropped_post_infection = data.dropped_post_infection;
    for (const auto& ch : chains) report.chain_seeds.push_back(ch->seed());

    // adaptation, then freeze, then burn-in
    parallel_run(rcfg.adapt_iters, false);
    for (auto& ch : chains) ch->freeze_scales();
    parallel_run(rcfg.burnin, false);
    report.warmup_iters = rcfg.adapt_iters + rcfg.burnin;

    bool converged = false;
    long long retained = 0;
    while (retained < rcfg.max_iters) {
        long long block = std::min(rcfg.check_interval, rcfg.max_iters - retained);
        parallel_run(block, true);
        retained += block;

        RhatCheck check;
        check.at_iteration = retained;
        bool all_ok = true;
        std::vector<double> bs, ws;
        long long window = std::min(rcfg.check_interval, retained);
        for (std::size_t p = 0; p < names.size(); ++p) {
            if (is_fixed[p]) {
                check.sqrt_r_hat.push_back(1.0);
                bs.push_back(0.0);
                ws.push_back(0.0);
                continue;
            }
            std::vector<std::span<const double>> spans;
            for (int c = 0; c < rcfg.chains; ++c) {
                const auto& col = draws[static_cast<std::size_t>(c)][p];
                spans.emplace_back(col.data() + (col.size() - static_cast<std::size_t>(window)),
                                   static_cast<std::size_t>(window));
            }
            auto gr = gelman_rubin_full(spans);
            check.sqrt_r_hat.push_back(gr.sqrt_r_hat);
            bs.push_back(gr.between);
            ws.push_back(gr.within);
            if (!(gr.sqrt_r_hat < rcfg.rhat_threshold)) all_ok = false;
        }
        report.rhat_trajectory.push_back(check);
        report.final_b = bs;
        report.final_w = ws;
        if (report.rhat_rule_enabled && all_ok) {
            converged = true;
            break;
        }
    }
    if (!report.rhat_rule_enabled) converged = true;
    report.converged = converged;
    report.retained_iters = retained;

    InferenceResult result;
    result.converged = converged;
    for (int c = 0; c < rcfg.chains; ++c) {
        ChainOutput out;
        out.seed = chains[static_cast<std::size_t>(c)]->seed();
        out.iterations = retained;
        out.param_names = names;
        out.draws = draws[static_cast<std::size_t>(c)];
        out.acceptance = chains[static_cast<std::size_t>(c)]->acceptance_rates();
        result.chains.push_back(std::move(out));
    }

    RngStream mix_rng = RngStream::derive(rcfg.seed, 0x313cULL, 11);
    report.mix_seed = rcfg.seed;
    std::vector<const std::vector<std::vector<double>>*> ptrs;
    for (int c = 0; c < rcfg.chains; ++c) ptrs.push_back(&draws[static_cast<std::size_t>(c)]);
    auto [summary, mixed] = summarize(names, ptrs, 5000, mix_rng);
    result.summary = std::move(summary);
    result.mixed_names = names;
    result.mixed_draws = std::move(mixed);
    result.report = std::move(report);
    return result;
}

inline std::string Report::render(const std::vector<ChainOutput>& chains) const {
    std::ostringstream os;
    os << "inference report\n";
    os << "converged: " << (converged ? "yes" : "no")
       << (rhat_rule_enabled ? "" : " (fixed-length run, stopping rule disabled)") << "\n";
    os << "warmup iterations (adapt + burn-in): " << warmup_iters << "\n";
    os << "retained iterations per chain: " << retained_iters << "\n";
    os << "rows dropped after first infection: " << dropped_post_infection << "\n";
    os << "summary mixing seed: " << mix_seed << "\n";
    os << "chain seeds:";
    for (auto s : chain_seeds) os << " " << s;
    os << "\n\nsqrt R-hat trajectory (M = per-chain draws in the check window):\n";
    for (const auto& check : rhat_trajectory) {
        os << "  at " << check.at_iteration << ":";
        for (std::size_t p = 0; p < monitored.size(); ++p)
            os << " " << monitored[p] << "=" << detail::fmt_double(check.sqrt_r_hat[p], "%.4f");
        os << "\n";
    }
    if (!final_b.empty()) {
        os << "\nfinal between/within variances (B, W):\n";
        for (std::size_t p = 0; p < monitored.size(); ++p)
            os << "  " << monitored[p] << ": B=" << detail::fmt_double(final_b[p], "%.6g")
               << " W=" << detail::fmt_double(final_w[p], "%.6g") << "\n";
    }
    os << "\nacceptance rates:\n";
    for (std::size_t c = 0; c < chains.size(); ++c) {
        os << "  chain " << c + 1 << ":";
        for (const auto& [name, rate] : chains[c].acceptance)
            os << " " << name << "=" << detail::fmt_double(rate, "%.3f");
        os << "\n";
    }
    return os.str();
}

} // namespace percontact

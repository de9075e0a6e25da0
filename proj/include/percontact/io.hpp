#pragma once
// Dataset ingestion and validation, JSON run configuration, and all file
// outputs (posterior draws, summary tables, diagnostics report). Files are
// UTF-8 with LF line endings; doubles round-trip through %.17g.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "percontact/engine.hpp"
#include "percontact/simulator.hpp"

namespace percontact {

using json = nlohmann::json;

struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

inline long long parse_count(const std::string& s, const char* what, long long line_no) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size() || v < 0) throw std::invalid_argument("bad");
        return v;
    } catch (...) {
        throw IngestError("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
    }
}

inline double parse_real(const std::string& s, const char* what, long long line_no) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("bad");
        return v;
    } catch (...) {
        throw IngestError("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
    }
}

inline std::string subtype_label(Subtype s) {
    switch (s) {
        case Subtype::e: return "E";
        case Subtype::b: return "B";
        case Subtype::u: return "U";
        default: return "";
    }
}

inline Subtype subtype_from_label(const std::string& s, long long line_no) {
    if (s.empty()) return Subtype::none;
    if (s == "E") return Subtype::e;
    if (s == "B") return Subtype::b;
    if (s == "U") return Subtype::u;
    throw IngestError("line " + std::to_string(line_no) + ": bad subtype '" + s + "'");
}

} // namespace detail

inline const std::vector<std::string>& dataset_header() {
    static const std::vector<std::string> h = {
        "subject_id",    "interval_index", "interval_days", "reported_contacts",
        "reported_subset", "infected",     "subtype",       "vaccine",
        "incarceration", "risk_stratum",   "freq_category", "share_category"};
    return h;
}

inline void write_dataset(const Dataset& data, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_dataset: cannot open " + path);
    const auto& hdr = dataset_header();
    for (std::size_t k = 0; k < hdr.size(); ++k) os << (k ? "," : "") << hdr[k];
    os << "\n";
    for (const auto& s : data.subjects) {
        for (std::size_t t = 0; t < s.intervals.size(); ++t) {
            const auto& iv = s.intervals[t];
            os << s.id << "," << t + 1 << "," << detail::fmt_double(iv.days, "%.17g") << ","
               << iv.n_rep << "," << iv.m_rep << "," << iv.infected << ","
               << detail::subtype_label(iv.subtype) << "," << s.vaccine << ","
               << s.incarceration << ","
               << data.stratum_labels[static_cast<std::size_t>(s.stratum)] << ","
               << (iv.freq_cat >= 0 ? CategoryMaps::freq_label(iv.freq_cat) : "") << ","
               << (iv.share_cat >= 0 ? CategoryMaps::share_label(iv.share_cat) : "") << "\n";
        }
    }
}

/// Parse and validate a trial CSV. Rows after a subject's first infection are
/// dropped (counted in the result); category columns are mapped through the
/// representative-value maps; m~ > n~ rows are collected into one error.
inline Dataset ingest(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IngestError("ingest: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw IngestError("ingest: empty file " + path);
    auto header = detail::split_csv(line);
    const auto& expect = dataset_header();
    bool ok = header.size() == expect.size() || header.size() == expect.size() - 2;
    if (ok)
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] != expect[k]) ok = false;
    if (!ok) throw IngestError("ingest: header does not match the trial CSV schema");

    struct Row {
        std::string id;
        long long index;
        IntervalObs iv;
        int vaccine, incarceration;
        std::string stratum;
        long long line_no;
    };
    std::vector<Row> rows;
    std::vector<long long> bad_subset_lines;
    long long line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto f = detail::split_csv(line);
        if (f.size() != header.size())
            throw IngestError("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " fields, got " +
                              std::to_string(f.size()));
        Row r;
        r.line_no = line_no;
        r.id = f[0];
        if (r.id.empty()) throw IngestError("line " + std::to_string(line_no) + ": empty subject_id");
        r.index = detail::parse_count(f[1], "interval_index", line_no);
        r.iv.days = detail::parse_real(f[2], "interval_days", line_no);
        if (!(r.iv.days > 0.0))
            throw IngestError("line " + std::to_string(line_no) + ": interval_days must be > 0");
        r.iv.infected = static_cast<int>(detail::parse_count(f[5], "infected", line_no));
        if (r.iv.infected != 0 && r.iv.infected != 1)
            throw IngestError("line " + std::to_string(line_no) + ": infected must be 0 or 1");
        r.iv.subtype = detail::subtype_from_label(f[6], line_no);
        if (r.iv.subtype != Subtype::none && !r.iv.infected)
            throw IngestError("line " + std::to_string(line_no) +
                              ": subtype label on an uninfected interval");
        r.vaccine = static_cast<int>(detail::parse_count(f[7], "vaccine", line_no));
        if (r.vaccine != 0 && r.vaccine != 1)
            throw IngestError("line " + std::to_string(line_no) + ": vaccine must be 0 or 1");
        r.incarceration = f[8].empty()
                              ? 0
                              : static_cast<int>(detail::parse_count(f[8], "incarceration",
                                                                     line_no));
        if (r.incarceration != 0 && r.incarceration != 1)
            throw IngestError("line " + std::to_string(line_no) + ": incarceration must be 0 or 1");
        r.stratum = f[9].empty() ? "all" : f[9];

        std::string freq_cat = header.size() == expect.size() ? f[10] : "";
        std::string share_cat = header.size() == expect.size() ? f[11] : "";
        if (!freq_cat.empty()) {
            try {
                r.iv.freq_cat = CategoryMaps::freq_from_label(freq_cat);
            } catch (const std::exception& e) {
                throw IngestError("line " + std::to_string(line_no) + ": " + e.what());
            }
            r.iv.n_rep = std::llround(CategoryMaps::freq_rate(r.iv.freq_cat) * r.iv.days);
        } else {
            r.iv.n_rep = detail::parse_count(f[3], "reported_contacts", line_no);
        }
        if (!share_cat.empty()) {
            try {
                r.iv.share_cat = CategoryMaps::share_from_label(share_cat);
            } catch (const std::exception& e) {
                throw IngestError("line " + std::to_string(line_no) + ": " + e.what());
            }
            r.iv.m_rep = std::min(r.iv.n_rep,
                                  std::llround(CategoryMaps::share_frac(r.iv.share_cat) *
                                               static_cast<double>(r.iv.n_rep)));
        } else {
            r.iv.m_rep = detail::parse_count(f[4], "reported_subset", line_no);
        }
        if (r.iv.m_rep > r.iv.n_rep) {
            bad_subset_lines.push_back(line_no);
            continue;
        }
        rows.push_back(std::move(r));
    }
    if (!bad_subset_lines.empty()) {
        std::string msg = "ingest: reported_subset exceeds reported_contacts on ";
        msg += bad_subset_lines.size() == 1 ? "line" : "lines";
        for (std::size_t k = 0; k < bad_subset_lines.size(); ++k)
            msg += (k ? "," : "") + std::string(" ") + std::to_string(bad_subset_lines[k]);
        throw IngestError(msg);
    }

    Dataset data;
    data.stratum_labels.clear();
    std::map<std::string, std::size_t> subj_index;
    std::map<std::string, int> strat_index;
    std::vector<std::vector<Row>> per_subject;
    for (auto& r : rows) {
        auto [it, fresh] = subj_index.try_emplace(r.id, per_subject.size());
        if (fresh) per_subject.emplace_back();
        per_subject[it->second].push_back(std::move(r));
    }
    for (auto& sr : per_subject) {
        std::sort(sr.begin(), sr.end(),
                  [](const Row& a, const Row& b) { return a.index < b.index; });
        SubjectObs s;
        s.id = sr.front().id;
        s.vaccine = sr.front().vaccine;
        s.incarceration = sr.front().incarceration;
        auto [it, fresh] = strat_index.try_emplace(sr.front().stratum,
                                                   static_cast<int>(data.stratum_labels.size()));
        if (fresh) data.stratum_labels.push_back(sr.front().stratum);
        s.stratum = it->second;
        bool infected_seen = false;
        for (auto& r : sr) {
            if (infected_seen) {
                ++data.dropped_post_infection;
                continue;
            }
            if (r.vaccine != s.vaccine || r.incarceration != s.incarceration)
                throw IngestError("line " + std::to_string(r.line_no) +
                                  ": subject-level covariates change across intervals");
            s.intervals.push_back(r.iv);
            if (r.iv.infected) infected_seen = true;
        }
        data.subjects.push_back(std::move(s));
    }
    if (data.stratum_labels.empty()) data.stratum_labels.push_back("all");
    data.validate();
    return data;
}

// ---------------------------------------------------------------------------
// JSON configuration

inline Design design_from_string(const std::string& s) {
    if (s == "vax004") return Design::vax004;
    if (s == "vax003") return Design::vax003;
    throw std::invalid_argument("unknown design '" + s + "' (expected vax004 or vax003)");
}

inline RateMarginal marginal_from_string(const std::string& s) {
    if (s == "lognormal") return RateMarginal::lognormal;
    if (s == "gamma") return RateMarginal::gamma;
    throw std::invalid_argument("unknown rate_marginal '" + s + "'");
}

/// Model + run configuration from one JSON object; unset keys keep the
/// design-specific defaults.
inline std::pair<ModelConfig, RunConfig> fit_config_from_json(const json& j) {
    Design d = design_from_string(j.value("design", std::string("vax004")));
    ModelConfig m = ModelConfig::defaults_for(d);
    m.subtype = j.value("subtype", m.subtype);
    m.overdispersion = j.value("overdispersion", m.overdispersion);
    if (j.contains("rate_marginal"))
        m.marginal = marginal_from_string(j["rate_marginal"].get<std::string>());
    if (j.contains("pi")) m.prevalence.pi = j["pi"].get<double>();
    if (j.contains("pi_e") || j.contains("pi_b")) {
        m.prevalence.subtype = true;
        m.prevalence.pi_e = j.value("pi_e", 0.0);
        m.prevalence.pi_b = j.value("pi_b", 0.0);
    }
    m.prevalence.subtype = m.subtype;
    m.risk_stratified = j.value("risk_stratified", false);
    m.incarceration_stratified = j.value("incarceration_stratified", false);
    m.priors.d_theta_v = j.value("d_theta_v", 2.0);
    m.priors.d_theta_x = j.value("d_theta_x", 2.0);
    m.priors.sigma2_truncate = j.value("sigma2_truncate", false);
    if (j.contains("p0_prior")) {
        const auto& p = j["p0_prior"];
        std::string type = p.value("type", std::string("uniform"));
        if (type == "uniform") {
            m.priors.p0.type = P0Prior::Type::uniform;
            m.priors.p0.a = p.value("a", m.priors.p0.a);
            m.priors.p0.b = p.value("b", m.priors.p0.b);
        } else if (type == "beta") {
            m.priors.p0.type = P0Prior::Type::beta;
            m.priors.p0.mean = p.value("mean", m.priors.p0.mean);
            m.priors.p0.sd = p.value("sd", m.priors.p0.sd);
        } else {
            throw std::invalid_argument("unknown p0_prior type '" + type + "'");
        }
    }

    RunConfig r;
    r.chains = j.value("chains", r.chains);
    r.adapt_iters = j.value("adapt_iters", r.adapt_iters);
    r.burnin = j.value("burnin", r.burnin);
    r.check_interval = j.value("check_interval", r.check_interval);
    r.rhat_threshold = j.value("rhat_threshold", r.rhat_threshold);
    r.max_iters = j.value("max_iters", r.max_iters);
    r.seed = j.value("seed", r.seed);
    r.threads = j.value("threads", r.threads);
    r.monitor_lambda = j.value("monitor_lambda", r.monitor_lambda);
    r.fix_latents = j.value("fix_latents", false);
    if (j.contains("fixed_params"))
        for (auto it = j["fixed_params"].begin(); it != j["fixed_params"].end(); ++it)
            r.fixed_params[it.key()] = it.value().get<double>();
    return {m, r};
}

inline std::vector<double> json_real_vector(const json& v) {
    std::vector<double> out;
    if (v.is_array())
        for (const auto& x : v) out.push_back(x.get<double>());
    else
        out.push_back(v.get<double>());
    return out;
}

inline SimConfig sim_config_from_json(const json& j) {
    Design d = design_from_string(j.value("design", std::string("vax004")));
    SimConfig c = SimConfig::defaults_for(d);
    c.subtype = j.value("subtype", c.subtype);
    c.overdispersion = j.value("overdispersion", c.overdispersion);
    if (j.contains("rate_marginal"))
        c.marginal = marginal_from_string(j["rate_marginal"].get<std::string>());
    c.incarceration_stratified = j.value("incarceration_stratified", false);
    c.n_subjects = j.value("n_subjects", c.n_subjects);
    c.n_intervals = j.value("n_intervals", c.n_intervals);
    c.interval_days = j.value("interval_days", c.interval_days);
    c.vaccine_frac = j.value("vaccine_frac", c.vaccine_frac);
    c.incarceration_frac = j.value("incarceration_frac", c.incarceration_frac);
    c.coarsen = j.value("coarsen", c.coarsen);
    if (j.contains("pi")) c.prevalence.pi = j["pi"].get<double>();
    if (c.subtype) {
        c.prevalence.subtype = true;
        c.prevalence.pi_e = j.value("pi_e", 0.225);
        c.prevalence.pi_b = j.value("pi_b", 0.075);
    }
    if (j.contains("stratum_labels")) {
        c.stratum_labels.clear();
        for (const auto& s : j["stratum_labels"]) c.stratum_labels.push_back(s.get<std::string>());
        c.stratum_mix = json_real_vector(j.at("stratum_mix"));
    }
    if (!j.contains("truth")) throw std::invalid_argument("sim config: missing 'truth'");
    const auto& t = j["truth"];
    Params& p = c.truth;
    p.p0 = json_real_vector(t.at("p0"));
    p.theta_v = t.contains("theta_v") ? json_real_vector(t["theta_v"])
                                      : std::vector<double>(p.p0.size(), 0.0);
    p.theta_x = t.value("theta_x", 0.0);
    const int groups = c.incarceration_stratified ? 2 : 1;
    auto fill = [&](const char* key, std::vector<double>& dst, double dflt) {
        dst = t.contains(key) ? json_real_vector(t[key])
                              : std::vector<double>(static_cast<std::size_t>(groups), dflt);
        if (static_cast<int>(dst.size()) != groups)
            throw std::invalid_argument(std::string("sim config: '") + key +
                                        "' must have one value per hyper group");
    };
    fill("mu", p.mu, 0.0);
    fill("sigma2", p.sigma2, 1.0);
    fill("alpha_lambda", p.alpha_lam, 1.0);
    fill("beta_lambda", p.beta_lam, 1.0);
    fill("alpha", p.alpha, 1.0);
    fill("beta", p.beta, 1.0);
    p.rho = t.value("rho", 0.0);
    p.gamma_corr = t.value("gamma", 0.0);
    p.phi = t.value("phi", 1.0);
    return c;
}

// ---------------------------------------------------------------------------
// Outputs

/// Write per-chain draw CSVs, the summary table and the diagnostics report.
/// Wall-clock timing goes to a separate timing.txt so every other output is
/// byte-deterministic for a fixed seed.
inline void emit_outputs(const InferenceResult& result, const std::string& out_dir,
                         double elapsed_seconds, long long window = 5000) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("emit_outputs: cannot create " + out_dir);

    for (std::size_t c = 0; c < result.chains.size(); ++c) {
        const auto& ch = result.chains[c];
        std::ofstream os(out_dir + "/chain_" + std::to_string(c + 1) + ".csv",
                         std::ios::binary);
        if (!os) throw std::runtime_error("emit_outputs: cannot write draw file");
        os << "iteration,parameter,value\n";
        const long long len = ch.iterations;
        const long long start = std::max<long long>(0, len - window);
        for (long long it = start; it < len; ++it)
            for (std::size_t p = 0; p < ch.param_names.size(); ++p)
                os << it + 1 << "," << ch.param_names[p] << ","
                   << detail::fmt_double(ch.draws[p][static_cast<std::size_t>(it)], "%.17g")
                   << "\n";
    }

    {
        std::ofstream os(out_dir + "/summary.csv", std::ios::binary);
        os << "quantity,median,q2.5,q97.5\n";
        for (const auto& row : result.summary.rows)
            os << row.name << "," << detail::fmt_double(row.median, "%.12g") << ","
               << detail::fmt_double(row.q025, "%.12g") << ","
               << detail::fmt_double(row.q975, "%.12g") << "\n";
    }
    {
        std::ofstream os(out_dir + "/report.txt", std::ios::binary);
        os << result.report.render(result.chains);
    }
    {
        std::ofstream os(out_dir + "/timing.txt", std::ios::binary);
        os << "elapsed_seconds " << detail::fmt_double(elapsed_seconds, "%.3f") << "\n";
    }
}

/// Latent-truth sidecar written next to a simulated dataset.
inline void write_truth(const SimResult& sim, const SimConfig& cfg, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_truth: cannot open " + path);
    os << "kind,subject_id,interval_index,name,value\n";
    Params truth = sim.truth;
    auto reg = build_registry(truth, cfg.model_config(), cfg.stratum_labels);
    for (const auto& ref : reg)
        os << "param,,," << ref.name << "," << detail::fmt_double(*ref.ptr, "%.17g") << "\n";
    for (std::size_t i = 0; i < sim.data.subjects.size(); ++i) {
        const auto& s = sim.data.subjects[i];
        const auto& lat = sim.latents.subj[i];
        for (std::size_t t = 0; t < s.intervals.size(); ++t) {
            auto row = [&](const char* name, double v) {
                os << "latent," << s.id << "," << t + 1 << "," << name << ","
                   << detail::fmt_double(v, "%.17g") << "\n";
            };
            row("lambda", lat.lambda[t]);
            row("n", static_cast<double>(lat.n[t]));
            row("m", static_cast<double>(lat.m[t]));
            if (!lat.delta.empty()) row("delta", lat.delta[t]);
            row("eps", lat.eps[t]);
            row("xi", lat.xi[t]);
        }
    }
}

/// Read back per-chain draw CSVs (chain_*.csv) from a fit output directory.
inline std::pair<std::vector<std::string>, std::vector<std::vector<std::vector<double>>>>
read_draws(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string name = e.path().filename().string();
        if (name.rfind("chain_", 0) == 0 && name.size() > 4 &&
            name.substr(name.size() - 4) == ".csv")
            files.push_back(e.path().string());
    }
    if (files.empty()) throw std::runtime_error("read_draws: no chain_*.csv in " + dir);
    std::sort(files.begin(), files.end());

    std::vector<std::string> names;
    std::vector<std::vector<std::vector<double>>> chains;
    for (const auto& f : files) {
        std::ifstream is(f, std::ios::binary);
        if (!is) throw std::runtime_error("read_draws: cannot open " + f);
        std::string line;
        std::getline(is, line); // header
        std::map<std::string, std::vector<double>> cols;
        std::vector<std::string> order;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            auto fields = detail::split_csv(line);
            if (fields.size() != 3) throw std::runtime_error("read_draws: bad row in " + f);
            auto [it, fresh] = cols.try_emplace(fields[1]);
            if (fresh) order.push_back(fields[1]);
            it->second.push_back(std::stod(fields[2]));
        }
        if (names.empty()) {
            names = order;
        } else if (names != order) {
            throw std::runtime_error("read_draws: chain files disagree on parameters");
        }
        std::vector<std::vector<double>> mat;
        for (const auto& n : names) mat.push_back(cols[n]);
        chains.push_back(std::move(mat));
    }
    return {names, chains};
}

} // namespace percontact

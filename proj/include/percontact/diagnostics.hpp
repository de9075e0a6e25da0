#pragma once
// Convergence diagnostics and posterior summarization.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "percontact/math/special.hpp"

namespace percontact {

struct GelmanRubin {
    double sqrt_r_hat = 1.0;
    double between = 0.0; // B
    double within = 0.0;  // W
    bool degenerate = false;
};

/// Scale reduction factor sqrt((M-1)/M + (1/M) B/W) over M retained draws per
/// chain. W = 0 with B > 0 is flagged as a degenerate divergence (+inf).
inline GelmanRubin gelman_rubin_full(const std::vector<std::span<const double>>& chains) {
    const std::size_t c = chains.size();
    if (c < 2) throw std::invalid_argument("gelman_rubin: need >= 2 chains");
    const std::size_t m = chains[0].size();
    for (const auto& ch : chains)
        if (ch.size() != m) throw std::invalid_argument("gelman_rubin: unequal chain lengths");
    if (m < 2) throw std::invalid_argument("gelman_rubin: need chain length >= 2");

    std::vector<double> means(c);
    double grand = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
        double s = 0.0;
        for (double v : chains[j]) s += v;
        means[j] = s / m;
        grand += means[j];
    }
    grand /= c;

    double w = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
        double s2 = 0.0;
        for (double v : chains[j]) {
            double d = v - means[j];
            s2 += d * d;
        }
        w += s2 / (m - 1);
    }
    w /= c;

    double b = 0.0;
    for (double mu : means) {
        double d = mu - grand;
        b += d * d;
    }
    b *= static_cast<double>(m) / (c - 1);

    GelmanRubin out;
    out.between = b;
    out.within = w;
    const double md = static_cast<double>(m);
    if (w <= 0.0) {
        if (b <= 0.0) {
            out.sqrt_r_hat = std::sqrt((md - 1.0) / md);
        } else {
            out.sqrt_r_hat = kInf;
            out.degenerate = true;
        }
        return out;
    }
    out.sqrt_r_hat = std::sqrt((md - 1.0) / md + b / (md * w));
    return out;
}

inline double gelman_rubin(const std::vector<std::span<const double>>& chains) {
    return gelman_rubin_full(chains).sqrt_r_hat;
}

/// Empirical quantile with type-7 interpolation; input need not be sorted.
inline double quantile_type7(std::vector<double> x, double p) {
    if (x.empty()) throw std::invalid_argument("quantile: empty input");
    std::sort(x.begin(), x.end());
    if (x.size() == 1) return x[0];
    double h = (static_cast<double>(x.size()) - 1.0) * p;
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= x.size()) return x.back();
    double frac = h - static_cast<double>(lo);
    return x[lo] + frac * (x[lo + 1] - x[lo]);
}

struct SummaryRow {
    std::string name;
    double median = 0.0, q025 = 0.0, q975 = 0.0;
};

struct PosteriorSummary {
    std::vector<SummaryRow> rows;

    const SummaryRow* find(const std::string& name) const {
        for (const auto& r : rows)
            if (r.name == name) return &r;
        return nullptr;
    }
};

inline SummaryRow summarize_draws(const std::string& name, std::vector<double> draws) {
    SummaryRow r;
    r.name = name;
    r.q025 = quantile_type7(draws, 0.025);
    r.median = quantile_type7(draws, 0.5);
    r.q975 = quantile_type7(std::move(draws), 0.975);
    return r;
}

} // namespace percontact

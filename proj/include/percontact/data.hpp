#pragma once
// Observed-data containers and the categorical coarsening maps used for
// VAX003-style reporting.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "percontact/model.hpp"

namespace percontact {

/// One subject-interval of observed data. Category codes are present (>= 0)
/// only for VAX003-style coarsened reporting.
struct IntervalObs {
    double days = 182.5;
    long long n_rep = 0; // reported contacts
    long long m_rep = 0; // reported subset (condom use / shared needles)
    int infected = 0;
    Subtype subtype = Subtype::none;
    int freq_cat = -1;
    int share_cat = -1;
};

struct SubjectObs {
    std::string id;
    int vaccine = 0;
    int incarceration = 0;
    int stratum = 0; // risk-stratum index
    std::vector<IntervalObs> intervals;
};

struct Dataset {
    std::vector<SubjectObs> subjects;
    std::vector<std::string> stratum_labels{"all"};
    long long dropped_post_infection = 0;

    long long total_intervals() const {
        long long k = 0;
        for (const auto& s : subjects) k += static_cast<long long>(s.intervals.size());
        return k;
    }

    void validate() const {
        for (const auto& s : subjects) {
            if (s.intervals.empty())
                throw std::invalid_argument("Dataset: subject " + s.id + " has no intervals");
            for (std::size_t t = 0; t < s.intervals.size(); ++t) {
                const auto& iv = s.intervals[t];
                if (!(iv.days > 0.0))
                    throw std::invalid_argument("Dataset: non-positive interval length");
                if (iv.m_rep < 0 || iv.m_rep > iv.n_rep)
                    throw std::invalid_argument("Dataset: reported subset exceeds reported contacts");
                if (iv.infected && t + 1 != s.intervals.size())
                    throw std::invalid_argument("Dataset: infected interval must be the last");
            }
        }
    }
};

/// Reported-frequency and shared-fraction category maps. Frequencies carry
/// the assigned representative rates per day; fractions the assigned
/// proportions.
struct CategoryMaps {
    static constexpr int n_freq = 4;
    static constexpr int n_share = 5;

    static const char* freq_label(int c) {
        static const char* labels[n_freq] = {"none", "lt_weekly", "weekly_to_daily", "daily"};
        if (c < 0 || c >= n_freq) throw std::invalid_argument("CategoryMaps: bad frequency category");
        return labels[c];
    }

    static const char* share_label(int c) {
        static const char* labels[n_share] = {"none", "occasionally", "half", "most", "always"};
        if (c < 0 || c >= n_share) throw std::invalid_argument("CategoryMaps: bad share category");
        return labels[c];
    }

    /// Representative rate per day for a frequency category.
    static double freq_rate(int c) {
        static constexpr double rates[n_freq] = {1e-10, 0.5 / 7.0, 4.0 / 7.0, 1.0};
        if (c < 0 || c >= n_freq) throw std::invalid_argument("CategoryMaps: bad frequency category");
        return rates[c];
    }

    /// Representative shared fraction for a share category.
    static double share_frac(int c) {
        static constexpr double fracs[n_share] = {0.005, 0.15, 0.50, 0.85, 0.995};
        if (c < 0 || c >= n_share) throw std::invalid_argument("CategoryMaps: bad share category");
        return fracs[c];
    }

    /// Bracket a rate per day into {none, <1/week, >=1/week but <1/day, >=1/day}.
    static int coarsen_rate(double rate_per_day) {
        if (rate_per_day < 0.0) throw std::invalid_argument("CategoryMaps: negative rate");
        if (rate_per_day < 1e-9) return 0;
        if (rate_per_day < 1.0 / 7.0) return 1;
        if (rate_per_day < 1.0) return 2;
        return 3;
    }

    /// Bracket a shared fraction by midpoints between the representative values.
    static int coarsen_frac(double frac) {
        if (!(frac >= 0.0 && frac <= 1.0)) throw std::invalid_argument("CategoryMaps: bad fraction");
        if (frac < 0.0775) return 0;
        if (frac < 0.325) return 1;
        if (frac < 0.675) return 2;
        if (frac < 0.9225) return 3;
        return 4;
    }

    static int freq_from_label(const std::string& s) {
        for (int c = 0; c < n_freq; ++c)
            if (s == freq_label(c)) return c;
        throw std::invalid_argument("CategoryMaps: unknown frequency category '" + s + "'");
    }

    static int share_from_label(const std::string& s) {
        for (int c = 0; c < n_share; ++c)
            if (s == share_label(c)) return c;
        throw std::invalid_argument("CategoryMaps: unknown share category '" + s + "'");
    }
};

} // namespace percontact

#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gazetime/dataset.hpp"
#include "gazetime/errors.hpp"
#include "gazetime/exgauss.hpp"
#include "gazetime/model.hpp"
#include "gazetime/random.hpp"

namespace gazetime {

/// Uniform-bin histogram of offset times. The default window [0, 1.2] s at
/// 50 bins gives the 24 ms bin width used for reporting; samples outside
/// the window are not counted.
struct OffsetHistogram {
    double t_min = 0.0;
    double t_max = 1.2;
    int n_bins = 50;
    std::vector<long> counts;

    static OffsetHistogram from_samples(std::span<const double> samples, int n_bins = 50,
                                        double t_min = 0.0, double t_max = 1.2) {
        if (n_bins < 2) throw ValidationError("OffsetHistogram: need at least 2 bins");
        if (!(t_max > t_min)) throw ValidationError("OffsetHistogram: empty window");
        OffsetHistogram h;
        h.t_min = t_min;
        h.t_max = t_max;
        h.n_bins = n_bins;
        h.counts.assign(static_cast<std::size_t>(n_bins), 0);
        const double w = (t_max - t_min) / n_bins;
        for (double x : samples) {
            if (x < t_min || x >= t_max) continue;
            const auto b = static_cast<std::size_t>((x - t_min) / w);
            ++h.counts[std::min(b, static_cast<std::size_t>(n_bins - 1))];
        }
        return h;
    }

    double bin_width() const { return (t_max - t_min) / n_bins; }
    long total() const {
        long t = 0;
        for (long c : counts) t += c;
        return t;
    }
};

/// Discrete KL divergence (nats) between the histogram and the model mass
/// per bin. Empirical bins carry a Jeffreys half count so empty bins stay
/// finite; model masses are CDF differences renormalized over the window.
inline double kl_divergence(const OffsetHistogram& hist, const ExGaussParams& pred) {
    const long total = hist.total();
    if (total <= 0) throw ValidationError("kl_divergence: histogram has no counts");
    const int B = hist.n_bins;
    const double w = hist.bin_width();
    const double denom_p = static_cast<double>(total) + 0.5 * B;
    const double cdf_lo = exgauss_cdf(pred, hist.t_min);
    const double cdf_hi = exgauss_cdf(pred, hist.t_max);
    const double window_mass = cdf_hi - cdf_lo;
    if (!(window_mass > 0.0))
        throw NumericError("kl_divergence: model has no mass inside the histogram window");
    double kl = 0.0;
    double prev_cdf = cdf_lo;
    for (int b = 0; b < B; ++b) {
        const double edge = hist.t_min + w * (b + 1);
        const double cdf = (b + 1 == B) ? cdf_hi : exgauss_cdf(pred, edge);
        const double p = (static_cast<double>(hist.counts[static_cast<std::size_t>(b)]) + 0.5) /
                         denom_p;
        const double q = std::max((cdf - prev_cdf) / window_mass, 1e-300);
        kl += p * std::log(p / q);
        prev_cdf = cdf;
    }
    return std::max(kl, 0.0);
}

struct KsResult {
    double d = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

namespace detail {

/// Asymptotic Kolmogorov tail probability Q(lambda) = 2 sum (-1)^{j-1} e^{-2 j^2 lambda^2}.
inline double kolmogorov_q(double lambda) {
    if (lambda <= 0.0) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += sign * term;
        sign = -sign;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace detail

/// Goodness-of-fit of samples against a predicted distribution: the KS D
/// statistic evaluated on the model's decile grid (the nine cut points
/// splitting it into ten equal-probability parts), with the asymptotic
/// Kolmogorov p-value under the finite-sample size correction.
inline KsResult ks_test(std::span<const double> samples, const ExGaussParams& pred) {
    const std::size_t n = samples.size();
    if (n < 10) throw ValidationError("ks_test: need at least 10 samples");
    std::vector<double> xs(samples.begin(), samples.end());
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    for (int k = 1; k <= 9; ++k) {
        const double q = static_cast<double>(k) / 10.0;
        const double t = exgauss_quantile(pred, q);
        const auto below = std::upper_bound(xs.begin(), xs.end(), t) - xs.begin();
        const double emp = static_cast<double>(below) / static_cast<double>(n);
        d = std::max(d, std::abs(emp - q));
    }
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    return {d, detail::kolmogorov_q(lambda), n};
}

// ---------------------------------------------------------------------------
// Ablation regrouping

enum class AblationAxis { saccade_only, vergence_only };

/// One regrouped condition: trials pooled across the collapsed axis. The
/// collapsed coordinate is replaced by the pooled mean so the group still
/// has a well-defined location for RBF placement, and any original
/// condition maps back to its group through the retained key.
struct AblatedGroup {
    double key = 0.0;               // retained coordinate (|ds| or dv)
    GazeDisplacement coordinate;    // (pooled-mean dv, key) or (key, pooled-mean |ds|)
    std::vector<double> offsets_s;
};

inline std::vector<AblatedGroup> ablate(const std::vector<TrialRow>& rows, AblationAxis axis) {
    std::map<long, AblatedGroup> groups;
    std::map<long, double> pooled_sum;
    for (const auto& r : rows) {
        if (!r.accepted) continue;
        const double ds = std::abs(r.ds_deg);
        const double keyv = axis == AblationAxis::saccade_only ? ds : r.dv_deg;
        const double pooled = axis == AblationAxis::saccade_only ? r.dv_deg : ds;
        const long key = std::llround(keyv * 1000.0);
        auto& g = groups[key];
        g.key = static_cast<double>(key) / 1000.0;
        g.offsets_s.push_back(r.offset_s);
        pooled_sum[key] += pooled;
    }
    std::vector<AblatedGroup> out;
    out.reserve(groups.size());
    for (auto& [k, g] : groups) {
        const double pooled_mean = pooled_sum[k] / static_cast<double>(g.offsets_s.size());
        g.coordinate = axis == AblationAxis::saccade_only ? GazeDisplacement{pooled_mean, g.key}
                                                          : GazeDisplacement{g.key, pooled_mean};
        out.push_back(std::move(g));
    }
    return out;
}

/// The group coordinate an original condition falls into under an ablation.
inline GazeDisplacement ablated_coordinate(const std::vector<AblatedGroup>& groups,
                                           AblationAxis axis, const GazeDisplacement& condition) {
    const double keyv = axis == AblationAxis::saccade_only ? std::abs(condition.d_saccade_deg)
                                                           : condition.d_vergence_deg;
    for (const auto& g : groups)
        if (std::abs(g.key - keyv) < 5e-4) return g.coordinate;
    throw ValidationError("ablated_coordinate: condition does not match any group");
}

// ---------------------------------------------------------------------------
// Train/test splitting

struct Split {
    std::vector<TrialRow> train;
    std::vector<TrialRow> test;
};

/// Leave-one-subject-out: the named subject becomes the test fold.
inline Split split_loso(const std::vector<TrialRow>& rows, int test_subject) {
    bool seen = false;
    Split s;
    for (const auto& r : rows) {
        if (r.subject == test_subject) {
            seen = true;
            s.test.push_back(r);
        } else {
            s.train.push_back(r);
        }
    }
    if (!seen)
        throw ValidationError("split_loso: no rows for subject " + std::to_string(test_subject));
    return s;
}

/// Uniform random split, stratified per condition: within every
/// displacement group a seeded shuffle reserves round(n * test_fraction)
/// rows for the test side.
inline Split split_random(const std::vector<TrialRow>& rows, double test_fraction,
                          std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ValidationError("split_random: test fraction must be in (0, 1)");
    std::map<std::pair<long, long>, std::vector<std::size_t>> by_cond;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        by_cond[{std::llround(r.dv_deg * 1000.0), std::llround(std::abs(r.ds_deg) * 1000.0)}]
            .push_back(i);
    }
    Rng rng(seed);
    std::vector<bool> is_test(rows.size(), false);
    for (auto& [k, idx] : by_cond) {
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.below(i)]);
        const auto n_test = static_cast<std::size_t>(
            std::llround(static_cast<double>(idx.size()) * test_fraction));
        for (std::size_t i = 0; i < n_test && i < idx.size(); ++i) is_test[idx[i]] = true;
    }
    Split s;
    for (std::size_t i = 0; i < rows.size(); ++i)
        (is_test[i] ? s.test : s.train).push_back(rows[i]);
    return s;
}

}  // namespace gazetime

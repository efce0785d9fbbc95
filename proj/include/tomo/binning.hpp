#pragma once

// Discretization of per-phase quadrature data into equal-width contiguous
// histograms (fixed, Scott, Leonhardt widths) and the quadrature-based
// mean-photon-number estimator.

#include "tomo/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tomo::binning {

struct PhaseHistogram {
    double theta = 0.0;
    std::vector<double> edges;   // ascending, equally spaced
    std::vector<long> counts;    // one per bin; sum == n_samples
    long n_samples = 0;

    double width() const { return edges.size() > 1 ? edges[1] - edges[0] : 0.0; }
};

enum class WidthKind { fixed, scott, leonhardt };
enum class LeonhardtSource { truncation, estimated_mean };

struct WidthStrategy {
    WidthKind kind = WidthKind::scott;
    double fixed_width = 0.0;
    // Paper-preferred default: the estimated mean photon number.
    LeonhardtSource n_source = LeonhardtSource::estimated_mean;

    static WidthStrategy fixed(double h) {
        if (!(h > 0.0)) throw std::invalid_argument("WidthStrategy::fixed: width must be > 0");
        return {WidthKind::fixed, h, LeonhardtSource::estimated_mean};
    }
    static WidthStrategy scott() { return {WidthKind::scott, 0.0, LeonhardtSource::estimated_mean}; }
    static WidthStrategy leonhardt(LeonhardtSource src = LeonhardtSource::estimated_mean) {
        return {WidthKind::leonhardt, 0.0, src};
    }

    std::string label() const {
        switch (kind) {
            case WidthKind::fixed: {
                char buf[40];
                std::snprintf(buf, sizeof buf, "fixed:%g", fixed_width);
                return buf;
            }
            case WidthKind::scott: return "scott";
            case WidthKind::leonhardt:
                return n_source == LeonhardtSource::truncation ? "leonhardt:t" : "leonhardt:mean";
        }
        return "?";
    }
};

// h = 3.5 sigma s^(-1/3) with the unbiased sample standard deviation.
inline double scott_width(std::span<const double> samples) {
    const std::size_t s = samples.size();
    if (s < 2) throw std::invalid_argument("scott_width: need at least 2 samples");
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= double(s);
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    const double sigma = std::sqrt(ss / double(s - 1));
    if (!(sigma > 1e-14 * std::max(1.0, std::abs(mean))))
        throw std::runtime_error("scott_width: degenerate sample (sigma = 0)");
    return 3.5 * sigma * std::pow(double(s), -1.0 / 3.0);
}

// q_n / 2 = pi / (2 sqrt(2n + 1)): the bound on bin width needed to resolve
// the finest quadrature features of an n-photon state.
inline double leonhardt_width(double n) {
    if (n < 0.0) throw std::invalid_argument("leonhardt_width: n must be >= 0");
    return std::numbers::pi / (2.0 * std::sqrt(2.0 * n + 1.0));
}

// (1/N) sum x_i^2 - 1/2; valid for phases uniform over [0, pi).
inline double estimate_mean_photon(const sampling::QuadratureDataset& dataset) {
    if (dataset.samples.empty())
        throw std::invalid_argument("estimate_mean_photon: empty dataset");
    double acc = 0.0;
    for (const auto& s : dataset.samples) acc += s.x * s.x;
    return acc / double(dataset.samples.size()) - 0.5;
}

namespace detail {

// Equal-width bins anchored at the sample minimum; ceil((max-min)/h) bins.
// The maximum sample is assigned to the last bin (edge search keeps bin
// assignment exactly consistent with the stored edges).
inline PhaseHistogram histogram_phase(double theta, std::span<const double> samples, double h) {
    if (samples.empty()) throw std::invalid_argument("histogram_phase: no samples");
    if (!(h > 0.0)) throw std::invalid_argument("histogram_phase: width must be > 0");
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *lo_it, hi = *hi_it;
    const long nbins = std::max<long>(1, static_cast<long>(std::ceil((hi - lo) / h)));
    PhaseHistogram hist;
    hist.theta = theta;
    hist.n_samples = static_cast<long>(samples.size());
    hist.edges.resize(nbins + 1);
    for (long k = 0; k <= nbins; ++k) hist.edges[k] = lo + double(k) * h;
    hist.edges[nbins] = std::max(hist.edges[nbins], hi);  // guard sub-ulp rounding
    hist.counts.assign(nbins, 0);
    for (double x : samples) {
        auto it = std::upper_bound(hist.edges.begin(), hist.edges.end(), x);
        long idx = static_cast<long>(it - hist.edges.begin()) - 1;
        idx = std::clamp<long>(idx, 0, nbins - 1);
        ++hist.counts[idx];
    }
    return hist;
}

inline std::map<double, std::vector<double>> group_by_phase(
    const sampling::QuadratureDataset& dataset) {
    std::map<double, std::vector<double>> groups;
    for (const auto& s : dataset.samples) groups[s.theta].push_back(s.x);
    return groups;
}

}  // namespace detail

// Scott widths are computed per phase; fixed and Leonhardt widths are global.
inline std::vector<PhaseHistogram> build_histograms(const sampling::QuadratureDataset& dataset,
                                                    const WidthStrategy& strategy) {
    const auto groups = detail::group_by_phase(dataset);
    if (groups.empty()) throw std::invalid_argument("build_histograms: empty dataset");

    double global_width = 0.0;
    switch (strategy.kind) {
        case WidthKind::fixed:
            if (!(strategy.fixed_width > 0.0))
                throw std::invalid_argument("build_histograms: fixed width must be > 0");
            global_width = strategy.fixed_width;
            break;
        case WidthKind::leonhardt:
            global_width = leonhardt_width(strategy.n_source == LeonhardtSource::truncation
                                               ? double(dataset.truncation)
                                               : std::max(0.0, estimate_mean_photon(dataset)));
            break;
        case WidthKind::scott: break;
    }

    std::vector<PhaseHistogram> histograms;
    histograms.reserve(groups.size());
    for (const auto& [theta, xs] : groups) {
        const double h = strategy.kind == WidthKind::scott ? scott_width(xs) : global_width;
        histograms.push_back(detail::histogram_phase(theta, xs, h));
    }
    return histograms;
}

inline void write_histograms_csv(const std::vector<PhaseHistogram>& histograms, std::ostream& os) {
    os << "theta,edge_low,edge_high,count\n";
    char line[120];
    for (const auto& hist : histograms) {
        for (std::size_t i = 0; i < hist.counts.size(); ++i) {
            std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%ld\n", hist.theta, hist.edges[i],
                          hist.edges[i + 1], hist.counts[i]);
            os << line;
        }
    }
}

inline void write_histograms_csv(const std::vector<PhaseHistogram>& histograms,
                                 const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_histograms_csv: cannot open " + path);
    write_histograms_csv(histograms, os);
}

}  // namespace tomo::binning

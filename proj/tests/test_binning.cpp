#include "tomo/binning.hpp"
#include "test_helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace tomo;
using Catch::Approx;

namespace {

sampling::QuadratureDataset dataset_from(const std::vector<std::pair<double, double>>& rows,
                                         int truncation = 5) {
    sampling::QuadratureDataset d;
    d.truncation = truncation;
    d.eta = 1.0;
    for (const auto& [theta, x] : rows) d.samples.push_back({theta, x});
    return d;
}

}  // namespace

TEST_CASE("scott_width direct substitution and scaling laws", "[binning]") {
    // sigma-hat = 1, s = 1000 -> h = 3.5 * 1000^(-1/3) = 0.35
    std::vector<double> unit_sigma(1000);
    for (int i = 0; i < 1000; ++i) unit_sigma[i] = (i % 2 == 0 ? 1.0 : -1.0) * 0.999499874937461;
    // crafted so the unbiased sample standard deviation is exactly ~1
    double mean = 0.0;
    for (double x : unit_sigma) mean += x;
    mean /= 1000.0;
    double ss = 0.0;
    for (double x : unit_sigma) ss += (x - mean) * (x - mean);
    const double sigma = std::sqrt(ss / 999.0);
    CHECK(binning::scott_width(unit_sigma) == Approx(3.5 * sigma * std::pow(1000.0, -1.0 / 3.0)));
    CHECK(binning::scott_width(unit_sigma) == Approx(0.35).margin(1e-3));

    // exact scaling: linear in sigma, s^(-1/3) in the count
    rng::Stream stream(12);
    std::vector<double> base(500);
    for (auto& x : base) x = stream.uniform(-2.0, 2.0);
    const double h0 = binning::scott_width(base);
    std::vector<double> scaled = base;
    for (auto& x : scaled) x *= 3.0;
    CHECK(binning::scott_width(scaled) == Approx(3.0 * h0).epsilon(1e-12));

    std::vector<double> doubled = base;  // duplicate each sample: same sigma-hat
    doubled.insert(doubled.end(), base.begin(), base.end());
    double mean2 = 0.0;
    for (double x : doubled) mean2 += x;
    mean2 /= double(doubled.size());
    double ss2 = 0.0;
    for (double x : doubled) ss2 += (x - mean2) * (x - mean2);
    const double sigma2 = std::sqrt(ss2 / double(doubled.size() - 1));
    CHECK(binning::scott_width(doubled) ==
          Approx(3.5 * sigma2 * std::pow(1000.0, -1.0 / 3.0)).epsilon(1e-12));

    std::vector<double> constant(10, 4.2);
    CHECK_THROWS_AS(binning::scott_width(constant), std::runtime_error);
    std::vector<double> single{1.0};
    CHECK_THROWS_AS(binning::scott_width(single), std::invalid_argument);
}

TEST_CASE("leonhardt_width values and monotonicity", "[binning]") {
    CHECK(binning::leonhardt_width(0.0) == Approx(std::numbers::pi / 2.0).epsilon(1e-15));
    CHECK(binning::leonhardt_width(0.0) == Approx(1.5708).margin(1e-4));
    double prev = binning::leonhardt_width(0.0);
    for (double n = 0.25; n <= 12.0; n += 0.25) {
        const double next = binning::leonhardt_width(n);
        CHECK(next < prev);
        prev = next;
    }
    CHECK_THROWS_AS(binning::leonhardt_width(-0.1), std::invalid_argument);
}

TEST_CASE("estimate_mean_photon formula cases", "[binning]") {
    const auto zeros = dataset_from({{0.0, 0.0}, {0.1, 0.0}, {0.2, 0.0}});
    CHECK(binning::estimate_mean_photon(zeros) == Approx(-0.5).epsilon(1e-15));

    // vacuum dataset, eta = 1: estimator -> 0
    states::StateSpec spec;
    spec.kind = states::StateKind::fock;
    spec.fock_n = 0;
    spec.truncation = 5;
    spec.loss_transmissivity = 1.0;
    const auto schedule = sampling::PhaseSchedule::from_total(20, 20000);
    const auto vacuum_data = sampling::generate_dataset(spec, schedule, 1.0, 4242);
    CHECK(binning::estimate_mean_photon(vacuum_data) == Approx(0.0).margin(0.015));
}

TEST_CASE("build_histograms hand-counted example", "[binning]") {
    std::vector<std::pair<double, double>> rows;
    for (int i = 0; i <= 9; ++i) rows.push_back({0.0, 0.1 * i});
    const auto hists =
        binning::build_histograms(dataset_from(rows), binning::WidthStrategy::fixed(0.25));
    REQUIRE(hists.size() == 1);
    const auto& h = hists[0];
    REQUIRE(h.counts.size() == 4);  // ceil(0.9 / 0.25) = 4
    CHECK(h.counts[0] == 3);        // {0.0, 0.1, 0.2}
    CHECK(h.counts[1] == 2);        // {0.3, 0.4}
    CHECK(h.counts[2] == 3);        // {0.5, 0.6, 0.7}
    CHECK(h.counts[3] == 2);        // {0.8, 0.9}
    CHECK(h.edges.front() == 0.0);
    CHECK(h.edges.back() >= 0.9);
    CHECK(h.n_samples == 10);
}

TEST_CASE("single sample yields one bin", "[binning]") {
    const auto hists = binning::build_histograms(dataset_from({{0.4, 1.7}}),
                                                 binning::WidthStrategy::fixed(0.3));
    REQUIRE(hists.size() == 1);
    REQUIRE(hists[0].counts.size() == 1);
    CHECK(hists[0].counts[0] == 1);
}

TEST_CASE("histograms conserve counts and keep equal spacing", "[binning]") {
    states::StateSpec spec;
    spec.kind = states::StateKind::cat;
    spec.alpha = 1.0;
    spec.truncation = 10;
    const auto schedule = sampling::PhaseSchedule::from_total(20, 4000);
    const auto dataset = sampling::generate_dataset(spec, schedule, 0.9, 1717);

    for (const auto& strategy :
         {binning::WidthStrategy::fixed(0.34), binning::WidthStrategy::scott(),
          binning::WidthStrategy::leonhardt(binning::LeonhardtSource::truncation),
          binning::WidthStrategy::leonhardt(binning::LeonhardtSource::estimated_mean)}) {
        const auto hists = binning::build_histograms(dataset, strategy);
        CHECK(hists.size() == 20);
        long total = 0;
        for (const auto& h : hists) {
            long phase_sum = 0;
            for (long c : h.counts) phase_sum += c;
            CHECK(phase_sum == h.n_samples);
            total += phase_sum;
            // equal spacing to 1e-12 relative
            const double width = h.width();
            for (std::size_t k = 0; k + 1 < h.edges.size(); ++k)
                CHECK(h.edges[k + 1] - h.edges[k] == Approx(width).epsilon(1e-12));
        }
        CHECK(total == dataset.size());
    }
}

TEST_CASE("strategy dispatch: per-phase scott, global leonhardt and fixed", "[binning]") {
    states::StateSpec spec;
    spec.kind = states::StateKind::cat;
    spec.alpha = 2.0;
    spec.truncation = 15;
    const auto schedule = sampling::PhaseSchedule::from_total(20, 4000);
    const auto dataset = sampling::generate_dataset(spec, schedule, 0.9, 2020);

    const auto scott = binning::build_histograms(dataset, binning::WidthStrategy::scott());
    std::vector<double> widths;
    for (const auto& h : scott) widths.push_back(h.width());
    CHECK(*std::max_element(widths.begin(), widths.end()) >
          1.05 * *std::min_element(widths.begin(), widths.end()));

    const auto leon_t = binning::build_histograms(
        dataset, binning::WidthStrategy::leonhardt(binning::LeonhardtSource::truncation));
    for (const auto& h : leon_t)
        CHECK(h.width() == Approx(binning::leonhardt_width(15.0)).epsilon(1e-12));

    const auto leon_mean = binning::build_histograms(
        dataset, binning::WidthStrategy::leonhardt(binning::LeonhardtSource::estimated_mean));
    const double expected = binning::leonhardt_width(binning::estimate_mean_photon(dataset));
    for (const auto& h : leon_mean) CHECK(h.width() == Approx(expected).epsilon(1e-12));

    const auto fixed = binning::build_histograms(dataset, binning::WidthStrategy::fixed(0.4));
    for (const auto& h : fixed) CHECK(h.width() == Approx(0.4).epsilon(1e-12));
}

TEST_CASE("histogram empirical CDF matches the exact empirical CDF at edges", "[binning]") {
    rng::Stream stream(31);
    std::vector<std::pair<double, double>> rows;
    for (int i = 0; i < 1500; ++i) rows.push_back({0.7, stream.uniform(-3.0, 3.0)});
    const auto dataset = dataset_from(rows);
    const auto hists = binning::build_histograms(dataset, binning::WidthStrategy::fixed(0.37));
    REQUIRE(hists.size() == 1);
    const auto& h = hists[0];

    std::vector<double> xs;
    for (const auto& s : dataset.samples) xs.push_back(s.x);
    long cumulative = 0;
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
        // count of samples strictly below the edge k+1... internal edges only
        if (k + 1 < h.counts.size()) {
            cumulative += h.counts[k];
            const long exact = std::count_if(xs.begin(), xs.end(),
                                             [&](double x) { return x < h.edges[k + 1]; });
            CHECK(cumulative == exact);
        }
    }
}

TEST_CASE("histogram csv export shape", "[binning]") {
    const auto hists = binning::build_histograms(
        dataset_from({{0.0, 0.1}, {0.0, 0.6}, {1.2, -0.4}}), binning::WidthStrategy::fixed(0.5));
    std::stringstream out;
    binning::write_histograms_csv(hists, out);
    std::string line;
    std::getline(out, line);
    CHECK(line == "theta,edge_low,edge_high,count");
    int rows = 0;
    while (std::getline(out, line))
        if (!line.empty()) ++rows;
    long bins = 0;
    for (const auto& h : hists) bins += static_cast<long>(h.counts.size());
    CHECK(rows == bins);
}

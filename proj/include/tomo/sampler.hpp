#pragma once

// Simulated homodyne data: the uniform phase schedule and rejection-sampled
// quadrature values from the true state's predicted densities.

#include "tomo/fock.hpp"
#include "tomo/rng.hpp"
#include "tomo/states.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tomo::sampling {

using fock::DensityMatrix;
using fock::Matrix;
using fock::RealVector;

// Phases theta_j = j pi / m, j = 0..m-1, with N/m samples each.
struct PhaseSchedule {
    int num_phases = 20;     // paper default m = 20
    long per_phase = 1000;   // paper default N/m for N = 20,000

    static PhaseSchedule from_total(int m, long total) {
        if (m < 1) throw std::invalid_argument("PhaseSchedule: need m >= 1");
        if (total < m || total % m != 0)
            throw std::invalid_argument("PhaseSchedule: total samples must be a positive multiple of m");
        return {m, total / m};
    }

    long total() const { return static_cast<long>(num_phases) * per_phase; }
    double phase(int j) const { return j * std::numbers::pi / num_phases; }
};

struct QuadratureSample {
    double theta = 0.0;
    double x = 0.0;
};

struct QuadratureDataset {
    std::vector<QuadratureSample> samples;
    std::uint64_t rng_seed = 0;
    int truncation = 0;
    double eta = 1.0;
    std::optional<states::StateSpec> source_spec;  // absent for imported data

    long size() const { return static_cast<long>(samples.size()); }
};

// Quadrature range over which densities are normalized and proposals drawn.
inline double quadrature_range(int truncation) {
    return std::sqrt(2.0 * truncation + 1.0) + 6.0;
}

// p(x) = Tr(point_povm(x, theta, t, eta) rho), evaluated through the channel
// dual: p(x) = psi(x)^T Re[rotate(apply_loss(rho, eta), -theta)] psi(x).
class PredictedDensity {
public:
    PredictedDensity(const DensityMatrix& rho, double theta, double eta)
        : truncation_(rho.truncation()) {
        const DensityMatrix smeared = eta < 1.0 ? states::apply_loss(rho, eta) : rho;
        kernel_ = fock::rotate_operator(smeared.matrix(), -theta).real();
        kernel_ = 0.5 * (kernel_ + kernel_.transpose().eval());
    }

    double operator()(double x) const {
        const RealVector psi = fock::wavefunctions(x, truncation_);
        double p = 0.0;
        for (int m = 0; m <= truncation_; ++m) {
            double row = 0.0;
            for (int n = 0; n <= truncation_; ++n) row += kernel_(m, n) * psi[n];
            p += psi[m] * row;
        }
        // PSD of the smeared state bounds negatives at roundoff level; clip.
        return p > 0.0 ? p : 0.0;
    }

    double x_max() const { return quadrature_range(truncation_); }

private:
    int truncation_;
    Eigen::MatrixXd kernel_;
};

inline PredictedDensity predicted_density(const DensityMatrix& rho, double theta, double eta) {
    return PredictedDensity(rho, theta, eta);
}

struct SamplerFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rejection sampling with a uniform proposal on [-X_max, X_max] and a
// grid-scanned envelope: M = 1.1 * max of p over a 4001-point uniform grid.
inline std::vector<double> sample_phase(const DensityMatrix& rho, double theta, double eta,
                                        long count, rng::Stream& stream) {
    if (count < 1) throw std::invalid_argument("sample_phase: count must be >= 1");
    const PredictedDensity density(rho, theta, eta);
    const double xmax = density.x_max();
    double peak = 0.0;
    constexpr int kGridPoints = 4001;
    for (int i = 0; i < kGridPoints; ++i) {
        const double x = -xmax + 2.0 * xmax * i / (kGridPoints - 1);
        peak = std::max(peak, density(x));
    }
    const double envelope = 1.1 * peak;
    if (!(envelope > 0.0)) throw SamplerFailure("sample_phase: density vanishes on the grid");

    std::vector<double> out;
    out.reserve(count);
    long proposals = 0;
    while (static_cast<long>(out.size()) < count) {
        const double x = stream.uniform(-xmax, xmax);
        const double u = stream.uniform();
        ++proposals;
        if (u * envelope <= density(x)) out.push_back(x);
        if (proposals >= 10'000'000 &&
            static_cast<double>(out.size()) < 1e-4 * static_cast<double>(proposals))
            throw SamplerFailure("sample_phase: acceptance rate below 1e-4; density is broken");
    }
    return out;
}

// Full simulated experiment: loss applied to the true state, eta folded into
// the sampling density, one substream per phase. Deterministic given seed.
inline QuadratureDataset generate_dataset(const states::StateSpec& spec,
                                          const PhaseSchedule& schedule, double eta,
                                          std::uint64_t seed) {
    if (schedule.num_phases < spec.truncation + 1)
        throw std::invalid_argument("generate_dataset: need at least t+1 phases for completeness");
    const states::PreparedState prepared = states::prepare_state(spec);
    QuadratureDataset dataset;
    dataset.rng_seed = seed;
    dataset.truncation = spec.truncation;
    dataset.eta = eta;
    dataset.source_spec = spec;
    dataset.samples.reserve(schedule.total());
    for (int j = 0; j < schedule.num_phases; ++j) {
        const double theta = schedule.phase(j);
        rng::Stream stream(rng::derive_seed(seed, static_cast<std::uint64_t>(j)));
        for (double x : sample_phase(prepared.rho, theta, eta, schedule.per_phase, stream))
            dataset.samples.push_back({theta, x});
    }
    return dataset;
}

inline void write_dataset_csv(const QuadratureDataset& dataset, std::ostream& os) {
    os << "theta,x\n";
    char line[80];
    for (const auto& s : dataset.samples) {
        std::snprintf(line, sizeof line, "%.17g,%.17g\n", s.theta, s.x);
        os << line;
    }
}

inline void write_dataset_csv(const QuadratureDataset& dataset, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_dataset_csv: cannot open " + path);
    write_dataset_csv(dataset, os);
}

// Import of externally recorded homodyne data in the export format.
inline QuadratureDataset read_dataset_csv(std::istream& is, int truncation, double eta) {
    QuadratureDataset dataset;
    dataset.truncation = truncation;
    dataset.eta = eta;
    std::string line;
    if (!std::getline(is, line) || line.rfind("theta", 0) != 0)
        throw std::runtime_error("read_dataset_csv: missing 'theta,x' header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("read_dataset_csv: malformed row: " + line);
        QuadratureSample s;
        s.theta = std::stod(line.substr(0, comma));
        s.x = std::stod(line.substr(comma + 1));
        dataset.samples.push_back(s);
    }
    return dataset;
}

inline QuadratureDataset read_dataset_csv(const std::string& path, int truncation, double eta) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_dataset_csv: cannot open " + path);
    return read_dataset_csv(is, truncation, eta);
}

}  // namespace tomo::sampling

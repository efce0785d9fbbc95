#pragma once

// Quadrature measurement operators: point-valued densities (POVM-center) and
// bin-integrated probabilities (POVM-integral), with detector efficiency
// folded in through the loss Kraus operators at tau = eta.

#include "tomo/binning.hpp"
#include "tomo/fock.hpp"
#include "tomo/states.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace tomo::povm {

using fock::Complex;
using fock::Matrix;
using fock::RealVector;

// Hermitian PSD operator whose trace against rho is an outcome probability
// (integral mode) or probability density times width (center mode).
using MeasurementOperator = Matrix;

struct EfficiencyModel {
    double eta = 0.9;  // paper-default detection efficiency

    explicit EfficiencyModel(double e = 0.9) : eta(e) {
        if (!(eta > 0.0) || eta > 1.0)
            throw std::invalid_argument("EfficiencyModel: eta must be in (0, 1]");
    }
};

enum class BinOperatorMode { center, integral };

inline int default_quadrature_order(int truncation) { return std::max(20, truncation + 2); }

namespace detail {

// L(n, k) = sqrt(C(n,k) eta^(n-k) (1-eta)^k): the nonzero Kraus entries.
inline Eigen::MatrixXd loss_coefficients(double eta, int truncation) {
    const int d = truncation + 1;
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
    for (int n = 0; n < d; ++n) {
        double binom = 1.0;
        for (int k = 0; k <= n; ++k) {
            L(n, k) = std::sqrt(binom * std::pow(eta, n - k) * std::pow(1.0 - eta, k));
            binom *= double(n - k) / double(k + 1);
        }
    }
    return L;
}

// sum_k E_k^dag W E_k using the banded structure of the loss Kraus operators.
inline Matrix smear_with_loss(const Matrix& w, const Eigen::MatrixXd& coeff) {
    const int d = static_cast<int>(w.rows());
    Matrix out = Matrix::Zero(d, d);
    for (int m = 0; m < d; ++m) {
        for (int n = 0; n <= m; ++n) {
            Complex acc = 0.0;
            for (int k = 0; k <= n; ++k) acc += coeff(m, k) * coeff(n, k) * w(m - k, n - k);
            out(m, n) = acc;
            out(n, m) = std::conj(acc);
        }
    }
    return out;
}

// Rotated quadrature eigenvector in the number basis: v_m = psi_m(x) e^{i m theta},
// so that v v^dag = U(theta)^dag |x><x| U(theta).
inline fock::Vector rotated_wavefunction(double x, double theta, int truncation) {
    const RealVector psi = fock::wavefunctions(x, truncation);
    fock::Vector v(truncation + 1);
    for (int m = 0; m <= truncation; ++m) v[m] = psi[m] * std::polar(1.0, m * theta);
    return v;
}

}  // namespace detail

// Operator whose trace against rho is the probability density of outcome x at
// phase theta: sum_k E_k(eta)^dag U(theta)^dag |x><x| U(theta) E_k(eta).
inline MeasurementOperator point_povm(double x, double theta, int truncation, double eta) {
    EfficiencyModel model(eta);
    const fock::Vector v = detail::rotated_wavefunction(x, theta, truncation);
    Matrix w = v * v.adjoint();
    if (eta == 1.0) return w;
    return detail::smear_with_loss(w, detail::loss_coefficients(eta, truncation));
}

// Integral of the point operator over [a, b] by Gauss-Legendre quadrature;
// trace against rho is the probability of an outcome in the bin.
inline MeasurementOperator integrated_povm(double a, double b, double theta, int truncation,
                                           double eta, int quadrature_order) {
    if (!(a < b)) throw std::invalid_argument("integrated_povm: need a < b");
    if (quadrature_order < 2)
        throw std::invalid_argument("integrated_povm: quadrature order must be >= 2");
    EfficiencyModel model(eta);
    const auto rule = fock::gauss_legendre(quadrature_order);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    const int d = truncation + 1;
    Matrix w = Matrix::Zero(d, d);
    for (int j = 0; j < quadrature_order; ++j) {
        const fock::Vector v =
            detail::rotated_wavefunction(mid + half * rule.nodes[j], theta, truncation);
        w.noalias() += (half * rule.weights[j]) * (v * v.adjoint());
    }
    w = 0.5 * (w + w.adjoint().eval());
    if (eta == 1.0) return w;
    return detail::smear_with_loss(w, detail::loss_coefficients(eta, truncation));
}

// Bin approximated by its center: density operator at (a+b)/2 scaled by the
// width, so center and integral modes share one likelihood convention.
inline MeasurementOperator center_povm_for_bin(double a, double b, double theta, int truncation,
                                               double eta) {
    if (!(a < b)) throw std::invalid_argument("center_povm_for_bin: need a < b");
    return (b - a) * point_povm(0.5 * (a + b), theta, truncation, eta);
}

// Memo for bin operators keyed on everything that determines them. Histogram
// edges differ between data sets, so hits occur only when edges coincide.
class OperatorCache {
public:
    using Key = std::tuple<std::uint64_t, std::uint64_t, std::uint64_t, int, std::uint64_t, int, int>;

    std::shared_ptr<const Matrix> get_or_build(double theta, double a, double b,
                                               BinOperatorMode mode, int truncation, double eta,
                                               int order, const auto& build) {
        const Key key{std::bit_cast<std::uint64_t>(theta), std::bit_cast<std::uint64_t>(a),
                      std::bit_cast<std::uint64_t>(b), static_cast<int>(mode),
                      std::bit_cast<std::uint64_t>(eta), truncation, order};
        {
            std::lock_guard lock(mutex_);
            if (auto it = entries_.find(key); it != entries_.end()) return it->second;
        }
        auto op = std::make_shared<const Matrix>(build());
        std::lock_guard lock(mutex_);
        return entries_.emplace(key, std::move(op)).first->second;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }

private:
    mutable std::mutex mutex_;
    std::map<Key, std::shared_ptr<const Matrix>> entries_;
};

struct BinOperator {
    double lo = 0.0;
    double hi = 0.0;
    long count = 0;
    std::shared_ptr<const Matrix> op;
};

struct PhaseBinOperators {
    double theta = 0.0;
    std::vector<BinOperator> bins;
};

struct BinOperatorSet {
    BinOperatorMode mode = BinOperatorMode::center;
    double eta = 1.0;
    int truncation = 0;
    std::vector<PhaseBinOperators> phases;

    std::size_t total_operators() const {
        std::size_t n = 0;
        for (const auto& p : phases) n += p.bins.size();
        return n;
    }
};

// One operator per nonempty bin per phase; empty bins contribute nothing to
// the likelihood and are skipped.
inline BinOperatorSet build_bin_operator_set(const std::vector<binning::PhaseHistogram>& histograms,
                                             BinOperatorMode mode, int truncation, double eta,
                                             OperatorCache* cache = nullptr) {
    BinOperatorSet set;
    set.mode = mode;
    set.eta = eta;
    set.truncation = truncation;
    const int order = default_quadrature_order(truncation);
    for (const auto& hist : histograms) {
        PhaseBinOperators phase;
        phase.theta = hist.theta;
        for (std::size_t i = 0; i < hist.counts.size(); ++i) {
            if (hist.counts[i] == 0) continue;
            const double a = hist.edges[i], b = hist.edges[i + 1];
            auto build = [&] {
                return mode == BinOperatorMode::center
                           ? center_povm_for_bin(a, b, hist.theta, truncation, eta)
                           : integrated_povm(a, b, hist.theta, truncation, eta, order);
            };
            std::shared_ptr<const Matrix> op =
                cache ? cache->get_or_build(hist.theta, a, b, mode, truncation, eta, order, build)
                      : std::make_shared<const Matrix>(build());
            phase.bins.push_back({a, b, hist.counts[i], std::move(op)});
        }
        set.phases.push_back(std::move(phase));
    }
    return set;
}

}  // namespace tomo::povm

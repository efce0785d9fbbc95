#pragma once

// Test-state families in the truncated number basis (even cat, squeezed
// vacuum, Fock) and the photon-loss channel applied before measurement.

#include "tomo/fock.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tomo::states {

using fock::Complex;
using fock::DensityMatrix;
using fock::Matrix;
using fock::RealVector;

enum class StateKind { cat, squeezed_vacuum, fock };

struct StateSpec {
    StateKind kind = StateKind::cat;
    double alpha = 1.0;           // cat amplitude, > 0
    double variance_ratio = 1.0;  // squeezed-quadrature variance / vacuum variance, in (0, 1]
    int fock_n = 0;               // Fock photon number, 0 <= n <= truncation
    int truncation = 10;
    double loss_transmissivity = 0.95;  // tau in (0, 1]

    std::string label() const {
        switch (kind) {
            case StateKind::cat: return "cat(alpha=" + std::to_string(alpha) + ")";
            case StateKind::squeezed_vacuum:
                return "squeezed(ratio=" + std::to_string(variance_ratio) + ")";
            case StateKind::fock: return "fock(n=" + std::to_string(fock_n) + ")";
        }
        return "?";
    }
};

namespace detail {

inline DensityMatrix pure_state(const RealVector& amplitudes) {
    const double norm = amplitudes.norm();
    if (norm <= 0.0) throw std::runtime_error("pure_state: zero vector");
    RealVector c = amplitudes / norm;
    Matrix rho = (c * c.transpose()).cast<Complex>();
    return DensityMatrix(std::move(rho));
}

}  // namespace detail

// Even cat |alpha> + |-alpha>: amplitudes c_n ~ alpha^n / sqrt(n!) for even n,
// zero for odd n, renormalized after truncation.
inline DensityMatrix make_cat(double alpha, int truncation) {
    if (!(alpha > 0.0)) throw std::invalid_argument("make_cat: alpha must be > 0");
    if (truncation < 2) throw std::invalid_argument("make_cat: truncation must be >= 2");
    RealVector c = RealVector::Zero(truncation + 1);
    double coeff = 1.0;  // alpha^n / sqrt(n!)
    for (int n = 0; n <= truncation; ++n) {
        if (n % 2 == 0) c[n] = coeff;
        coeff *= alpha / std::sqrt(double(n + 1));
    }
    return detail::pure_state(c);
}

// Probability weight of the untruncated even cat above photon number t.
inline double cat_truncation_leakage(double alpha, int truncation) {
    const double a2 = alpha * alpha;
    double partial = 0.0, term = 1.0;  // term = a2^n / n!
    for (int n = 0; n <= truncation; ++n) {
        if (n % 2 == 0) partial += term;
        term *= a2 / double(n + 1);
    }
    return 1.0 - partial / std::cosh(a2);
}

// Squeezed vacuum with squeezed axis along X: r = -ln(variance_ratio)/2,
// c_{2m} = sqrt(sech r) (-tanh r)^m sqrt((2m)!) / (2^m m!).
inline DensityMatrix make_squeezed_vacuum(double variance_ratio, int truncation) {
    if (!(variance_ratio > 0.0) || variance_ratio > 1.0)
        throw std::invalid_argument("make_squeezed_vacuum: variance_ratio must be in (0, 1]");
    const double r = -0.5 * std::log(variance_ratio);
    const double th = std::tanh(r);
    RealVector c = RealVector::Zero(truncation + 1);
    double coeff = 1.0;  // (-tanh r)^m sqrt((2m)!) / (2^m m!), sech factor drops in renormalization
    for (int m = 0; 2 * m <= truncation; ++m) {
        c[2 * m] = coeff;
        coeff *= -th * std::sqrt(double(2 * m + 1) * double(2 * m + 2)) / (2.0 * double(m + 1));
    }
    return detail::pure_state(c);
}

inline double squeezed_truncation_leakage(double variance_ratio, int truncation) {
    const double r = -0.5 * std::log(variance_ratio);
    const double th2 = std::tanh(r) * std::tanh(r);
    double partial = 0.0;
    double term = 1.0 / std::cosh(r);  // |c_{2m}|^2 of the untruncated state
    for (int m = 0; 2 * m <= truncation; ++m) {
        partial += term;
        term *= th2 * double(2 * m + 1) / double(2 * m + 2);
    }
    return 1.0 - partial;
}

inline DensityMatrix make_fock(int n, int truncation) {
    if (n < 0 || n > truncation)
        throw std::invalid_argument("make_fock: need 0 <= n <= truncation");
    const int d = truncation + 1;
    Matrix rho = Matrix::Zero(d, d);
    rho(n, n) = 1.0;
    return DensityMatrix(std::move(rho));
}

// Kraus operators of the transmissivity-tau loss channel,
// <n-k|E_k|n> = sqrt(C(n,k) tau^(n-k) (1-tau)^k), k = 0..t.
inline std::vector<Matrix> loss_kraus_operators(double tau, int truncation) {
    if (!(tau > 0.0) || tau > 1.0)
        throw std::invalid_argument("loss_kraus_operators: tau must be in (0, 1]");
    const int d = truncation + 1;
    std::vector<Matrix> kraus;
    kraus.reserve(d);
    for (int k = 0; k < d; ++k) {
        Matrix e = Matrix::Zero(d, d);
        for (int n = k; n < d; ++n) {
            double binom = 1.0;
            for (int j = 0; j < k; ++j) binom *= double(n - j) / double(j + 1);
            e(n - k, n) = std::sqrt(binom * std::pow(tau, n - k) * std::pow(1.0 - tau, k));
        }
        kraus.push_back(std::move(e));
    }
    return kraus;
}

// rho -> sum_k E_k rho E_k^dag. Trace preserving on the truncated space.
inline DensityMatrix apply_loss(const DensityMatrix& rho, double tau) {
    if (!(tau > 0.0) || tau > 1.0)
        throw std::invalid_argument("apply_loss: tau must be in (0, 1]");
    if (tau == 1.0) return rho;
    const auto kraus = loss_kraus_operators(tau, rho.truncation());
    Matrix out = Matrix::Zero(rho.dim(), rho.dim());
    for (const Matrix& e : kraus) out += e * rho.matrix() * e.adjoint();
    out = 0.5 * (out + out.adjoint().eval());
    return DensityMatrix(std::move(out));
}

// Heisenberg-picture counterpart: op -> sum_k E_k^dag op E_k, so that
// Tr(adjoint(op) rho) = Tr(op apply_loss(rho)).
inline Matrix apply_loss_adjoint(const Matrix& op, double tau, int truncation) {
    if (!(tau > 0.0) || tau > 1.0)
        throw std::invalid_argument("apply_loss_adjoint: tau must be in (0, 1]");
    if (tau == 1.0) return op;
    const auto kraus = loss_kraus_operators(tau, truncation);
    Matrix out = Matrix::Zero(op.rows(), op.cols());
    for (const Matrix& e : kraus) out += e.adjoint() * op * e;
    return out;
}

// A constructed true state: pure family member, then the pre-measurement
// loss channel. Leakage is the untruncated-state weight beyond t; values
// above 1e-6 are flagged so runs can record the warning in metadata.
struct PreparedState {
    DensityMatrix rho;
    double truncation_leakage = 0.0;
    bool leakage_warning = false;
};

inline PreparedState prepare_state(const StateSpec& spec) {
    DensityMatrix pure = [&] {
        switch (spec.kind) {
            case StateKind::cat: return make_cat(spec.alpha, spec.truncation);
            case StateKind::squeezed_vacuum:
                return make_squeezed_vacuum(spec.variance_ratio, spec.truncation);
            case StateKind::fock: return make_fock(spec.fock_n, spec.truncation);
        }
        throw std::invalid_argument("prepare_state: unknown state kind");
    }();
    double leakage = 0.0;
    switch (spec.kind) {
        case StateKind::cat: leakage = cat_truncation_leakage(spec.alpha, spec.truncation); break;
        case StateKind::squeezed_vacuum:
            leakage = squeezed_truncation_leakage(spec.variance_ratio, spec.truncation);
            break;
        case StateKind::fock: leakage = 0.0; break;
    }
    PreparedState out{apply_loss(pure, spec.loss_transmissivity), leakage, leakage > 1e-6};
    return out;
}

}  // namespace tomo::states

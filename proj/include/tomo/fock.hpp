#pragma once

// Numerical foundation for truncated-Fock-space tomography: quadrature
// wavefunctions, Hermitian matrix utilities, matrix square roots, fidelity.
//
// Conventions (fixed throughout the library):
//   - Hilbert space truncated at `t` photons, dimension t+1.
//   - Quadrature units with vacuum variance 1/2, i.e. X = (a + a^dag)/sqrt(2)
//     and n = (X^2 + P^2 - 1)/2, so psi_0(x) = pi^(-1/4) exp(-x^2/2).
//   - Phase evolution U(theta) = diag(exp(-i n theta)) in the number basis.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tomo::fock {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

// A Hermitian operator on the truncated space (POVM elements, R operators,
// matrix square roots). Plain Eigen matrix; validity is checked where needed.
using HermitianOperator = Matrix;

struct HilbertDim {
    int truncation = 0;  // maximum photon number t
    constexpr int dim() const noexcept { return truncation + 1; }
};

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kPsdTol = 1e-10;

inline double hermiticity_error(const Matrix& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const Matrix& m, double tol = kHermitianTol) {
    return m.rows() == m.cols() && hermiticity_error(m) <= tol;
}

inline double min_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// Hermitian, positive-semidefinite, unit-trace matrix in the number basis.
// Invariants are enforced at construction; instances are immutable values.
class DensityMatrix {
public:
    explicit DensityMatrix(Matrix m) : m_(std::move(m)) {
        if (m_.rows() != m_.cols() || m_.rows() < 1)
            throw std::invalid_argument("DensityMatrix: matrix must be square");
        if (hermiticity_error(m_) > kHermitianTol)
            throw std::invalid_argument("DensityMatrix: not Hermitian");
        if (std::abs(m_.trace().real() - 1.0) > kTraceTol ||
            std::abs(m_.trace().imag()) > kTraceTol)
            throw std::invalid_argument("DensityMatrix: trace != 1");
        if (min_eigenvalue(m_) < -kPsdTol)
            throw std::invalid_argument("DensityMatrix: not positive semidefinite");
    }

    const Matrix& matrix() const noexcept { return m_; }
    int dim() const noexcept { return static_cast<int>(m_.rows()); }
    int truncation() const noexcept { return dim() - 1; }

private:
    Matrix m_;
};

inline DensityMatrix maximally_mixed(int truncation) {
    const int d = truncation + 1;
    return DensityMatrix(Matrix::Identity(d, d) / static_cast<double>(d));
}

// psi_n(x) for n = 0..t via the stable two-term recurrence
//   psi_{n+1} = (sqrt(2) x psi_n - sqrt(n) psi_{n-1}) / sqrt(n+1).
inline RealVector wavefunctions(double x, int truncation) {
    if (!std::isfinite(x))
        throw std::invalid_argument("wavefunctions: x must be finite");
    if (truncation < 0)
        throw std::invalid_argument("wavefunctions: truncation must be >= 0");
    RealVector psi(truncation + 1);
    psi[0] = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
    if (truncation >= 1)
        psi[1] = std::numbers::sqrt2 * x * psi[0];
    for (int n = 1; n < truncation; ++n)
        psi[n + 1] = (std::numbers::sqrt2 * x * psi[n] - std::sqrt(double(n)) * psi[n - 1]) /
                     std::sqrt(double(n + 1));
    return psi;
}

// Annihilation operator a, <n-1|a|n> = sqrt(n).
inline Matrix annihilation_operator(int truncation) {
    const int d = truncation + 1;
    Matrix a = Matrix::Zero(d, d);
    for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(double(n));
    return a;
}

inline Matrix number_operator(int truncation) {
    const int d = truncation + 1;
    Matrix n = Matrix::Zero(d, d);
    for (int k = 0; k < d; ++k) n(k, k) = double(k);
    return n;
}

// X = (a + a^dag)/sqrt(2); vacuum variance 1/2.
inline Matrix x_quadrature_operator(int truncation) {
    const Matrix a = annihilation_operator(truncation);
    return (a + a.adjoint()) / std::numbers::sqrt2;
}

// P = (a - a^dag)/(i sqrt(2)).
inline Matrix p_quadrature_operator(int truncation) {
    const Matrix a = annihilation_operator(truncation);
    return (a - a.adjoint()) / Complex(0.0, std::numbers::sqrt2);
}

inline double mean_photon(const DensityMatrix& rho) {
    double nbar = 0.0;
    for (int n = 0; n < rho.dim(); ++n) nbar += n * rho.matrix()(n, n).real();
    return nbar;
}

// U(theta)^dag op U(theta) with U = diag(exp(-i n theta)): entry (m, n) is
// multiplied by exp(i (m - n) theta).
inline HermitianOperator rotate_operator(const HermitianOperator& op, double theta) {
    if (!std::isfinite(theta))
        throw std::invalid_argument("rotate_operator: theta must be finite");
    const int d = static_cast<int>(op.rows());
    Matrix out(d, op.cols());
    for (int m = 0; m < d; ++m) {
        for (int n = 0; n < op.cols(); ++n)
            out(m, n) = op(m, n) * std::polar(1.0, (m - n) * theta);
    }
    return out;
}

// Principal square root of a Hermitian PSD matrix. Eigenvalues in
// [-1e-8, 0) are clipped to zero; anything below -1e-8 is rejected.
inline HermitianOperator matrix_sqrt(const HermitianOperator& m) {
    if (!is_hermitian(m, 1e-10))
        throw std::invalid_argument("matrix_sqrt: matrix must be Hermitian");
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("matrix_sqrt: eigendecomposition failed");
    RealVector vals = es.eigenvalues();
    if (vals.minCoeff() < -1e-8)
        throw std::domain_error("matrix_sqrt: matrix is not positive semidefinite (eigenvalue " +
                                std::to_string(vals.minCoeff()) + ")");
    RealVector roots = vals.cwiseMax(0.0).cwiseSqrt();
    Matrix s = es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().adjoint();
    return 0.5 * (s + s.adjoint().eval());
}

// F = Tr sqrt(sqrt(rho) rho_true sqrt(rho)), the state-overlap score.
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& rho_true) {
    if (rho.dim() != rho_true.dim())
        throw std::invalid_argument("fidelity: dimension mismatch");
    const Matrix s = matrix_sqrt(rho.matrix());
    Matrix inner = s * rho_true.matrix() * s;
    inner = 0.5 * (inner + inner.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<Matrix> es(inner, Eigen::EigenvaluesOnly);
    double f = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const double lam = es.eigenvalues()[i];
        if (lam < -kPsdTol && lam < -1e-8)
            throw std::runtime_error("fidelity: inner matrix has a large negative eigenvalue");
        f += std::sqrt(std::max(lam, 0.0));
    }
    return f;
}

// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
// Legendre recurrence. Exact for polynomials of degree <= 2*order - 1.
struct GaussLegendreRule {
    RealVector nodes;
    RealVector weights;
};

inline GaussLegendreRule gauss_legendre(int order) {
    if (order < 1)
        throw std::invalid_argument("gauss_legendre: order must be >= 1");
    GaussLegendreRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    const int half = (order + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int n = 1; n < order; ++n) {
                const double p2 = ((2 * n + 1) * x * p1 - n * p0) / (n + 1);
                p0 = p1;
                p1 = p2;
            }
            dp = order * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[order - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[order - 1 - i] = w;
    }
    return rule;
}

}  // namespace tomo::fock
